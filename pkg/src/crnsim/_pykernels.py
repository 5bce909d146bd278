"""Pure-Python/numpy implementation of the candidate-scoring kernel.

Semantics must match ``_kernels.pyx`` exactly; see ``crnsim.kernels``.
"""

import math

import numpy as np

EPS_P = 1e-3
EPS_T = 1e-4
FEASIBILITY_TOL = 1e-18
RANK_TOL = 1e-10


def _bits(mask):
    out = []
    i = 0
    mask = int(mask)
    while mask:
        if mask & 1:
            out.append(i)
        mask >>= 1
        i += 1
    return out


def projected_gain(h, g):
    """Squared norm of ``h`` with the column span of ``g`` removed.

    Returns ``(gain, feasible)``.
    """
    h2 = float(np.vdot(h, h).real)
    if g.shape[1]:
        u, s, _ = np.linalg.svd(g, full_matrices=False)
        if s[0] > 0:
            r = int(np.sum(s > RANK_TOL * s[0]))
            q = u[:, :r]
            h = h - q @ (q.conj().T @ h)
    gain = float(np.vdot(h, h).real)
    if h2 == 0.0 or gain <= FEASIBILITY_TOL * h2:
        return 0.0, False
    return gain, True


def score_candidates(h, g, pu_mask, mu, cur, valid, avail, recv_avail, subsets, interference,
                     snr_scale, bandwidth, tau, c, use_ppu, use_tswitch, null_singletons=True):
    k, n = h.shape
    s_count = len(subsets)
    capacity = np.zeros((s_count, k))
    ppu = np.zeros((s_count, k))
    tsw = np.zeros((s_count, k))
    score = np.zeros((s_count, k))
    flags = np.zeros((s_count, k), dtype=np.int8)
    for s, sub in enumerate(subsets):
        members = _bits(sub)
        size = len(members)
        for ch in range(k):
            bit = 1 << ch
            if not recv_avail & bit or any(not int(avail[m]) & bit for m in members):
                continue
            flags[s, ch] = 2 if all(int(valid[m]) & bit for m in members) else 1
            pmask = 0
            for m in members:
                pmask |= int(pu_mask[ch, m])
            nulled = _bits(pmask) if size >= 2 or null_singletons else []
            hv = h[ch, members]
            gv = g[ch][np.ix_(members, nulled)]
            gain, ok = projected_gain(hv, gv)
            cap = bandwidth * math.log2(1.0 + snr_scale * gain) if ok else 0.0
            total_mu = sum(float(mu[j]) for j in _bits(pmask))
            p = -math.expm1(-tau * total_mu)
            t = c * max(abs(int(cur[m]) - ch) for m in members)
            den = float(interference[s])
            if use_ppu:
                den *= max(p, EPS_P)
            if use_tswitch:
                den *= max(t, EPS_T)
            capacity[s, ch] = cap
            ppu[s, ch] = p
            tsw[s, ch] = t
            score[s, ch] = cap / den
    return capacity, ppu, tsw, score, flags
