# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled candidate-scoring kernel.

Mirrors ``crnsim._pykernels.score_candidates``; projections use modified
Gram-Schmidt with one re-orthogonalisation pass instead of an SVD.
"""

import numpy as np
cimport numpy as cnp
from libc.math cimport log2, expm1, sqrt

cnp.import_array()

ctypedef unsigned long long u64

cdef enum:
    MAXN = 64
    MAXQ = 64

cdef double EPS_P = 1e-3
cdef double EPS_T = 1e-4
cdef double FEASIBILITY_TOL = 1e-18
cdef double RANK_TOL = 1e-10


cdef inline double cabs2(double complex z) nogil:
    return z.real * z.real + z.imag * z.imag


cdef double project_out(const double complex[:, :, ::1] g, const double complex[:, ::1] h,
                        Py_ssize_t ch, int* members, int m, int* nulled, int nq,
                        double complex* basis, double complex* v, double complex* r,
                        bint* feasible) nogil:
    """Squared norm of h (restricted to members) off the span of nulled PU columns."""
    cdef int nb = 0
    cdef int i, j, b, rep
    cdef double complex dot
    cdef double norm2, gnorm2, h2, gain
    for j in range(nq):
        gnorm2 = 0.0
        for i in range(m):
            v[i] = g[ch, members[i], nulled[j]]
            gnorm2 += cabs2(v[i])
        if gnorm2 == 0.0:
            continue
        for rep in range(2):
            for b in range(nb):
                dot = 0.0
                for i in range(m):
                    dot = dot + basis[b * MAXN + i].conjugate() * v[i]
                for i in range(m):
                    v[i] = v[i] - dot * basis[b * MAXN + i]
        norm2 = 0.0
        for i in range(m):
            norm2 += cabs2(v[i])
        # RANK_TOL acts on amplitudes
        if norm2 <= RANK_TOL * RANK_TOL * gnorm2:
            continue
        norm2 = sqrt(norm2)
        for i in range(m):
            basis[nb * MAXN + i] = v[i] / norm2
        nb += 1
        if nb >= m:
            break
    h2 = 0.0
    for i in range(m):
        r[i] = h[ch, members[i]]
        h2 += cabs2(r[i])
    for rep in range(2):
        for b in range(nb):
            dot = 0.0
            for i in range(m):
                dot = dot + basis[b * MAXN + i].conjugate() * r[i]
            for i in range(m):
                r[i] = r[i] - dot * basis[b * MAXN + i]
    gain = 0.0
    for i in range(m):
        gain += cabs2(r[i])
    if h2 == 0.0 or gain <= FEASIBILITY_TOL * h2:
        feasible[0] = False
        return 0.0
    feasible[0] = True
    return gain


def score_candidates(const double complex[:, ::1] h,
                     const double complex[:, :, ::1] g,
                     const u64[:, ::1] pu_mask,
                     const double[::1] mu,
                     const long long[::1] cur,
                     const u64[::1] valid,
                     const u64[::1] avail,
                     u64 recv_avail,
                     const u64[::1] subsets,
                     const double[::1] interference,
                     double snr_scale, double bandwidth, double tau, double c,
                     bint use_ppu, bint use_tswitch, bint null_singletons=True):
    cdef Py_ssize_t k = h.shape[0]
    cdef Py_ssize_t n = h.shape[1]
    cdef Py_ssize_t q = g.shape[2]
    cdef Py_ssize_t s_count = subsets.shape[0]
    if n > MAXN or q > MAXQ:
        raise ValueError("kernel limited to 64 members and 64 PUs per call")

    capacity_a = np.zeros((s_count, k))
    ppu_a = np.zeros((s_count, k))
    tsw_a = np.zeros((s_count, k))
    score_a = np.zeros((s_count, k))
    flags_a = np.zeros((s_count, k), dtype=np.int8)
    cdef double[:, ::1] capacity = capacity_a
    cdef double[:, ::1] ppu = ppu_a
    cdef double[:, ::1] tsw = tsw_a
    cdef double[:, ::1] score = score_a
    cdef signed char[:, ::1] flags = flags_a

    cdef int members[MAXN]
    cdef int nulled[MAXQ]
    cdef double complex basis[MAXN * MAXN]
    cdef double complex v[MAXN]
    cdef double complex r[MAXN]
    cdef Py_ssize_t s, ch
    cdef int m, nq, i, j, d, dmax
    cdef u64 sub, bit, pmask
    cdef bint ok, valid_all, avail_all
    cdef double gain, cap, total_mu, p, t, den

    for s in range(s_count):
        sub = subsets[s]
        m = 0
        for i in range(n):
            if (sub >> i) & 1:
                members[m] = i
                m += 1
        for ch in range(k):
            bit = (<u64>1) << ch
            if not (recv_avail & bit):
                continue
            avail_all = True
            valid_all = True
            pmask = 0
            dmax = 0
            for i in range(m):
                if not (avail[members[i]] & bit):
                    avail_all = False
                if not (valid[members[i]] & bit):
                    valid_all = False
                pmask |= pu_mask[ch, members[i]]
                d = <int>(cur[members[i]] - ch)
                if d < 0:
                    d = -d
                if d > dmax:
                    dmax = d
            if not avail_all:
                continue
            flags[s, ch] = 2 if valid_all else 1
            nq = 0
            total_mu = 0.0
            for j in range(q):
                if (pmask >> j) & 1:
                    nulled[nq] = j
                    nq += 1
                    total_mu += mu[j]
            # interweave singletons transmit without nulling and wait for PUs instead
            if m < 2 and not null_singletons:
                nq = 0
            gain = project_out(g, h, ch, members, m, nulled, nq, basis, v, r, &ok)
            cap = bandwidth * log2(1.0 + snr_scale * gain) if ok else 0.0
            p = -expm1(-tau * total_mu)
            t = c * dmax
            den = interference[s]
            if use_ppu:
                den *= p if p > EPS_P else EPS_P
            if use_tswitch:
                den *= t if t > EPS_T else EPS_T
            capacity[s, ch] = cap
            ppu[s, ch] = p
            tsw[s, ch] = t
            score[s, ch] = cap / den
    return capacity_a, ppu_a, tsw_a, score_a, flags_a
