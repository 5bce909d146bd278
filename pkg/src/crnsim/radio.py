"""Channel coefficients, zero-forcing cooperative beamforming and capacity."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .model import NetworkState, SimConfig

# squared-amplitude threshold (relative to ||h||^2) below which the projected
# signal is treated as numerically zero
FEASIBILITY_TOL = 1e-18
# relative singular-value cutoff for the PU span
RANK_TOL = 1e-10


@dataclass
class ChannelModel:
    """Complex gains ``su[k, a, b]`` between SUs and ``pu[k, s, p]`` from SU to PU.

    Both arrays are zero outside range. ``noise_density`` is in W/Hz and
    ``bandwidth`` in Hz.
    """

    su: np.ndarray
    pu: np.ndarray
    noise_density: float
    bandwidth: float

    def coeff(self, a: int, b: int, channel: int) -> complex:
        return complex(self.su[channel, a, b])

    def coeff_pu(self, su: int, pu: int, channel: int) -> complex:
        return complex(self.pu[channel, su, pu])

    @property
    def num_channels(self) -> int:
        return self.su.shape[0]


@dataclass
class BeamformingResult:
    weights: np.ndarray
    effective_gain: float
    feasible: bool


def noise_density_for(config: SimConfig) -> float:
    """Noise PSD giving ``snr_ref_db`` on a single link at ``snr_ref_distance``."""
    ref_gain = config.snr_ref_distance ** -config.path_loss_exponent
    snr = 10.0 ** (config.snr_ref_db / 10.0)
    return config.max_power * ref_gain / (snr * config.bandwidth)


def mean_square_gain(distance, exponent: float = 3.0):
    return np.maximum(distance, 1.0) ** -exponent


def fading_samples(distance: float, size, rng: np.random.Generator, exponent: float = 3.0) -> np.ndarray:
    """Circularly-symmetric complex Gaussian gains with power-law mean square."""
    sigma = math.sqrt(mean_square_gain(distance, exponent) / 2.0)
    return sigma * (rng.standard_normal(size) + 1j * rng.standard_normal(size))


def sample_coefficients(state: NetworkState, rng: np.random.Generator) -> ChannelModel:
    """Draw one slow-fading block of coefficients for every channel."""
    cfg = state.config
    k = cfg.num_channels
    n = len(state.sus)
    p = len(state.pus)
    alpha = cfg.path_loss_exponent

    su = np.zeros((k, n, n), dtype=complex)
    if n:
        iu = np.triu_indices(n, 1)
        d = state.su_dist[iu]
        sigma = np.sqrt(mean_square_gain(d, alpha) / 2.0)
        draw = rng.standard_normal((k, len(d))) + 1j * rng.standard_normal((k, len(d)))
        vals = draw * sigma * state.in_range[iu]
        su[:, iu[0], iu[1]] = vals
        su[:, iu[1], iu[0]] = vals

    pu = np.zeros((k, n, p), dtype=complex)
    if n and p:
        sigma = np.sqrt(mean_square_gain(state.su_pu_dist, alpha) / 2.0)
        draw = rng.standard_normal((k, n, p)) + 1j * rng.standard_normal((k, n, p))
        pu = draw * sigma * state.pu_in_range

    return ChannelModel(su=su, pu=pu, noise_density=noise_density_for(cfg), bandwidth=cfg.bandwidth)


def _null_basis(g: np.ndarray) -> np.ndarray:
    """Orthonormal basis of the column span of ``g``."""
    if g.size == 0:
        return np.zeros((g.shape[0], 0), dtype=complex)
    u, s, _ = np.linalg.svd(g, full_matrices=False)
    if s.size == 0 or s[0] == 0:
        return np.zeros((g.shape[0], 0), dtype=complex)
    r = int(np.sum(s > RANK_TOL * s[0]))
    return u[:, :r]


def beamform(group: Sequence[int], receiver: int, nulled_pus: Sequence[int], channel: int,
             model: ChannelModel) -> BeamformingResult:
    """Zero-forcing weights for ``group`` toward ``receiver``.

    The received amplitude is ``sum_m w_m h_m`` and the leak at PU ``p`` is
    ``sum_m w_m g_mp``. Weights are the conjugate of ``h`` projected off the
    span of the PU vectors, normalised to unit total power.
    """
    if len(group) == 0:
        raise ValueError("beamforming group is empty")
    if receiver in group:
        raise ValueError("receiver cannot be a group member")
    idx = list(group)
    h = model.su[channel, idx, receiver]
    g = model.pu[channel][np.ix_(idx, list(nulled_pus))]
    q = _null_basis(g)
    proj = h - q @ (q.conj().T @ h)
    gain = float(np.vdot(proj, proj).real)
    h2 = float(np.vdot(h, h).real)
    if h2 == 0.0 or gain <= FEASIBILITY_TOL * h2:
        return BeamformingResult(np.zeros(len(idx), dtype=complex), 0.0, False)
    w = proj.conj() / math.sqrt(gain)
    return BeamformingResult(w, float(abs(np.dot(w, h)) ** 2), True)


def shannon_capacity(gain: float, max_power: float, noise_density: float, bandwidth: float) -> float:
    return bandwidth * math.log2(1.0 + max_power * gain / (noise_density * bandwidth))


def achievable_capacity(group: Sequence[int], receiver: int, channel: int, model: ChannelModel,
                        nulled_pus: Sequence[int], max_power: float) -> float:
    """Shannon capacity of the beamformed link in bit/s (0 if infeasible)."""
    bf = beamform(group, receiver, nulled_pus, channel, model)
    if not bf.feasible:
        return 0.0
    return shannon_capacity(bf.effective_gain, max_power, model.noise_density, model.bandwidth)
