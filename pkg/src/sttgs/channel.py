"""Rician uplink channels, MRC composite gains, and achievable rates.

Gain matrices are plain ``(K, K)`` arrays: ``H[k, k] = ||h_k||^2`` and
``H[k, j] = |h_k^H h_j|^2 / ||h_k||^2`` is the interference leaking from
client ``j`` into the MRC output of client ``k``.
"""

from dataclasses import dataclass

import numpy as np

from .scenario import ScenarioConfig

__all__ = [
    "ChannelRealization",
    "steering_vector",
    "sample_channel",
    "composite_gains",
    "sinr",
    "rate",
    "spectral_efficiency",
    "save_gains",
    "load_gains",
]


@dataclass(frozen=True)
class ChannelRealization:
    h: np.ndarray  # (K, N) complex
    theta: np.ndarray  # (K,) LoS angles in radians


def steering_vector(theta: float, N: int) -> np.ndarray:
    """Half-wavelength ULA response ``exp(-j*pi*n*sin(theta))``, n = 0..N-1."""
    n = np.arange(N)
    return np.exp(-1j * np.pi * n * np.sin(theta))


def sample_channel(config: ScenarioConfig, rng: np.random.Generator) -> ChannelRealization:
    K, N = config.K, config.N
    Kr = config.K_ric
    large = np.sqrt(config.h0 * np.asarray(config.omega) * config.distances ** (-config.alpha))
    theta = rng.uniform(-np.pi, np.pi, size=K)
    h = np.empty((K, N), dtype=complex)
    for k in range(K):
        while True:
            nlos = (rng.standard_normal(N) + 1j * rng.standard_normal(N)) / np.sqrt(2.0)
            hk = large[k] * (
                np.sqrt(Kr / (Kr + 1.0)) * steering_vector(theta[k], N)
                + np.sqrt(1.0 / (Kr + 1.0)) * nlos
            )
            if np.vdot(hk, hk).real > 0:
                break
        h[k] = hk
    return ChannelRealization(h=h, theta=theta)


def composite_gains(ch) -> np.ndarray:
    """Composite MRC gains from a realization or a ``(K, N)`` channel array."""
    h = ch.h if isinstance(ch, ChannelRealization) else np.asarray(ch)
    norms = np.einsum("kn,kn->k", h.conj(), h).real
    cross = np.abs(h.conj() @ h.T) ** 2  # |h_k^H h_j|^2
    H = cross / norms[:, None]
    np.fill_diagonal(H, norms)
    return H


def sinr(H, p, x=None, sigma2=1.0) -> np.ndarray:
    """Per-client SINR with interference weighted by the selection ``x``."""
    H = np.asarray(H, dtype=float)
    p = np.asarray(p, dtype=float)
    x = np.ones_like(p) if x is None else np.asarray(x, dtype=float)
    e = x * p
    signal = np.diag(H) * e
    interference = H @ e - signal
    return signal / (interference + sigma2)


def spectral_efficiency(H, p, x=None, sigma2=1.0) -> np.ndarray:
    """``log2(1 + SINR)`` per client, in bit/s/Hz."""
    return np.log2(1.0 + sinr(H, p, x, sigma2))


def rate(H, p, x, B, sigma2) -> np.ndarray:
    """Uplink rates ``B_k log2(1 + SINR_k)`` in bit/s."""
    return np.asarray(B, dtype=float) * spectral_efficiency(H, p, x, sigma2)


def save_gains(path, H) -> None:
    np.savetxt(path, np.asarray(H), fmt="%.17g")


def load_gains(path) -> np.ndarray:
    H = np.atleast_2d(np.loadtxt(path, dtype=float))
    if H.shape[0] != H.shape[1] or np.any(H < 0) or not np.all(np.isfinite(H)):
        raise ValueError(f"{path}: expected a square nonnegative gain matrix")
    return H
