"""Minimum-power SINR feasibility kernel and the shared feasibility certifier.

For SINR targets ``gamma_k`` the constraints
``H_kk p_k >= gamma_k (sum_{j != k} H_kj p_j + sigma2)`` admit a
componentwise-minimal solution whenever they admit any; it meets every
target with equality and therefore also minimizes the total power.
"""

from dataclasses import dataclass

import numpy as np

from .channel import spectral_efficiency

__all__ = [
    "min_power",
    "min_power_iterative",
    "check_sum_budget",
    "sinr_targets_from_eta",
    "Certificate",
    "certify",
]

PMAX_RTOL = 1e-12


def _prepare(H, gamma):
    H = np.asarray(H, dtype=float)
    gamma = np.asarray(gamma, dtype=float)
    if H.shape != (gamma.size, gamma.size):
        raise ValueError("H must be K x K with K = len(gamma)")
    if np.any(gamma < 0) or np.any(np.isnan(gamma)):
        raise ValueError("SINR targets must be nonnegative")
    return H, gamma


def min_power(H, gamma, sigma2, P_max):
    """Pareto-minimal powers by a direct linear solve, or ``None`` if infeasible.

    Clients with ``gamma_k == 0`` are silent. The system
    ``(I - D F) p = D sigma2`` with ``D = diag(gamma_k / H_kk)`` and ``F`` the
    off-diagonal gains has a positive solution iff the spectral radius of
    ``D F`` is below one.
    """
    H, gamma = _prepare(H, gamma)
    p = np.zeros(gamma.size)
    act = np.flatnonzero(gamma > 0)
    if act.size == 0:
        return p
    if not np.all(np.isfinite(gamma[act])):
        return None
    Ha = H[np.ix_(act, act)]
    d = np.diag(Ha).copy()
    if np.any(d <= 0):
        return None
    D = gamma[act] / d
    M = D[:, None] * (Ha - np.diag(d))
    try:
        pa = np.linalg.solve(np.eye(act.size) - M, D * sigma2)
    except np.linalg.LinAlgError:
        return None
    if not np.all(np.isfinite(pa)) or np.any(pa <= 0):
        return None
    if np.any(pa > P_max * (1.0 + PMAX_RTOL)):
        return None
    p[act] = pa
    return p


def min_power_iterative(H, gamma, sigma2, P_max, tol=1e-13, max_iter=10_000):
    """Same answer as :func:`min_power` by monotone fixed-point iteration from 0.

    Iterates increase monotonically, so any iterate above ``P_max`` proves
    infeasibility; non-convergence within ``max_iter`` is reported as
    infeasible too.
    """
    H, gamma = _prepare(H, gamma)
    if not np.all(np.isfinite(gamma)):
        return None
    d = np.diag(H)
    if np.any((gamma > 0) & (d <= 0)):
        return None
    scale = np.where(gamma > 0, gamma / np.where(d > 0, d, 1.0), 0.0)
    F = H - np.diag(d)
    p = np.zeros(gamma.size)
    for _ in range(max_iter):
        new = scale * (F @ p + sigma2)
        if np.any(new > P_max * (1.0 + PMAX_RTOL)):
            return None
        if np.max(np.abs(new - p)) <= tol * max(np.max(new), 1e-300):
            return new
        p = new
    return None


def check_sum_budget(p, P_sum, slack: float = 0.0, rtol: float = 1e-12) -> bool:
    """``sum(p) <= P_sum`` up to summation rounding (``rtol``) plus ``slack``.

    Without ``rtol`` the powers ``(0.1, 0.1, 0.1)`` would exceed ``0.3``.
    """
    return bool(np.sum(p) <= P_sum * (1.0 + rtol) + slack)


def sinr_targets_from_eta(eta) -> np.ndarray:
    """SINR needed for spectral efficiency ``eta`` (bit/s/Hz): ``2**eta - 1``."""
    with np.errstate(over="ignore"):
        return np.exp2(np.asarray(eta, dtype=float)) - 1.0


@dataclass
class Certificate:
    ok: bool
    binary: bool
    box_violation: float
    sum_violation: float
    rate_slack: np.ndarray

    def as_dict(self) -> dict:
        return {
            "ok": self.ok,
            "binary": self.binary,
            "box_violation": float(self.box_violation),
            "sum_violation": float(self.sum_violation),
            "min_rate_slack": float(np.min(self.rate_slack)) if self.rate_slack.size else 0.0,
        }


def certify(x, p, H, eta, sigma2, P_max, P_sum, tol=1e-9) -> Certificate:
    """Check a binary allocation against the deadline, power, and binary constraints.

    ``rate_slack[k] = log2(1 + SINR_k) - eta_k x_k`` with interference from
    selected clients only; every slack and residual must clear ``-tol``.
    """
    x = np.asarray(x, dtype=float)
    p = np.asarray(p, dtype=float)
    binary = bool(np.all((x == 0.0) | (x == 1.0)))
    box = float(max(np.max(-p, initial=0.0), np.max(p - P_max, initial=0.0)))
    over = float(max(np.sum(p) - P_sum, 0.0))
    slack = spectral_efficiency(H, p, x, sigma2) - np.asarray(eta, dtype=float) * x
    ok = binary and box <= tol and over <= tol and bool(np.all(slack >= -tol))
    return Certificate(ok, binary, box, over, slack)
