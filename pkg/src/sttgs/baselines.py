"""Comparison schedulers: sum-rate, max-min fairness, and loss-only greedy.

Each one is a deterministic stand-in for a selection philosophy rather than a
reproduction of a specific published algorithm. All of them return an
:class:`Allocation` with unselected powers zeroed and a feasibility
certificate in ``info``.
"""

import numpy as np

from .channel import spectral_efficiency
from .powerctl import certify, min_power
from .scenario import Allocation, ScenarioConfig

__all__ = [
    "water_filling",
    "max_rate_baseline",
    "fairness_baseline",
    "active_learning_baseline",
]


def _finish(x, p, H, config, eta, pi_tilde, name):
    x = np.asarray(x, dtype=float)
    p = np.where(x > 0, p, 0.0)
    cert = certify(x, p, H, eta, config.sigma2, config.P_max, config.P_sum)
    obj = float(np.asarray(pi_tilde, dtype=float) @ x) if pi_tilde is not None else float("nan")
    alloc = Allocation(x=x, p=p, xi=x * p, feasible=cert.ok, objective=obj)
    alloc.info["scheme"] = name
    alloc.info["certificate"] = cert.as_dict()
    return alloc


def water_filling(gains, B, sigma2, P_max, P_sum, iters: int = 200) -> np.ndarray:
    """Maximize ``sum B_k log2(1 + g_k p_k / sigma2)`` over the capped power region.

    The optimum is ``p_k = clip(B_k w - sigma2 / g_k, 0, P_max)`` for a water
    level ``w`` found by bisection so that the sum budget is met (or every
    client sits at ``P_max``).
    """
    g = np.asarray(gains, dtype=float)
    B = np.broadcast_to(np.asarray(B, dtype=float), g.shape)
    floor = np.where(g > 0, sigma2 / np.where(g > 0, g, 1.0), np.inf)

    def powers(w):
        return np.clip(B * w - floor, 0.0, P_max)

    usable = np.isfinite(floor)
    if not usable.any():
        return np.zeros_like(g)
    if np.sum(np.where(usable, P_max, 0.0)) <= P_sum:
        return np.where(usable, P_max, 0.0)
    lo = 0.0
    hi = float(np.max((floor[usable] + P_max) / B[usable]))
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        if powers(mid).sum() > P_sum:
            hi = mid
        else:
            lo = mid
    return powers(lo)


def max_rate_baseline(H, config: ScenarioConfig, eta, pi_tilde=None) -> Allocation:
    """Interference-free water-filling, then keep the clients meeting their deadline.

    Deadlines are checked with interference from every transmitting client.
    Unselected clients are then silenced and the rates re-checked once;
    anyone failing that pass is dropped as well.
    """
    H = np.asarray(H, dtype=float)
    eta = np.asarray(eta, dtype=float)
    p = water_filling(np.diag(H), config.B, config.sigma2, config.P_max, config.P_sum)
    K = len(eta)
    x = (spectral_efficiency(H, p, np.ones(K), config.sigma2) >= eta).astype(float)
    x = x * (spectral_efficiency(H, p, x, config.sigma2) >= eta * x)
    return _finish(x, p, H, config, eta, pi_tilde, "max_rate")


def fairness_baseline(H, config: ScenarioConfig, eta, pi_tilde=None, iters: int = 100) -> Allocation:
    """Largest common SINR every client can reach; keep those it satisfies."""
    H = np.asarray(H, dtype=float)
    eta = np.asarray(eta, dtype=float)
    K = len(eta)

    def feasible(g):
        p = min_power(H, np.full(K, g), config.sigma2, config.P_max)
        return p if p is not None and np.sum(p) <= config.P_sum else None

    lo, p_lo = 0.0, np.zeros(K)
    hi = 1.0
    while feasible(hi) is not None and hi < 1e15:
        lo, hi = hi, hi * 2.0
    p_lo = feasible(lo) if lo > 0 else p_lo
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        p = feasible(mid)
        if p is not None:
            lo, p_lo = mid, p
        else:
            hi = mid
    x = (spectral_efficiency(H, p_lo, np.ones(K), config.sigma2) >= eta).astype(float)
    alloc = _finish(x, p_lo, H, config, eta, pi_tilde, "fairness")
    alloc.info["common_sinr"] = lo
    return alloc


def active_learning_baseline(pi_tilde, H, config: ScenarioConfig, eta) -> Allocation:
    """Add clients by decreasing predicted loss while an equal power split works.

    With ``m`` clients selected each transmits ``min(P_max, P_sum / m)``; the
    first client whose addition breaks any selected deadline ends the scan.
    """
    H = np.asarray(H, dtype=float)
    eta = np.asarray(eta, dtype=float)
    pi_tilde = np.asarray(pi_tilde, dtype=float)
    K = len(eta)
    order = np.lexsort((np.arange(K), -pi_tilde))
    x = np.zeros(K)
    p = np.zeros(K)
    for k in order:
        trial = x.copy()
        trial[k] = 1.0
        pt = trial * min(config.P_max, config.P_sum / trial.sum())
        if np.all(spectral_efficiency(H, pt, trial, config.sigma2) >= eta * trial):
            x, p = trial, pt
        else:
            break
    alloc = _finish(x, p, H, config, eta, pi_tilde, "active_learning")
    alloc.info["order"] = [int(k) for k in order]
    return alloc
