"""Pilot transmission time minimization by bisection over the pilot deadline."""

from dataclasses import dataclass, field

import numpy as np

from .channel import rate
from .powerctl import check_sum_budget, min_power
from .scenario import ScenarioConfig

__all__ = [
    "PttmInfeasible",
    "PttmResult",
    "pilot_sinr_targets",
    "pilot_power",
    "pttm_bisect",
    "equal_power_pilot_time",
]

SUM_SLACK = 1e-9


class PttmInfeasible(RuntimeError):
    """Pilot data cannot be delivered even with the whole time budget."""


@dataclass
class PttmResult:
    T0_star: float
    p_pilot: np.ndarray
    trace: list = field(default_factory=list)  # (kappa, feasible, T_min, T_max)

    def rates(self, H, config: ScenarioConfig) -> np.ndarray:
        return rate(H, self.p_pilot, np.ones(config.K), config.B, config.sigma2)


def pilot_sinr_targets(T0, V, pilot_sizes, B) -> np.ndarray:
    """``2**(V_k |D~_k| / (T0 B_k)) - 1``; empty pilots need no SINR."""
    if T0 <= 0:
        raise ValueError("T0 must be positive")
    bits = np.asarray(V, dtype=float) * np.asarray(pilot_sizes, dtype=float)
    with np.errstate(over="ignore"):
        g = np.exp2(bits / (T0 * np.asarray(B, dtype=float))) - 1.0
    return np.where(bits > 0, g, 0.0)


def pilot_power(H, config: ScenarioConfig, pilot_sizes, T0):
    """Minimal pilot powers meeting deadline ``T0``, or ``None`` if infeasible."""
    g = pilot_sinr_targets(T0, config.V, pilot_sizes, config.B)
    p = min_power(H, g, config.sigma2, config.P_max)
    if p is None or not check_sum_budget(p, config.P_sum, SUM_SLACK):
        return None
    return p


def pttm_bisect(H, config: ScenarioConfig, pilot_sizes, eps=None) -> PttmResult:
    """Smallest feasible pilot deadline in ``(0, T]`` to within ``eps``.

    Bisection keeps ``T_max`` feasible and ``T_min`` infeasible (``T_min = 0``
    counts as infeasible) and stops once ``T_max - T_min <= eps``.
    """
    eps = config.T_epsilon if eps is None else eps
    if eps <= 0:
        raise ValueError("eps must be positive")
    t_lo, t_hi = 0.0, float(config.T)
    p_hi = pilot_power(H, config, pilot_sizes, t_hi)
    if p_hi is None:
        raise PttmInfeasible(f"pilot data does not fit within T = {config.T} s")
    trace = []
    while t_hi - t_lo > eps:
        kappa = 0.5 * (t_lo + t_hi)
        p = pilot_power(H, config, pilot_sizes, kappa)
        trace.append((kappa, p is not None, t_lo, t_hi))
        if p is not None:
            t_hi, p_hi = kappa, p
        else:
            t_lo = kappa
    return PttmResult(t_hi, p_hi, trace)


def equal_power_pilot_time(H, config: ScenarioConfig, pilot_sizes) -> float:
    """Pilot time when every client transmits ``min(P_max, P_sum / K)``."""
    K = config.K
    p = np.full(K, min(config.P_max, config.P_sum / K))
    R = rate(H, p, np.ones(K), config.B, config.sigma2)
    bits = np.asarray(config.V) * np.asarray(pilot_sizes, dtype=float)
    with np.errstate(divide="ignore"):
        times = np.where(bits > 0, bits / R, 0.0)
    return float(np.max(times))
