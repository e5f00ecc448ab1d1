"""Exact reference solvers used to validate the heuristics.

``brute_force_p2`` enumerates every client subset. For a fixed binary
selection the objective is constant and feasibility reduces to min-power
control among the selected clients, so enumeration is exact.
"""

import itertools
from dataclasses import dataclass

import numpy as np

from .powerctl import min_power, sinr_targets_from_eta
from .scenario import Allocation, ScenarioConfig

__all__ = [
    "MAX_ORACLE_K",
    "SubsetRow",
    "brute_force_p2",
    "oracle_allocation",
    "projected_gradient_qp",
    "project_box_simplex",
    "pttm_grid_search",
]

MAX_ORACLE_K = 20


@dataclass
class SubsetRow:
    selection: tuple
    feasible: bool
    objective: float
    total_power: float


def _subset_key(sel):
    # smaller sets first, then lexicographic on the 0/1 vector read as 1-before-0
    return (sum(sel), tuple(-s for s in sel))


def brute_force_p2(H, pi_tilde, eta, config: ScenarioConfig, table: bool = True):
    """Best feasible selection by exhaustive search.

    Returns ``(x, objective, rows)``. ``rows`` lists every subset in
    enumeration order. Among equal objectives the smaller set wins, then the
    lexicographically first 0/1 vector (earlier clients preferred).
    """
    pi_tilde = np.asarray(pi_tilde, dtype=float)
    K = pi_tilde.size
    if K > MAX_ORACLE_K:
        raise ValueError(f"brute force is limited to K <= {MAX_ORACLE_K}, got {K}")
    gamma_all = sinr_targets_from_eta(eta)
    best = None
    rows = []
    for sel in itertools.product((0, 1), repeat=K):
        x = np.asarray(sel, dtype=float)
        p = min_power(H, np.where(x > 0, gamma_all, 0.0), config.sigma2, config.P_max)
        ok = p is not None and float(np.sum(p)) <= config.P_sum
        obj = float(pi_tilde @ x)
        if table:
            rows.append(SubsetRow(sel, ok, obj, float(np.sum(p)) if p is not None else float("nan")))
        if not ok:
            continue
        if best is None or obj > best[1] or (obj == best[1] and _subset_key(sel) < _subset_key(best[0])):
            best = (sel, obj, p)
    sel, obj, _ = best
    return np.asarray(sel, dtype=float), obj, rows


def oracle_allocation(H, pi_tilde, eta, config: ScenarioConfig) -> Allocation:
    x, obj, _ = brute_force_p2(H, pi_tilde, eta, config, table=False)
    p = min_power(H, np.where(x > 0, sinr_targets_from_eta(eta), 0.0), config.sigma2, config.P_max)
    return Allocation(x=x, p=p, xi=x * p, feasible=True, objective=obj)


def project_box_simplex(v, P_max, P_sum):
    """Euclidean projection of rows of ``v`` onto ``{0 <= p <= P_max, sum p <= P_sum}``."""
    v = np.atleast_2d(np.asarray(v, dtype=float))
    out = np.clip(v, 0.0, P_max)
    over = out.sum(axis=1) > P_sum
    if np.any(over):
        # sum(clip(w - tau, 0, P_max)) is piecewise linear and nonincreasing in
        # tau with kinks at w and w - P_max; locate the crossing exactly.
        w = v[over]
        knots = np.sort(np.concatenate([w, w - P_max], axis=1), axis=1)
        sums = np.clip(w[:, None, :] - knots[:, :, None], 0.0, P_max).sum(axis=2)
        j = np.clip(np.sum(sums > P_sum, axis=1), 1, knots.shape[1] - 1)
        rows = np.arange(len(w))
        t0, t1 = knots[rows, j - 1], knots[rows, j]
        s0, s1 = sums[rows, j - 1], sums[rows, j]
        frac = np.where(s0 > s1, (s0 - P_sum) / np.where(s0 > s1, s0 - s1, 1.0), 0.0)
        tau = t0 + frac * (t1 - t0)
        out[over] = np.clip(w - tau[:, None], 0.0, P_max)
    return out


def projected_gradient_qp(xi, x, P_max, P_sum, steps: int = 100_000, tol: float = 1e-15):
    """Projected gradient on ``sum (xi_k - x_k p_k)^2`` over the box-simplex.

    Accepts one instance (1-D inputs) or a batch (rows). Step size
    ``1 / (L sqrt(1 + t / 1000))`` with ``L = 2 max x_k^2`` shrinks slowly;
    the run stops early once an iterate is a fixed point to ``tol``.
    """
    xi = np.asarray(xi, dtype=float)
    x = np.asarray(x, dtype=float)
    single = xi.ndim == 1
    xi2, x2 = np.atleast_2d(xi), np.atleast_2d(x)
    L = np.maximum(2.0 * np.max(x2**2, axis=1), 1e-12)[:, None]
    p = project_box_simplex(np.zeros_like(xi2), P_max, P_sum)
    for t in range(steps):
        grad = -2.0 * x2 * (xi2 - x2 * p)
        step = 1.0 / (L * np.sqrt(1.0 + t / 1000.0))
        new = project_box_simplex(p - step * grad, P_max, P_sum)
        done = np.max(np.abs(new - p)) <= tol
        p = new
        if done:
            break
    p[x2 <= 1e-12] = 0.0
    return p[0] if single else p


def _feasible_deadlines(H, config, pilot_sizes, grid):
    """Vectorized min-power feasibility of every deadline in ``grid``."""
    H = np.asarray(H, dtype=float)
    bits = np.asarray(config.V, dtype=float) * np.asarray(pilot_sizes, dtype=float)
    act = np.flatnonzero(bits > 0)
    if act.size == 0:
        return np.ones(len(grid), dtype=bool)
    Ha = H[np.ix_(act, act)]
    d = np.diag(Ha)
    F = Ha - np.diag(d)
    with np.errstate(over="ignore"):
        g = np.exp2(bits[act][None, :] / (grid[:, None] * np.asarray(config.B, dtype=float)[act][None, :])) - 1.0
    ok = np.all(np.isfinite(g), axis=1)
    g = np.where(np.isfinite(g), g, 0.0)
    D = g / d
    A = np.eye(act.size)[None] - D[:, :, None] * F[None]
    with np.errstate(all="ignore"):
        p = np.linalg.solve(A, (D * config.sigma2)[..., None])[..., 0]
    ok &= np.all(np.isfinite(p), axis=1) & np.all(p > 0, axis=1)
    ok &= np.all(p <= config.P_max * (1 + 1e-12), axis=1)
    ok &= p.sum(axis=1) <= config.P_sum + 1e-9
    return ok


def pttm_grid_search(H, config: ScenarioConfig, pilot_sizes, points: int = 10_000):
    """Smallest feasible pilot deadline by exhaustive scan of a two-level grid.

    Every node of a ``points``-node grid on ``(0, T]`` is tested; the cell
    just below the first feasible node is then scanned with another
    ``points`` nodes, so the answer is within ``T / points**2`` of the
    threshold. Returns ``None`` if ``T`` itself is infeasible.
    """
    coarse = np.linspace(config.T / points, config.T, points)
    ok = _feasible_deadlines(H, config, pilot_sizes, coarse)
    if not ok.any():
        return None
    i = int(np.argmax(ok))
    left = coarse[i - 1] if i > 0 else 0.0
    fine = np.linspace(left, coarse[i], points + 1)[1:]
    ok = _feasible_deadlines(H, config, pilot_sizes, fine)
    return float(fine[int(np.argmax(ok))])
