"""Joint client selection and power control by penalty alternating MM.

The relaxed problem keeps ``x in [0, 1]``, splits ``xi = x * p`` with a
quadratic coupling penalty, and pushes ``x`` toward binary values with
``(1/beta) sum x (1 - x)``. Each outer round solves the ``(x, xi)`` block by
an inner MM loop of convex interior-point solves and then the ``p`` block
exactly; :func:`round_and_repair` turns the result into a certified binary
allocation.

Internally ``xi`` is scaled by ``P_max`` and the selection weights by
``max(pi_tilde)``; both leave the argmax of the selection problem unchanged.
"""

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .powerctl import certify, min_power, sinr_targets_from_eta
from .scenario import Allocation, ScenarioConfig

__all__ = [
    "NoStrictInterior",
    "JcspcProblem",
    "PammTrace",
    "eta_targets",
    "phi1",
    "phi1_surrogate",
    "phi_all",
    "phi_surrogate_all",
    "phi_surrogate_grad",
    "phi_k",
    "phi_k_surrogate",
    "zero_one_loss",
    "p3_objective",
    "p3a_surrogate_objective",
    "solve_p3a_inner",
    "solve_p3b",
    "pamm_solve",
    "round_and_repair",
    "solve_jcspc",
]

LN2 = np.log(2.0)


class NoStrictInterior(RuntimeError):
    """No strictly feasible starting point exists for the barrier method."""


@dataclass
class JcspcProblem:
    H: np.ndarray
    pi_tilde: np.ndarray
    eta: np.ndarray
    P_max: float
    P_sum: float
    sigma2: float
    beta: float = 0.1
    gamma: Optional[float] = None
    I_max: int = 60
    J_max: int = 20
    outer_tol: float = 1e-6
    inner_tol: float = 1e-9
    max_escalations: int = 3
    weight_ref: float = 1.0

    def __post_init__(self):
        self.H = np.asarray(self.H, dtype=float)
        self.pi_tilde = np.asarray(self.pi_tilde, dtype=float)
        self.eta = np.asarray(self.eta, dtype=float)
        K = self.K
        if self.H.shape != (K, K) or self.eta.shape != (K,):
            raise ValueError("H, pi_tilde and eta must agree on K")
        if np.any(self.eta < 0) or not np.all(np.isfinite(self.eta)):
            raise ValueError("eta must be finite and nonnegative")
        if np.any(self.pi_tilde < 0):
            raise ValueError("pi_tilde must be nonnegative")
        if self.gamma is None:
            self.gamma = 100.0 / self.P_max**2

    @property
    def K(self) -> int:
        return self.pi_tilde.size

    @property
    def weights(self) -> np.ndarray:
        top = self.pi_tilde.max(initial=0.0)
        return self.pi_tilde / (top / self.weight_ref) if top > self.weight_ref else self.pi_tilde.copy()

    @classmethod
    def from_config(cls, H, config: ScenarioConfig, pi_tilde, eta, **kw):
        kw.setdefault("beta", config.beta)
        kw.setdefault("gamma", config.gamma)
        kw.setdefault("I_max", config.I_max)
        kw.setdefault("J_max", config.J_max)
        return cls(H, pi_tilde, eta, config.P_max, config.P_sum, config.sigma2, **kw)


@dataclass
class PammTrace:
    dx: list = field(default_factory=list)
    dp: list = field(default_factory=list)
    zero_one: list = field(default_factory=list)
    objective: list = field(default_factory=list)
    p3_objective: list = field(default_factory=list)
    penalty_residual: list = field(default_factory=list)
    inner_iterations: list = field(default_factory=list)
    inner_objective: list = field(default_factory=list)
    gamma: list = field(default_factory=list)

    def __len__(self):
        return len(self.dx)

    def rows(self):
        for i in range(len(self)):
            yield {
                "iteration": i + 1,
                "dx": self.dx[i],
                "dp": self.dp[i],
                "zero_one": self.zero_one[i],
                "objective": self.objective[i],
                "p3_objective": self.p3_objective[i],
                "penalty_residual": self.penalty_residual[i],
                "inner_iterations": self.inner_iterations[i],
                "gamma": self.gamma[i],
            }


def eta_targets(config: ScenarioConfig, T0: float, pilot_sizes) -> np.ndarray:
    """Spectral efficiency each client needs to send its remaining images."""
    if config.T <= T0:
        raise ValueError(f"time budget T={config.T} leaves nothing after T0={T0}")
    remaining = np.asarray(config.D_sizes, dtype=float) - np.asarray(pilot_sizes, dtype=float)
    return np.asarray(config.V) * remaining / ((config.T - T0) * np.asarray(config.B))


# ---------------------------------------------------------------- penalties


def phi1(x, beta) -> float:
    x = np.asarray(x, dtype=float)
    return float(np.sum(x * (1.0 - x)) / beta)


def phi1_surrogate(x, x_star, beta) -> float:
    """Tangent upper bound of :func:`phi1` at ``x_star`` (linear in ``x``)."""
    x = np.asarray(x, dtype=float)
    xs = np.asarray(x_star, dtype=float)
    return float(np.sum(x - 2.0 * xs * x + xs**2) / beta)


def zero_one_loss(x) -> float:
    x = np.asarray(x, dtype=float)
    return float(np.sum(np.minimum(x, 1.0 - x)))


def _check_xi(xi):
    xi = np.asarray(xi, dtype=float)
    if np.any(xi < 0):
        raise ValueError("xi must be componentwise nonnegative")
    return xi


def phi_all(x, xi, H, sigma2, eta) -> np.ndarray:
    """Deadline constraint ``eta_k x_k - log2(1 + SINR_k(xi))`` for every k."""
    xi = _check_xi(xi)
    H = np.asarray(H, dtype=float)
    signal = np.diag(H) * xi
    interference = H @ xi - signal + sigma2
    return np.asarray(eta) * np.asarray(x) - np.log2(1.0 + signal / interference)


def _interference_terms(H, sigma2, xi):
    a = np.asarray(H, dtype=float) / sigma2
    total = 1.0 + a @ xi
    other = total - np.diag(a) * xi
    return a, total, other


def phi_surrogate_all(x, xi, xi_star, H, sigma2, eta) -> np.ndarray:
    """Convex upper bound of :func:`phi_all`, tangent at ``xi_star``.

    The concave ``log(interference)`` term is replaced by its first-order
    expansion around ``xi_star``.
    """
    xi = _check_xi(xi)
    xs = _check_xi(xi_star)
    _, total, other = _interference_terms(H, sigma2, xi)
    _, _, other_s = _interference_terms(H, sigma2, xs)
    if np.any(total <= 0):
        raise ValueError("log argument must be positive")
    bracket = np.log(total) - np.log(other_s) - other / other_s + 1.0
    return np.asarray(eta) * np.asarray(x) - bracket / LN2


def phi_surrogate_grad(x, xi, xi_star, H, sigma2, eta) -> np.ndarray:
    """Jacobian of :func:`phi_surrogate_all`: rows k, columns ``(x, xi)``."""
    xi = np.asarray(xi, dtype=float)
    a, total, _ = _interference_terms(H, sigma2, xi)
    _, _, other_s = _interference_terms(H, sigma2, np.asarray(xi_star, dtype=float))
    K = xi.size
    off = a - np.diag(np.diag(a))
    J = np.zeros((K, 2 * K))
    J[:, :K] = np.diag(eta)
    J[:, K:] = -(a / total[:, None] - off / other_s[:, None]) / LN2
    return J


def phi_k(x, xi, H, sigma2, eta, k) -> float:
    return float(phi_all(x, xi, H, sigma2, eta)[k])


def phi_k_surrogate(x, xi, xi_star, H, sigma2, eta, k) -> float:
    return float(phi_surrogate_all(x, xi, xi_star, H, sigma2, eta)[k])


def p3_objective(problem: JcspcProblem, x, p, xi) -> float:
    """Penalized objective in the solver's scaling (weights, ``xi / P_max``)."""
    x = np.asarray(x, dtype=float)
    g = problem.gamma * problem.P_max**2
    s = np.asarray(xi) / problem.P_max
    q = np.asarray(p) / problem.P_max
    return float(-problem.weights @ x + phi1(x, problem.beta) + g * np.sum((s - x * q) ** 2))


def p3a_surrogate_objective(problem: JcspcProblem, x, xi, x_star, p_fixed) -> float:
    x = np.asarray(x, dtype=float)
    g = problem.gamma * problem.P_max**2
    s = np.asarray(xi) / problem.P_max
    q = np.asarray(p_fixed) / problem.P_max
    return float(
        -problem.weights @ x + phi1_surrogate(x, x_star, problem.beta) + g * np.sum((s - x * q) ** 2)
    )


# ---------------------------------------------------------------- selection block: barrier


class _SurrogateBarrier:
    """Log-barrier Newton solver for one convex surrogate problem.

    Variables ``z = (x, s)`` with ``s = xi / P_max``; all box bounds and the
    surrogate deadline constraints enter the barrier.
    """

    def __init__(self, problem, x_star, xi_star, p_fixed):
        K = problem.K
        self.K = K
        Pm = problem.P_max
        self.w = problem.weights
        self.lin = (1.0 - 2.0 * np.asarray(x_star)) / problem.beta
        self.const = float(np.sum(np.asarray(x_star) ** 2) / problem.beta)
        self.g = problem.gamma * Pm**2
        self.q = np.asarray(p_fixed, dtype=float) / Pm
        self.eta = problem.eta
        a = problem.H * (Pm / problem.sigma2)
        self.a = a
        self.a_off = a - np.diag(np.diag(a))
        s_star = np.asarray(xi_star, dtype=float) / Pm
        self.other_s = 1.0 + self.a_off @ s_star
        self.log_other_s = np.log(self.other_s)
        self.m = 5 * K
        # pieces that do not depend on the iterate
        self.c_lin = 1.0 - self.log_other_s
        self.b_off = self.a_off / self.other_s[:, None]
        self.lin_x = -self.w + self.lin
        idx = np.arange(K)
        q, g = self.q, self.g
        Hf = np.zeros((2 * K, 2 * K))
        Hf[idx, idx] = 2 * g * q * q
        Hf[idx, idx + K] = Hf[idx + K, idx] = -2 * g * q
        Hf[idx + K, idx + K] = 2 * g
        self.Hf = Hf
        self.J0 = np.zeros((K, 2 * K))
        self.J0[idx, idx] = self.eta

    def f(self, x, s):
        r = s - x * self.q
        return -self.w @ x + self.lin @ x + self.const + self.g * (r @ r)

    def cons(self, x, s):
        total = 1.0 + self.a @ s
        bracket = np.log(total) + self.c_lin - (1.0 + self.a_off @ s) / self.other_s
        return self.eta * x - bracket / LN2, total

    @staticmethod
    def in_box(z):
        return z.min() > 0.0 and z.max() < 1.0

    def interior(self, x, s):
        if not (self.in_box(x) and self.in_box(s)):
            return False
        c, _ = self.cons(x, s)
        return c.max() < 0.0

    def barrier(self, t, x, s):
        c, _ = self.cons(x, s)
        if np.any(c >= 0):
            return np.inf
        return (
            t * self.f(x, s)
            - np.sum(np.log(-c))
            - np.sum(np.log(x) + np.log1p(-x) + np.log(s) + np.log1p(-s))
        )

    def derivs(self, x, s):
        """Objective gradient/Hessian, constraints, their Jacobian and curvature.

        The deadline constraint ``k`` has Hessian ``curv[k] * a_k a_k^T`` in
        the ``s`` block and is linear in ``x``.
        """
        K = self.K
        r = 2 * self.g * (s - x * self.q)
        gf = np.concatenate([self.lin_x - self.q * r, r])
        c, total = self.cons(x, s)
        J = self.J0.copy()
        J[:, K:] = self.b_off / LN2 - self.a / (LN2 * total[:, None])
        curv = 1.0 / (LN2 * total**2)
        return gf, self.Hf, c, J, curv

    def grad_hess(self, t, x, s):
        K = self.K
        gf, Hf, c, J, curv = self.derivs(x, s)
        neg = -c
        grad = t * gf + J.T @ (1.0 / neg)
        hess = t * Hf + (J.T / neg**2) @ J
        hess[K:, K:] += (self.a.T * (curv / neg)) @ self.a

        bx = np.concatenate([x, s])
        grad += -1.0 / bx + 1.0 / (1.0 - bx)
        hess[np.arange(2 * K), np.arange(2 * K)] += 1.0 / bx**2 + 1.0 / (1.0 - bx) ** 2
        return grad, hess

    def centre(self, t, z, max_newton=100, tol=1e-10):
        K = self.K
        F = self.barrier(t, z[:K], z[K:])
        steps = 0
        for steps in range(1, max_newton + 1):
            grad, hess = self.grad_hess(t, z[:K], z[K:])
            try:
                dz = -np.linalg.solve(hess, grad)
            except np.linalg.LinAlgError:
                dz = -grad
            dec = -grad @ dz
            # below this the decrease is lost in the rounding of F
            if dec / 2.0 <= max(tol, 1e-13 * abs(F)):
                break
            # largest step keeping the box strictly feasible
            with np.errstate(divide="ignore", invalid="ignore"):
                lim = np.where(dz < 0, -z / dz, np.where(dz > 0, (1.0 - z) / dz, np.inf))
            step = min(1.0, 0.99 * float(lim.min()))
            while step > 1e-12:
                zn = z + step * dz
                Fn = self.barrier(t, zn[:K], zn[K:])
                if Fn <= F - 0.25 * step * dec:
                    break
                step *= 0.5
            else:
                break
            z, F = zn, Fn
        return z, steps

    def solve(self, z0, gap=1e-8):
        t = 1.0
        z = z0.copy()
        newton = 0
        while True:
            z, n = self.centre(t, z)
            newton += n
            if self.m / t < gap:
                break
            t *= 10.0
        return z, t, newton

    def solve_primal_dual(self, z0, gap=1e-8, feas_tol=1e-8, mu=10.0, max_iter=500):
        """Primal-dual interior-point iterations on the same problem.

        Constraints are the ``K`` deadlines followed by the lower and upper
        box bounds of ``z``. Each iteration targets ``t = mu * m / gap_hat``
        for the current surrogate duality gap ``gap_hat`` and takes a damped
        Newton step on the perturbed KKT system, keeping the multipliers
        positive and the constraints strictly negative. Stops once the dual
        residual is below ``feas_tol * (1 + |grad f|)`` and ``gap_hat`` below
        ``gap``.
        """
        K = self.K
        n = 2 * K
        diag = np.arange(n)

        def parts(z):
            x, s = z[:K], z[K:]
            gf, Hf, c, J, curv = self.derivs(x, s)
            gall = np.concatenate([c, -z, z - 1.0])
            return gf, Hf, J, curv, gall

        def residual(z, lam, t, gf, J, gall):
            r_dual = gf + J.T @ lam[:K] - lam[K : K + n] + lam[K + n :]
            r_cent = -lam * gall - 1.0 / t
            return r_dual, r_cent

        # the t = 1 barrier centre makes lam = 1 / (-g) dual feasible
        z, it0 = self.centre(1.0, z0.copy())
        gf, Hf, J, curv, gall = parts(z)
        lam = 1.0 / (-gall)
        it = 0
        t = mu * self.m / float(-gall @ lam)
        for it in range(1, max_iter + 1):
            gap_hat = float(-gall @ lam)
            r_dual, _ = residual(z, lam, 1.0, gf, J, gall)
            if np.linalg.norm(r_dual) <= feas_tol * (1.0 + np.linalg.norm(gf)) and gap_hat <= gap:
                break
            t = max(t, mu * self.m / gap_hat)
            d = lam / (-gall)
            hess = Hf + (J.T * d[:K]) @ J
            hess[K:, K:] += (self.a.T * (curv * lam[:K])) @ self.a
            hess[diag, diag] += d[K : K + n] + d[K + n :]
            rhs = gf + (J.T @ (1.0 / (-gall[:K])) - 1.0 / (-gall[K : K + n]) + 1.0 / (-gall[K + n :])) / t
            try:
                dz = -np.linalg.solve(hess, rhs)
            except np.linalg.LinAlgError:
                dz = -rhs
            dg = np.concatenate([J @ dz, -dz, dz])
            dlam = d * dg + (1.0 / t) / (-gall) - lam
            # Armijo on the primal barrier at this t; dz is a descent direction
            phi0 = self.barrier(t, z[:K], z[K:])
            slope = t * float(rhs @ dz)
            neg = dlam < 0
            step = min(1.0, 0.99 * float(np.min(-lam[neg] / dlam[neg]))) if np.any(neg) else 1.0
            while step > 1e-14:
                zn = z + step * dz
                if self.in_box(zn):
                    phin = self.barrier(t, zn[:K], zn[K:])
                    if phin <= phi0 + 0.01 * step * slope + 1e-13 * abs(phi0):
                        break
                step *= 0.5
            else:
                break
            ln = lam + step * dlam
            gfn, Hfn, Jn, curvn, galln = parts(zn)
            z, lam = zn, ln
            gf, Hf, J, curv, gall = gfn, Hfn, Jn, curvn, galln
        return z, lam, t, it0 + it


def solve_p3a_inner(problem: JcspcProblem, x_n, xi_n, p_fixed, gap=1e-8, method="primal_dual"):
    """Solve the convex surrogate of the ``(x, xi)`` block around ``(x_n, xi_n)``.

    ``method="primal_dual"`` (default) runs primal-dual interior-point
    iterations; ``method="barrier"`` runs the plain log-barrier path with the
    weight ``t`` growing tenfold from 1. Both stop once the duality-gap bound
    falls below ``gap``.

    Returns ``(x, xi, info)``. ``info`` carries the final barrier parameter,
    Newton step count, duality-gap bound and the constraint values.
    ``xi`` is kept inside ``[0, P_max]``.
    """
    if method not in ("primal_dual", "barrier"):
        raise ValueError(f"unknown method {method!r}")
    Pm = problem.P_max
    K = problem.K
    x_n = np.asarray(x_n, dtype=float)
    xi_n = np.asarray(xi_n, dtype=float)
    solver = _SurrogateBarrier(problem, x_n, xi_n, p_fixed)
    z0 = np.concatenate([x_n, xi_n / Pm])
    if not solver.interior(z0[:K], z0[K:]):
        c, _ = solver.cons(z0[:K], z0[K:])
        k = int(np.argmax(c))
        raise NoStrictInterior(
            f"start point is not strictly feasible (client {k}: constraint {c[k]:.3g})"
        )
    # A start hugging the box or an active deadline makes Newton crawl back
    # by distance doubling. Lowering x only adds slack to every deadline.
    for margin in (1e-5, 1e-7):
        pulled = z0.copy()
        pulled[:K] *= 1.0 - 1e-4
        pulled = np.clip(pulled, margin, 1.0 - margin)
        if solver.interior(pulled[:K], pulled[K:]):
            z0 = pulled
            break
    if method == "barrier":
        z, t, newton = solver.solve(z0, gap)
        bound = solver.m / t
    else:
        z, lam, t, newton = solver.solve_primal_dual(z0, gap)
        c_all = np.concatenate([solver.cons(z[:K], z[K:])[0], -z, z - 1.0])
        bound = float(-c_all @ lam)
    x, s = z[:K], z[K:]
    c, _ = solver.cons(x, s)
    info = {"t": t, "newton": newton, "gap": bound, "constraints": c}
    return x, s * Pm, info


# ---------------------------------------------------------------- power block: exact QP


def solve_p3b(xi, x, P_max, P_sum) -> np.ndarray:
    """Minimize ``sum (xi_k - x_k p_k)^2`` over ``0 <= p <= P_max``, ``sum p <= P_sum``.

    KKT: ``p_k(mu) = clip(xi_k / x_k - mu / (2 x_k^2), 0, P_max)`` with the
    multiplier ``mu >= 0`` of the sum constraint found by bisection and then
    solved exactly on the final active set.
    """
    xi = np.asarray(xi, dtype=float)
    x = np.asarray(x, dtype=float)
    p = np.zeros_like(xi)
    act = x > 1e-12
    if not np.any(act):
        return p
    xa, ua = x[act], xi[act] / x[act]

    def powers(mu):
        return np.clip(ua - mu / (2.0 * xa**2), 0.0, P_max)

    pa = powers(0.0)
    if pa.sum() > P_sum:
        lo, hi = 0.0, float(np.max(2.0 * xa * xi[act])) + 1e-300
        for _ in range(200):
            mid = 0.5 * (lo + hi)
            if powers(mid).sum() > P_sum:
                lo = mid
            else:
                hi = mid
            if hi - lo <= 1e-15 * hi:
                break
        pa = powers(hi)
        raw = ua - hi / (2.0 * xa**2)
        free = (raw > 0.0) & (raw < P_max)
        if np.any(free):
            capped = P_max * np.count_nonzero(raw >= P_max)
            wts = 1.0 / (2.0 * xa[free] ** 2)
            mu = (ua[free].sum() + capped - P_sum) / wts.sum()
            trial = powers(max(mu, 0.0))
            if abs(trial.sum() - P_sum) <= abs(pa.sum() - P_sum) and trial.sum() <= P_sum * (1 + 1e-15):
                pa = trial
        pa = np.minimum(pa, P_max)
    p[act] = pa
    return p


# ---------------------------------------------------------------- PAMM driver


def _initial_point(sub: JcspcProblem):
    K = sub.K
    p0 = np.full(K, min(sub.P_sum / K, sub.P_max))
    x0 = np.full(K, 0.5)
    xi0 = x0 * p0
    c = phi_all(x0, xi0, sub.H, sub.sigma2, sub.eta)
    bad = c > -1e-6
    if np.any(bad):
        se = np.log2(1.0 + np.diag(sub.H) * xi0 / (sub.H @ xi0 - np.diag(sub.H) * xi0 + sub.sigma2))
        with np.errstate(divide="ignore"):
            cap = 0.5 * se / sub.eta
        x0 = np.where(bad, np.minimum(x0, cap), x0)
        if np.any(x0 <= 0):
            k = int(np.argmax(x0 <= 0))
            raise NoStrictInterior(f"client {k} has no usable channel")
    return x0, p0, xi0


def _subproblem(problem, idx):
    return JcspcProblem(
        problem.H[np.ix_(idx, idx)],
        problem.pi_tilde[idx],
        problem.eta[idx],
        problem.P_max,
        problem.P_sum,
        problem.sigma2,
        beta=problem.beta,
        gamma=problem.gamma,
        I_max=problem.I_max,
        J_max=problem.J_max,
        outer_tol=problem.outer_tol,
        inner_tol=problem.inner_tol,
        max_escalations=problem.max_escalations,
        weight_ref=problem.weight_ref,
    )


def _pamm_core(sub: JcspcProblem, x, p, xi, trace: PammTrace, scale_pi):
    for _ in range(sub.I_max):
        inner_vals = []
        xn, xin = x, xi
        n = 0
        for n in range(1, sub.J_max + 1):
            xs, xis, _ = solve_p3a_inner(sub, xn, xin, p)
            inner_vals.append(p3_objective(sub, xs, p, xis))
            step = max(np.max(np.abs(xs - xn)), np.max(np.abs(xis - xin)) / sub.P_max)
            xn, xin = xs, xis
            if step <= sub.inner_tol:
                break
        p_new = solve_p3b(xin, xn, sub.P_max, sub.P_sum)
        dx = float(np.linalg.norm(xn - x))
        dp = float(np.linalg.norm(p_new - p))
        x, xi, p = xn, xin, p_new
        trace.dx.append(dx)
        trace.dp.append(dp)
        trace.zero_one.append(zero_one_loss(x))
        trace.objective.append(float(scale_pi @ x))
        trace.p3_objective.append(p3_objective(sub, x, p, xi))
        trace.penalty_residual.append(float(np.max(np.abs(xi - x * p))))
        trace.inner_iterations.append(n)
        trace.inner_objective.append(inner_vals)
        trace.gamma.append(sub.gamma)
        if dx < sub.outer_tol and dp < sub.outer_tol:
            break
    return x, p, xi


def pamm_solve(problem: JcspcProblem, x0=None, p0=None):
    """Relaxed solution ``(Allocation, PammTrace)`` of the selection problem.

    Clients with ``eta_k = 0`` are fixed to ``x_k = 1`` with zero power. If
    the split residual ``max |xi - x p|`` stays above ``1e-4 P_max`` the
    coupling weight is raised tenfold and the solve resumes from the
    incumbent, at most ``max_escalations`` times.
    """
    K = problem.K
    x = np.zeros(K)
    p = np.zeros(K)
    xi = np.zeros(K)
    forced = problem.eta == 0
    x[forced] = 1.0
    idx = np.flatnonzero(~forced)
    trace = PammTrace()
    if idx.size:
        sub = _subproblem(problem, idx)
        xs, ps, xis = _initial_point(sub)
        if x0 is not None:
            xs = np.asarray(x0, dtype=float)[idx]
        if p0 is not None:
            ps = np.asarray(p0, dtype=float)[idx]
            xis = xs * ps
        for esc in range(problem.max_escalations + 1):
            xs, ps, xis = _pamm_core(sub, xs, ps, xis, trace, sub.pi_tilde)
            if np.max(np.abs(xis - xs * ps)) <= 1e-4 * sub.P_max or esc == problem.max_escalations:
                break
            sub.gamma *= 10.0
        x[idx], p[idx], xi[idx] = xs, ps, xis
    alloc = Allocation(x=x, p=p, xi=xi, feasible=False, objective=float(problem.pi_tilde @ x))
    alloc.info["iterations"] = len(trace)
    return alloc, trace


def _budget_power(problem, sel, gamma_all):
    p = min_power(problem.H, np.where(sel, gamma_all, 0.0), problem.sigma2, problem.P_max)
    if p is None or np.sum(p) > problem.P_sum:
        return None
    return p


def _fill(problem, sel, p, gamma_all, added, skip=()):
    order = np.lexsort((np.arange(problem.K), -problem.pi_tilde))
    for k in order:
        if sel[k] or k in skip:
            continue
        trial = sel.copy()
        trial[k] = True
        pt = _budget_power(problem, trial, gamma_all)
        if pt is not None:
            sel, p = trial, pt
            added.append(int(k))
    return sel, p


def _swap_candidates(problem, sel):
    """Improving (drop i, add j) pairs, largest objective gain first."""
    pi = problem.pi_tilde
    pairs = [
        (pi[j] - pi[i], -i, -j, i, j)
        for i in np.flatnonzero(sel)
        for j in np.flatnonzero(~sel)
        if pi[j] > pi[i]
    ]
    pairs.sort(reverse=True)
    return [(i, j) for *_, i, j in pairs]


def round_and_repair(alloc: Allocation, problem: JcspcProblem, threshold: float = 0.5,
                     fill: bool = False, swap: bool = False) -> Allocation:
    """Binary allocation from a relaxed one, certified feasible.

    Thresholds ``x``, computes minimal powers for the selected set, and drops
    the selected transmitting client with the smallest ``pi_tilde`` until the
    power budgets hold. With ``fill=True`` unselected clients are then
    offered a place in decreasing ``pi_tilde`` order and kept whenever the
    enlarged set still has feasible minimal powers. With ``swap=True`` a
    selected client is exchanged for an unselected one of larger
    ``pi_tilde`` whenever the exchanged set stays feasible, followed by
    another fill. When no such exchange exists, a selected client is dropped
    and the others are refilled without it, kept if the objective strictly
    rises. Both moves repeat until neither improves the objective.
    """
    sel = np.asarray(alloc.x) >= threshold
    sel |= problem.eta == 0
    gamma_all = sinr_targets_from_eta(problem.eta)
    dropped = []
    while True:
        p = _budget_power(problem, sel, gamma_all)
        if p is not None:
            break
        cand = np.flatnonzero(sel & (gamma_all > 0))
        # lowest predicted loss first; later index on ties
        k = int(cand[np.lexsort((-cand, problem.pi_tilde[cand]))[0]])
        sel[k] = False
        dropped.append(k)
    added, swapped = [], []
    if fill:
        sel, p = _fill(problem, sel, p, gamma_all, added)
    if swap:
        improved = True
        while improved:
            improved = False
            for i, j in _swap_candidates(problem, sel):
                trial = sel.copy()
                trial[i], trial[j] = False, True
                pt = _budget_power(problem, trial, gamma_all)
                if pt is not None:
                    sel, p = trial, pt
                    swapped.append((int(i), int(j)))
                    if fill:
                        sel, p = _fill(problem, sel, p, gamma_all, added)
                    improved = True
                    break
            if improved:
                continue
            # Drop one client and refill without it; this frees room for
            # several others, which no single exchange can do.
            for i in np.flatnonzero(sel & (gamma_all > 0)):
                trial = sel.copy()
                trial[i] = False
                pt = _budget_power(problem, trial, gamma_all)
                if pt is None:
                    continue
                gained = []
                trial, pt = _fill(problem, trial, pt, gamma_all, gained, skip=(i,))
                if problem.pi_tilde @ trial > problem.pi_tilde @ sel * (1 + 1e-12):
                    sel, p = trial, pt
                    swapped.append((int(i), tuple(gained)))
                    added.extend(gained)
                    improved = True
                    break
    x = sel.astype(float)
    cert = certify(x, p, problem.H, problem.eta, problem.sigma2, problem.P_max, problem.P_sum)
    out = Allocation(x=x, p=p, xi=x * p, feasible=cert.ok, objective=float(problem.pi_tilde @ x))
    out.info.update(alloc.info)
    out.info["dropped"] = dropped
    out.info["added"] = added
    out.info["swapped"] = swapped
    out.info["certificate"] = cert.as_dict()
    return out


def solve_jcspc(problem: JcspcProblem, fill: bool = True, swap: bool = True):
    """PAMM followed by rounding, repair and polishing: ``(binary, relaxed, trace)``."""
    relaxed, trace = pamm_solve(problem)
    return round_and_repair(relaxed, problem, fill=fill, swap=swap), relaxed, trace
