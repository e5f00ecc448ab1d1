import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from sttgs.oracle import (
    MAX_ORACLE_K,
    brute_force_p2,
    oracle_allocation,
    project_box_simplex,
    projected_gradient_qp,
    pttm_grid_search,
)
from sttgs.pamm import solve_p3b
from sttgs.powerctl import certify, min_power_iterative
from sttgs.pttm import pilot_power
from sttgs.scenario import ScenarioConfig

from conftest import scheduling_instance


def _cfg(K, P_max=1.0, P_sum=1.0, sigma2=0.1):
    return ScenarioConfig(K=K, N=1, T=10.0, P_max=P_max, P_sum=P_sum, sigma2=sigma2,
                          client_positions=((1.0, 0.0),) * K)


def test_single_feasible_client():
    x, obj, rows = brute_force_p2(np.array([[1.0]]), [2.0], [1.0], _cfg(1))
    assert list(x) == [1.0] and obj == 2.0
    assert len(rows) == 2


def test_zero_losses_choose_empty_set():
    H = np.array([[2.0, 0.1], [0.1, 2.0]])
    x, obj, _ = brute_force_p2(H, [0.0, 0.0], [1.0, 1.0], _cfg(2))
    assert list(x) == [0.0, 0.0] and obj == 0.0


def test_top_pair_infeasible_lower_pair_feasible():
    # Clients 0 and 1 carry the largest losses but interfere strongly.
    H = np.array([
        [1.0, 0.95, 0.01],
        [0.95, 1.0, 0.01],
        [0.01, 0.01, 1.0],
    ])
    pi = [3.0, 2.9, 1.0]
    eta = [1.0, 1.0, 1.0]
    cfg = _cfg(3, P_max=1.0, P_sum=3.0, sigma2=0.1)
    assert min_power_iterative(H, [1.0, 1.0, 0.0], 0.1, 1.0) is None
    assert min_power_iterative(H, [1.0, 0.0, 1.0], 0.1, 1.0) is not None
    x, obj, _ = brute_force_p2(H, pi, eta, cfg)
    assert list(x) == [1.0, 0.0, 1.0]
    assert obj == pytest.approx(4.0)


def test_table_covers_every_subset(default_config, reference_pi):
    cfg, H, eta = scheduling_instance(default_config, reference_pi, 1)
    x, obj, rows = brute_force_p2(H, reference_pi, eta, cfg)
    assert len(rows) == 2**cfg.K
    assert len({r.selection for r in rows}) == 2**cfg.K
    feasible = [r.objective for r in rows if r.feasible]
    assert obj == max(feasible)
    a = oracle_allocation(H, reference_pi, eta, cfg)
    assert certify(a.x, a.p, H, eta, cfg.sigma2, cfg.P_max, cfg.P_sum).ok


def test_subset_monotone_feasibility(default_config, reference_pi):
    # Removing a client never breaks feasibility.
    cfg, H, eta = scheduling_instance(default_config, reference_pi, 2)
    _, _, rows = brute_force_p2(H, reference_pi, eta, cfg)
    ok = {r.selection: r.feasible for r in rows}
    for sel, good in ok.items():
        if not good:
            continue
        for k in range(cfg.K):
            if sel[k]:
                sub = sel[:k] + (0,) + sel[k + 1:]
                assert ok[sub]


def test_oracle_objective_grows_with_budget(default_config, reference_pi):
    cfg, H, eta = scheduling_instance(default_config, reference_pi, 3)
    objs = [brute_force_p2(H, reference_pi, eta, cfg.replace(P_sum=ps), table=False)[1]
            for ps in (0.05, 0.1, 0.2, 0.3, 0.5, 1.0)]
    assert all(b >= a for a, b in zip(objs, objs[1:]))


def test_size_limit():
    K = MAX_ORACLE_K + 1
    with pytest.raises(ValueError):
        brute_force_p2(np.eye(K), np.ones(K), np.ones(K), _cfg(K))


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 2**31), st.integers(1, 6))
def test_projection_is_feasible_and_nearest(seed, K):
    rng = np.random.default_rng(seed)
    v = rng.uniform(-0.2, 0.5, size=K)
    p = project_box_simplex(v, 0.2, 0.3)[0]
    assert np.all((p >= 0) & (p <= 0.2))
    assert p.sum() <= 0.3 + 1e-12
    for _ in range(20):
        q = project_box_simplex(rng.uniform(0.0, 0.2, size=K), 0.2, 0.3)[0]
        assert np.sum((v - p) ** 2) <= np.sum((v - q) ** 2) + 1e-12


def test_projected_gradient_trivial_cases():
    xi = np.array([0.05, 0.1])
    assert np.allclose(projected_gradient_qp(xi, np.ones(2), 0.2, 0.3), xi, atol=1e-10)
    assert np.array_equal(projected_gradient_qp(np.zeros(2), np.ones(2), 0.2, 0.3), [0.0, 0.0])


def test_p3b_matches_projected_gradient_batch():
    rng = np.random.default_rng(0)
    n, K = 50, 4
    x = rng.uniform(0.05, 1.0, size=(n, K))
    xi = rng.uniform(0.0, 0.35, size=(n, K))
    pg = projected_gradient_qp(xi, x, 0.2, 0.3)
    kkt = np.array([solve_p3b(a, b, 0.2, 0.3) for a, b in zip(xi, x)])
    assert np.max(np.abs(pg - kkt)) <= 1e-6


@pytest.mark.parametrize("seed", range(3))
def test_grid_search_threshold(default_config, reference_pi, seed):
    cfg, H, _ = scheduling_instance(default_config, reference_pi, seed)
    T = pttm_grid_search(H, cfg, cfg.pilot_sizes)
    assert pilot_power(H, cfg, cfg.pilot_sizes, T) is not None
    assert pilot_power(H, cfg, cfg.pilot_sizes, T - cfg.T / 10_000**2 * 2) is None
