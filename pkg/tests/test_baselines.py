import numpy as np
import pytest

from sttgs.baselines import (
    active_learning_baseline,
    fairness_baseline,
    max_rate_baseline,
    water_filling,
)
from sttgs.oracle import brute_force_p2
from sttgs.powerctl import certify
from sttgs.scenario import ScenarioConfig

from conftest import scheduling_instance


def _cfg(K, P_max=1.0, P_sum=1.0, sigma2=0.1, **kw):
    return ScenarioConfig(K=K, N=1, T=10.0, P_max=P_max, P_sum=P_sum, sigma2=sigma2,
                          client_positions=((1.0, 0.0),) * K, **kw)


def test_water_filling_single_client():
    assert water_filling([1.0], [1.0], 0.1, 0.2, 0.3) == pytest.approx([0.2])
    assert water_filling([1.0], [1.0], 0.1, 0.5, 0.3) == pytest.approx([0.3])


def test_water_filling_symmetric_and_budgeted():
    p = water_filling([1.0, 1.0], [1.0, 1.0], 0.1, 1.0, 0.5)
    assert p[0] == pytest.approx(p[1])
    assert p.sum() == pytest.approx(0.5)
    p = water_filling([10.0, 1.0, 0.01], [1.0, 1.0, 1.0], 1.0, 1.0, 1.0)
    assert p.sum() <= 1.0 + 1e-12 and np.all(p >= 0) and np.all(p <= 1.0)
    assert p[0] >= p[1] >= p[2]


def test_max_rate_single_client_deadline():
    H = np.array([[1.0]])
    cfg = _cfg(1, P_max=0.2, P_sum=0.3, sigma2=0.1)
    a = max_rate_baseline(H, cfg, [1.0], [1.0])
    assert a.p[0] == pytest.approx(0.2) and a.selected() == [0]
    b = max_rate_baseline(H, cfg, [2.0], [1.0])
    assert b.selected() == [] and b.p[0] == 0.0


def test_fairness_symmetric_all_or_none():
    H = np.array([[1.0, 0.2], [0.2, 1.0]])
    cfg = _cfg(2)
    assert fairness_baseline(H, cfg, [1.0, 1.0], [1.0, 1.0]).selected() == [0, 1]
    assert fairness_baseline(H, cfg, [5.0, 5.0], [1.0, 1.0]).selected() == []


def test_fairness_drops_heavy_client():
    H = np.array([[1.0, 0.05, 0.05], [0.05, 1.0, 0.05], [0.05, 0.05, 1.0]])
    cfg = _cfg(3)
    a = fairness_baseline(H, cfg, [1.0, 1.0, 50.0], [1.0, 1.0, 1.0])
    assert 2 not in a.selected()
    assert a.selected() == [0, 1]


def test_active_learning_examples():
    H = np.array([[1.0, 0.0], [0.0, 1.0]])
    cfg = _cfg(2)
    a = active_learning_baseline([1.0, 2.0], H, cfg, [0.5, 0.5])
    assert a.selected() == [0, 1]
    assert a.info["order"] == [1, 0]
    # only the top-loss client meets its deadline alone
    H2 = np.array([[1.0, 1.0], [1.0, 1e-3]])
    b = active_learning_baseline([1.0, 2.0], H2, cfg, [0.5, 2.0])
    c = active_learning_baseline([2.0, 1.0], H2, cfg, [0.5, 2.0])
    assert b.selected() == []
    assert c.selected() == [0]


@pytest.mark.parametrize("seed", range(20))
def test_baselines_certified_and_dominated(default_config, reference_pi, seed):
    cfg, H, eta = scheduling_instance(default_config, reference_pi, seed)
    _, best, _ = brute_force_p2(H, reference_pi, eta, cfg, table=False)
    for a in (max_rate_baseline(H, cfg, eta, reference_pi),
              fairness_baseline(H, cfg, eta, reference_pi),
              active_learning_baseline(reference_pi, H, cfg, eta)):
        assert a.feasible, a.info["scheme"]
        assert certify(a.x, a.p, H, eta, cfg.sigma2, cfg.P_max, cfg.P_sum).ok
        assert a.objective <= best + 1e-9
        assert np.all(a.p[a.x == 0] == 0)
