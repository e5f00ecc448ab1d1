import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from sttgs.channel import sinr
from sttgs.powerctl import (
    certify,
    check_sum_budget,
    min_power,
    min_power_iterative,
    sinr_targets_from_eta,
)

from conftest import random_gain_matrix


def test_scalar_case():
    p = min_power(np.array([[2.0]]), [3.0], 0.5, 1.0)
    assert p == pytest.approx([0.75])
    assert min_power(np.array([[2.0]]), [3.0], 0.5, 0.7) is None


def test_zero_targets_give_zero_power():
    H = np.array([[2.0, 1.0], [1.0, 2.0]])
    assert np.array_equal(min_power(H, [0.0, 0.0], 1.0, 1.0), [0.0, 0.0])
    assert np.array_equal(min_power_iterative(H, [0.0, 0.0], 1.0, 1.0), [0.0, 0.0])


def test_symmetric_two_client_system():
    H = np.array([[2.0, 1.0], [1.0, 2.0]])
    assert min_power(H, [1.0, 1.0], 1.0, 5.0) == pytest.approx([1.0, 1.0], rel=1e-14)
    assert min_power_iterative(H, [1.0, 1.0], 1.0, 5.0) == pytest.approx([1.0, 1.0], rel=1e-10)


def test_single_client_iteration_is_exact():
    p = min_power_iterative(np.array([[4.0]]), [2.0], 1.0, 1.0)
    assert p == pytest.approx([0.5], rel=1e-15)


def test_huge_target_is_infeasible_for_both():
    H = np.array([[2.0, 1.0], [1.0, 2.0]])
    assert min_power(H, [1e6, 1.0], 1.0, 1.0) is None
    assert min_power_iterative(H, [1e6, 1.0], 1.0, 1.0) is None


def test_spectral_infeasibility():
    # Mutual targets of 3 with unit cross gain against own gain 2 cannot be met.
    H = np.array([[2.0, 1.0], [1.0, 2.0]])
    assert min_power(H, [3.0, 3.0], 1.0, 1e9) is None
    assert min_power_iterative(H, [3.0, 3.0], 1.0, 1e9) is None


def test_silent_clients_are_excluded():
    H = np.array([[2.0, 5.0, 1.0], [1.0, 2.0, 1.0], [1.0, 9.0, 2.0]])
    p = min_power(H, [1.0, 0.0, 1.0], 1.0, 10.0)
    assert p[1] == 0.0
    sub = min_power(H[np.ix_([0, 2], [0, 2])], [1.0, 1.0], 1.0, 10.0)
    assert np.allclose(p[[0, 2]], sub)


def test_input_validation():
    with pytest.raises(ValueError):
        min_power(np.eye(2), [1.0], 1.0, 1.0)
    with pytest.raises(ValueError):
        min_power(np.eye(2), [1.0, -1.0], 1.0, 1.0)


@settings(max_examples=200, deadline=None)
@given(st.integers(0, 2**31), st.integers(1, 6))
def test_minimal_point_meets_targets_with_equality(seed, K):
    rng = np.random.default_rng(seed)
    H = random_gain_matrix(rng, K)
    gamma = rng.uniform(0.0, 1.0, size=K)
    p = min_power(H, gamma, 0.1, 10.0)
    if p is None:
        return
    achieved = sinr(H, p, None, 0.1)
    assert np.allclose(achieved, gamma, rtol=1e-9, atol=1e-12)
    # Any feasible point dominates the minimal one: scaling up stays feasible.
    q = p * 1.5
    assert np.all(sinr(H, q, None, 0.1) >= gamma - 1e-12)


@settings(max_examples=100)
@given(st.lists(st.floats(0.0, 0.3), min_size=1, max_size=8), st.floats(0.0, 3.0))
def test_sum_budget(p, P_sum):
    assert check_sum_budget(p, P_sum) == (np.sum(p) <= P_sum * (1 + 1e-12))


def test_sum_budget_examples():
    assert check_sum_budget([0.1, 0.1, 0.1], 0.3) is True
    assert check_sum_budget([0.2, 0.2], 0.3) is False
    assert check_sum_budget([0.15, 0.15], 0.3) is True
    assert check_sum_budget([0.3], 0.3) is True


def test_sinr_targets():
    assert np.allclose(sinr_targets_from_eta([0.0, 1.0, 2.0]), [0.0, 1.0, 3.0])


def test_certificate_checks():
    H = np.array([[2.0, 1.0], [1.0, 2.0]])
    eta = np.array([1.0, 1.0])
    ok = certify([1, 1], [1.0, 1.0], H, eta, 1.0, 1.0, 2.0)
    assert ok.ok and ok.binary
    assert not certify([1, 1], [1.0, 1.0], H, eta, 1.0, 0.5, 2.0).ok  # box
    assert not certify([1, 1], [1.0, 1.0], H, eta, 1.0, 1.0, 1.5).ok  # sum
    assert not certify([1, 1], [1.0, 0.5], H, eta, 1.0, 1.0, 2.0).ok  # rate
    assert not certify([1, 0.5], [1.0, 1.0], H, eta, 1.0, 1.0, 2.0).ok  # binary
    # an unselected client has no deadline
    assert certify([1, 0], [1.0, 0.0], H, eta, 1.0, 1.0, 2.0).ok
