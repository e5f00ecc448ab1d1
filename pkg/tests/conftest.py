import numpy as np
import pytest

from sttgs.channel import composite_gains, sample_channel
from sttgs.pamm import eta_targets
from sttgs.pttm import pttm_bisect
from sttgs.scenario import default_scenario_path, load_loss_manifest, load_scenario, reference_losses_path


@pytest.fixture(scope="session")
def default_config():
    return load_scenario(default_scenario_path())


@pytest.fixture(scope="session")
def reference_pi(default_config):
    means = load_loss_manifest(reference_losses_path(), default_config)
    return np.asarray(default_config.D_sizes) * means


def scheduling_instance(config, pi_tilde, seed):
    """(config, H, eta) for one seeded channel draw at the minimal pilot time."""
    cfg = config.reseeded(seed)
    H = composite_gains(sample_channel(cfg, np.random.default_rng([seed, 2])))
    T0 = pttm_bisect(H, cfg, cfg.pilot_sizes).T0_star
    return cfg, H, eta_targets(cfg, T0, cfg.pilot_sizes)


def random_gain_matrix(rng, K, cross=0.3):
    d = rng.uniform(0.5, 2.0, size=K)
    H = rng.uniform(0.0, cross, size=(K, K)) * d[None, :]
    np.fill_diagonal(H, d)
    return H
