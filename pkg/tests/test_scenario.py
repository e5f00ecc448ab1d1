import json

import numpy as np
import pytest
from hypothesis import given, strategies as st

from sttgs.scenario import (
    ClientDataset,
    ScenarioError,
    SyntheticSpec,
    dumps_scenario,
    generate_synthetic_datasets,
    load_loss_manifest,
    load_manifest,
    loads_scenario,
    pilot_size,
    read_image,
    reference_losses_path,
    write_image,
)

MINIMAL = """
[scenario]
K = 2
N = 4
T = 100
P_max = 0.2
P_sum = 0.3
sigma2_dbm = -100
"""


def test_default_file_values(default_config):
    c = default_config
    assert (c.K, c.N, c.T, c.P_max, c.P_sum) == (5, 64, 350.0, 0.2, 0.3)
    assert c.sigma2 == pytest.approx(1e-13, rel=1e-12)
    assert c.rho == (0.1,) * 5
    assert c.D_sizes == (280,) * 5
    assert c.gamma_eff == pytest.approx(100 / 0.04)


def test_default_pilot_sizes_are_ceiling_of_rho(default_config):
    assert list(default_config.pilot_sizes) == [28] * 5


def test_rho_out_of_range_names_field():
    with pytest.raises(ScenarioError) as err:
        loads_scenario(MINIMAL + "rho = 1.2, 0.1\n")
    assert err.value.field == "rho"


def test_missing_seed_defaults_to_zero():
    assert loads_scenario(MINIMAL).seed == 0


@pytest.mark.parametrize("bad, field", [
    ("K = 0", "K"), ("T = -1", "T"), ("beta = 0", "beta"), ("wat = 3", "wat"), ("B = 1, 2, 3", "B"),
])
def test_invalid_values_are_rejected(bad, field):
    key = bad.split("=")[0].strip()
    lines = [ln for ln in MINIMAL.splitlines() if ln.split("=")[0].strip() != key]
    with pytest.raises(ScenarioError) as err:
        loads_scenario("\n".join(lines + [bad]) + "\n")
    assert err.value.field == field


def test_missing_required_key():
    with pytest.raises(ScenarioError) as err:
        loads_scenario(MINIMAL.replace("P_sum = 0.3", ""))
    assert err.value.field == "P_sum"


def test_dump_round_trip(default_config):
    again = loads_scenario(dumps_scenario(default_config))
    assert again == default_config


def test_reseeded_redraws_positions(default_config):
    a = default_config.reseeded(3)
    b = default_config.reseeded(3)
    assert a == b
    assert a.client_positions != default_config.client_positions
    assert default_config.reseeded(3, redraw_positions=False).client_positions == default_config.client_positions


@given(st.floats(0.001, 0.999), st.integers(1, 5000))
def test_pilot_size_bounds(rho, n):
    m = pilot_size(rho, n)
    assert 1 <= m <= n
    assert m >= rho * n - 1e-6
    assert m - 1 < rho * n + 1e-6


def test_pilot_size_examples():
    assert pilot_size(0.1, 25) == 3
    assert pilot_size(0.1, 280) == 28


def test_synthetic_single_cluster_without_noise(default_config):
    cfg = default_config.replace(D_sizes=(20,) * 5)
    ds = generate_synthetic_datasets(cfg, 1, 0.0)
    for d in ds:
        imgs = np.asarray(d.images)
        assert np.all(imgs == imgs[0])
        assert np.all(d.precomputed_loss == d.precomputed_loss[0])


def test_synthetic_is_deterministic(default_config):
    a = SyntheticSpec().generate(default_config)
    b = SyntheticSpec().generate(default_config)
    for x, y in zip(a, b):
        assert np.array_equal(np.asarray(x.images), np.asarray(y.images))
        assert np.array_equal(x.precomputed_loss, y.precomputed_loss)


def test_synthetic_round_robin_prototypes(default_config):
    cfg = default_config.replace(D_sizes=(30,) * 5)
    for d in generate_synthetic_datasets(cfg, 3, 0.0):
        imgs = np.asarray(d.images)
        protos = np.unique(imgs.reshape(len(imgs), -1), axis=0)
        assert len(protos) == 3
        for j in range(3):
            assert np.all(imgs[j::3] == imgs[j])


def test_synthetic_path_layout_blocks(default_config):
    cfg = default_config.replace(D_sizes=(30,) * 5)
    d = generate_synthetic_datasets(cfg, 6, 0.0, layout="path")[0]
    imgs = np.asarray(d.images)
    for j in range(6):
        block = imgs[5 * j: 5 * j + 5]
        assert np.all(block == block[0])
    assert not np.array_equal(imgs[0], imgs[5])


def test_synthetic_rejects_bad_arguments(default_config):
    with pytest.raises(ValueError):
        generate_synthetic_datasets(default_config, 0, 0.1)
    with pytest.raises(ValueError):
        generate_synthetic_datasets(default_config, 3, -0.1)
    with pytest.raises(ValueError):
        generate_synthetic_datasets(default_config, 3, 0.1, layout="grid")


def test_dataset_validation():
    img = np.zeros((2, 2, 3))
    with pytest.raises(ValueError):
        ClientDataset([img], [])
    with pytest.raises(ValueError):
        ClientDataset([img], [np.zeros(6)], rendered=[img], precomputed_loss=[0.1])
    with pytest.raises(ValueError):
        ClientDataset([img], [np.zeros(6)], precomputed_loss=[0.1, 0.2])


@pytest.mark.parametrize("suffix", [".ppm", ".f32"])
def test_image_round_trip(tmp_path, suffix):
    rng = np.random.default_rng(0)
    img = rng.uniform(size=(4, 5, 3))
    write_image(tmp_path / f"a{suffix}", img)
    back = read_image(tmp_path / f"a{suffix}")
    tol = 0.5 / 255 + 1e-12 if suffix == ".ppm" else 1e-7
    assert back.shape == img.shape
    assert np.max(np.abs(back - img)) <= tol


def test_manifest_loading(tmp_path):
    img = np.full((2, 2, 3), 0.5)
    write_image(tmp_path / "a.f32", img)
    write_image(tmp_path / "b.f32", img * 0.5)
    doc = {"clients": [{"images": ["a.f32", "b.f32"], "losses": [0.1, 0.2]}]}
    (tmp_path / "m.json").write_text(json.dumps(doc))
    (ds,) = load_manifest(tmp_path / "m.json")
    assert len(ds) == 2
    assert np.allclose(ds.precomputed_loss, [0.1, 0.2])


def test_reference_loss_manifest(default_config):
    means = load_loss_manifest(reference_losses_path(), default_config)
    assert np.allclose(means, [0.38159, 0.26150, 0.02561, 0.21864, 0.31429])


def test_reference_losses_rank_clients(default_config):
    # Ordering of predicted loss from largest to smallest: 1, 5, 2, 4, 3.
    means = load_loss_manifest(reference_losses_path(), default_config)
    assert list(np.argsort(-means) + 1) == [1, 5, 2, 4, 3]


def test_loss_manifest_totals_and_errors(tmp_path, default_config):
    (tmp_path / "a.json").write_text(json.dumps({"pi_tilde": [28.0] * 5}))
    assert np.allclose(load_loss_manifest(tmp_path / "a.json", default_config), 0.1)
    (tmp_path / "b.json").write_text(json.dumps({"mean_loss": [0.1] * 4}))
    with pytest.raises(ScenarioError):
        load_loss_manifest(tmp_path / "b.json", default_config)
