import csv
import io
import json

import numpy as np
import pytest

from sttgs.channel import save_gains
from sttgs.cli import (
    StageError,
    channel_gains,
    dumps_report,
    main,
    run_pipeline,
    sample_pilots,
    summarize,
    sweep,
    sweep_cell,
)
from sttgs.oracle import brute_force_p2
from sttgs.scenario import SyntheticSpec, default_scenario_path, load_loss_manifest, reference_losses_path


def _read_csv(text):
    return list(csv.DictReader(io.StringIO(text)))


def test_reference_losses_pipeline_near_oracle(default_config):
    means = load_loss_manifest(reference_losses_path(), default_config)
    res = run_pipeline(default_config, loss_means=means)
    rep = res.report
    assert rep["certificate"]["ok"]
    pi = np.asarray(default_config.D_sizes) * means
    H = channel_gains(default_config)
    _, best, _ = brute_force_p2(H, pi, np.asarray(rep["eta"]), default_config, table=False)
    assert rep["allocation"]["objective"] >= 0.95 * best
    assert rep["pilot_sizes"] == [28] * 5


def test_equal_losses_pick_largest_feasible_set(default_config):
    res = run_pipeline(default_config, loss_means=[0.1] * 5)
    H = channel_gains(default_config)
    pi = np.full(5, 28.0)
    _, best, _ = brute_force_p2(H, pi, np.asarray(res.report["eta"]), default_config, table=False)
    assert len(res.report["allocation"]["selected"]) * 28.0 == pytest.approx(best)


def test_synthetic_pipeline_report(default_config):
    res = run_pipeline(default_config)
    rep = res.report
    assert rep["certificate"]["ok"]
    assert len(rep["loss_table"]) == 5
    assert all(len(row["pilot"]) == 28 for row in rep["loss_table"])
    assert res.pamm_trace and res.pttm_trace


def test_report_is_reproducible(default_config):
    a = dumps_report(run_pipeline(default_config).report)
    b = dumps_report(run_pipeline(default_config).report)
    assert a == b


def test_stage_errors_name_the_stage(default_config):
    with pytest.raises(StageError) as err:
        run_pipeline(default_config, H=np.eye(3))
    assert err.value.stage == "channel"
    tight = default_config.replace(T=1.0)
    with pytest.raises(StageError) as err:
        run_pipeline(tight, loss_means=[0.1] * 5)
    assert err.value.stage == "pttm" and err.value.infeasible


def test_sampler_choices(default_config):
    ds = SyntheticSpec().generate(default_config)
    for method in ("fdc", "random", "uniform"):
        pilots = sample_pilots(ds, default_config, method)
        assert [len(p) for p in pilots] == [28] * 5
    with pytest.raises(ValueError):
        sample_pilots(ds, default_config, "greedy")


def test_sweep_cell_and_summary(default_config):
    row = sweep_cell(default_config, "beta", 0.1, 0)
    assert row["error"] == ""
    assert np.isfinite(row["mse"]) and row["objective"] > 0
    rows, summary = sweep(default_config, "P_sum", [0.2, 0.3], range(2))
    assert len(rows) == 4
    assert [(s["value"], s["stat"]) for s in summary] == [
        (0.2, "q1"), (0.2, "median"), (0.2, "q3"), (0.3, "q1"), (0.3, "median"), (0.3, "q3")
    ]
    with pytest.raises(ValueError):
        sweep(default_config, "N", [1], range(1))


def test_sweep_records_failures(default_config):
    row = sweep_cell(default_config, "T", 1.0, 0)
    assert row["error"].startswith("pttm")
    assert np.isnan(row["objective"])
    s = summarize([row], metrics=("objective",))
    assert np.isnan(s[0]["objective"])


# ---------------------------------------------------------------- subcommands


def test_cli_pipeline_outputs(tmp_path):
    out = tmp_path / "run"
    assert main(["pipeline", "--out", str(out)]) == 0
    rep = json.loads((out / "report.json").read_text())
    assert rep["certificate"]["ok"]
    assert _read_csv((out / "pamm_trace.csv").read_text())
    assert _read_csv((out / "pttm_trace.csv").read_text())


def test_cli_pipeline_with_losses_is_deterministic(tmp_path):
    args = ["pipeline", "--losses", str(reference_losses_path()), "--seed", "3"]
    assert main(args + ["--out", str(tmp_path / "a")]) == 0
    assert main(args + ["--out", str(tmp_path / "b")]) == 0
    assert (tmp_path / "a" / "report.json").read_bytes() == (tmp_path / "b" / "report.json").read_bytes()


def test_cli_fdc(tmp_path):
    assert main(["fdc", "--rho", "0.2", "--out", str(tmp_path)]) == 0
    rows = _read_csv((tmp_path / "fdc.csv").read_text())
    assert [int(r["pilot_size"]) for r in rows] == [56] * 5


def test_cli_pttm_with_gain_file(tmp_path, default_config):
    save_gains(tmp_path / "g.txt", channel_gains(default_config))
    assert main(["pttm", "--gains", str(tmp_path / "g.txt"), "--out", str(tmp_path)]) == 0
    rep = json.loads((tmp_path / "pttm.json").read_text())
    assert rep["equal_power_time"] >= rep["T0_star"]


@pytest.mark.parametrize("cmd, name", [("jcspc", "jcspc.json"), ("oracle", "oracle.csv"), ("baseline", "baselines.csv")])
def test_cli_scheduling_commands(tmp_path, cmd, name):
    args = [cmd, "--losses", str(reference_losses_path()), "--out", str(tmp_path)]
    assert main(args) == 0
    text = (tmp_path / name).read_text()
    if name.endswith(".csv"):
        rows = _read_csv(text)
        assert rows
        if cmd == "oracle":
            assert len(rows) == 32
        else:
            assert all(r["feasible"] == "1" for r in rows)
    else:
        assert json.loads(text)["certificate"]["ok"]


def test_cli_sweep(tmp_path):
    args = ["sweep", "--param", "rho", "--grid", "0.1,0.2", "--seeds", "2", "--out", str(tmp_path)]
    assert main(args) == 0
    assert len(_read_csv((tmp_path / "sweep_cells.csv").read_text())) == 4
    assert len(_read_csv((tmp_path / "sweep_summary.csv").read_text())) == 6


def test_cli_exit_codes(tmp_path, capsys):
    bad = tmp_path / "bad.scn"
    bad.write_text(default_scenario_path().read_text().replace("rho = 0.1", "rho = 1.2"))
    assert main(["pttm", "--scenario", str(bad)]) == 1
    assert "rho" in capsys.readouterr().err
    tight = tmp_path / "tight.scn"
    tight.write_text(default_scenario_path().read_text().replace("T = 350", "T = 1"))
    assert main(["pttm", "--scenario", str(tight)]) == 2
    assert main(["pttm", "--scenario", str(tmp_path / "missing.scn")]) == 1
