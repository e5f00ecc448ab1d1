"""Command-line entry points for the sample-then-transmit scheduling pipeline.

Subcommands: pipeline, fdc, pttm, jcspc, oracle, baseline, sweep.
Exit status 0 on success, 2 when a stage proves the instance infeasible,
1 on bad input.
"""

import argparse
import csv
import io
import json
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .baselines import active_learning_baseline, fairness_baseline, max_rate_baseline
from .channel import composite_gains, load_gains, sample_channel
from .fdc import FEATURE_MODES, fdc_sample, random_sample, uniform_sample
from .gsloss import pilot_loss, predict_client_loss, true_client_loss
from .oracle import brute_force_p2
from .pamm import JcspcProblem, NoStrictInterior, eta_targets, solve_jcspc, zero_one_loss
from .powerctl import certify
from .pttm import PttmInfeasible, equal_power_pilot_time, pttm_bisect
from .scenario import (
    ScenarioConfig,
    ScenarioError,
    default_scenario_path,
    dumps_scenario,
    SyntheticSpec,
    load_loss_manifest,
    load_manifest,
    load_scenario,
)

EXIT_OK, EXIT_INPUT, EXIT_INFEASIBLE = 0, 1, 2

SAMPLERS = ("fdc", "random", "uniform")


class StageError(RuntimeError):
    """A pipeline stage failed; ``infeasible`` selects exit status 2."""

    def __init__(self, stage, message, infeasible=False):
        super().__init__(f"{stage}: {message}")
        self.stage = stage
        self.infeasible = infeasible


@dataclass
class RunResult:
    report: dict
    pamm_trace: list = field(default_factory=list)
    pttm_trace: list = field(default_factory=list)


# ---------------------------------------------------------------- helpers


def channel_gains(config: ScenarioConfig, seed=None) -> np.ndarray:
    """Composite gains of one channel draw, reproducible from the seed."""
    seed = config.seed if seed is None else seed
    return composite_gains(sample_channel(config, np.random.default_rng([seed, 2])))


def sample_pilots(datasets, config: ScenarioConfig, method="fdc", seed=None, feature_mode="pixels"):
    """Pilot index arrays per client using FDC, random or uniform sampling."""
    seed = config.seed if seed is None else seed
    out = []
    for k, ds in enumerate(datasets):
        rng = np.random.default_rng([seed, 3, k])
        rho = config.rho[k]
        if method == "fdc":
            out.append(fdc_sample(ds, rho, rng, feature_mode).indices)
        elif method == "random":
            out.append(random_sample(ds, rho, rng))
        elif method == "uniform":
            out.append(uniform_sample(ds, rho))
        else:
            raise ValueError(f"unknown sampler {method!r}")
    return out


def predicted_losses(datasets, pilots):
    """``(pi_tilde, pi)``: predicted and exact client losses."""
    pred = np.array(
        [predict_client_loss(pilot_loss(idx, ds), len(ds), len(idx)) for ds, idx in zip(datasets, pilots)]
    )
    true = np.array([true_client_loss(ds) for ds in datasets])
    return pred, true


def loss_prediction_mse(datasets, pilots) -> float:
    """Mean over clients of the squared error in per-image mean loss."""
    pred, true = predicted_losses(datasets, pilots)
    sizes = np.array([len(ds) for ds in datasets], dtype=float)
    return float(np.mean((pred / sizes - true / sizes) ** 2))


def _stage(name, fn, *args, **kw):
    try:
        return fn(*args, **kw)
    except PttmInfeasible as exc:
        raise StageError(name, str(exc), infeasible=True) from exc
    except NoStrictInterior as exc:
        raise StageError(name, str(exc), infeasible=True) from exc
    except (ValueError, KeyError, OSError) as exc:
        raise StageError(name, str(exc)) from exc


def _floats(v):
    return [float(a) for a in np.asarray(v).ravel()]


# ---------------------------------------------------------------- pipeline


def run_pipeline(config: ScenarioConfig, datasets=None, loss_means=None, H=None,
                 sampler="fdc", feature_mode="pixels", fill=True) -> RunResult:
    """Sampling, pilot-time minimization, loss prediction, selection, certification.

    Give ``datasets`` (images with losses) or ``loss_means`` (per-image mean
    loss per client, used directly as the prediction); with neither, a
    synthetic clustered corpus is generated from the seed.
    """
    if H is None:
        H = _stage("channel", channel_gains, config)
    H = np.asarray(H, dtype=float)
    if H.shape != (config.K, config.K):
        raise StageError("channel", f"gain matrix must be {config.K}x{config.K}")

    loss_rows = []
    if loss_means is not None:
        sizes = np.asarray(config.D_sizes, dtype=float)
        pi_tilde = sizes * np.asarray(loss_means, dtype=float)
        pilot_sizes = np.asarray(config.pilot_sizes)
        for k in range(config.K):
            loss_rows.append({"client": k + 1, "predicted": float(pi_tilde[k]), "true": None})
    else:
        if datasets is None:
            datasets = _stage("data", SyntheticSpec().generate, config)
        if len(datasets) != config.K:
            raise StageError("data", f"expected {config.K} client datasets, got {len(datasets)}")
        pilots = _stage("sampling", sample_pilots, datasets, config, sampler, None, feature_mode)
        pilot_sizes = np.array([len(p) for p in pilots])
        pi_tilde, pi_true = _stage("prediction", predicted_losses, datasets, pilots)
        for k in range(config.K):
            loss_rows.append({
                "client": k + 1,
                "predicted": float(pi_tilde[k]),
                "true": float(pi_true[k]),
                "pilot": [int(i) for i in pilots[k]],
            })

    pttm = _stage("pttm", pttm_bisect, H, config, pilot_sizes)
    eta = _stage("pamm", eta_targets, config, pttm.T0_star, pilot_sizes)
    problem = _stage("pamm", JcspcProblem.from_config, H, config, pi_tilde, eta)
    alloc, relaxed, trace = _stage("pamm", solve_jcspc, problem, fill)
    cert = certify(alloc.x, alloc.p, H, eta, config.sigma2, config.P_max, config.P_sum)

    report = {
        "seed": config.seed,
        "scenario": dumps_scenario(config),
        "pilot_sizes": [int(v) for v in pilot_sizes],
        "T0_star": float(pttm.T0_star),
        "pilot_power": _floats(pttm.p_pilot),
        "eta": _floats(eta),
        "loss_table": loss_rows,
        "relaxed_x": _floats(relaxed.x),
        "allocation": alloc.as_dict(),
        "certificate": cert.as_dict(),
        "pamm_iterations": len(trace),
        "zero_one_loss": zero_one_loss(relaxed.x),
    }
    return RunResult(report, list(trace.rows()), [
        {"step": i + 1, "kappa": k, "feasible": f, "T_min": lo, "T_max": hi}
        for i, (k, f, lo, hi) in enumerate(pttm.trace)
    ])


def dumps_report(report) -> str:
    return json.dumps(report, indent=2, sort_keys=True) + "\n"


def rows_to_csv(rows) -> str:
    buf = io.StringIO()
    if rows:
        w = csv.DictWriter(buf, fieldnames=list(rows[0]), lineterminator="\n")
        w.writeheader()
        for r in rows:
            w.writerow({k: (repr(float(v)) if isinstance(v, float) else v) for k, v in r.items()})
    return buf.getvalue()


# ---------------------------------------------------------------- sweep


SWEEP_PARAMS = ("rho", "P_sum", "T", "beta")


def sweep_cell(config: ScenarioConfig, param, value, seed, sampler="fdc", synthetic=None):
    """One (grid value, seed) run; errors are recorded rather than raised."""
    cfg = config.reseeded(seed)
    cfg = cfg.replace(**{param: (value,) * cfg.K if param == "rho" else value})
    row = {"param": param, "value": float(value), "seed": seed}
    start = time.perf_counter()
    try:
        datasets = (synthetic or SyntheticSpec()).generate(cfg)
        pilots = sample_pilots(datasets, cfg, sampler)
        row["mse"] = loss_prediction_mse(datasets, pilots)
        res = run_pipeline(cfg, datasets=datasets, sampler=sampler)
        rep = res.report
        x = np.asarray(rep["allocation"]["x"])
        sizes = np.asarray(cfg.D_sizes, dtype=float)
        pilot_sizes = np.asarray(rep["pilot_sizes"], dtype=float)
        V = np.asarray(cfg.V)
        row["objective"] = rep["allocation"]["objective"]
        row["data_volume_bits"] = float(V @ pilot_sizes + (V * (sizes - pilot_sizes)) @ x)
        row["zero_one_loss"] = rep["zero_one_loss"]
        row["error"] = ""
    except StageError as exc:
        row.update(mse=float("nan"), objective=float("nan"), data_volume_bits=float("nan"),
                   zero_one_loss=float("nan"), error=str(exc))
    row["runtime_s"] = time.perf_counter() - start
    return row


def summarize(rows, metrics=("mse", "objective", "data_volume_bits", "zero_one_loss", "runtime_s")):
    """Median and quartiles of each metric per grid value, in grid order."""
    out = []
    values = list(dict.fromkeys(r["value"] for r in rows))
    for v in values:
        cell = [r for r in rows if r["value"] == v]
        for stat, q in (("q1", 25), ("median", 50), ("q3", 75)):
            entry = {"param": cell[0]["param"], "value": v, "stat": stat}
            for m in metrics:
                vals = np.array([r[m] for r in cell], dtype=float)
                vals = vals[np.isfinite(vals)]
                entry[m] = float(np.percentile(vals, q)) if vals.size else float("nan")
            out.append(entry)
    return out


def sweep(config: ScenarioConfig, param, grid, seeds, **kw):
    if param not in SWEEP_PARAMS:
        raise ValueError(f"sweep parameter must be one of {SWEEP_PARAMS}")
    if not grid:
        raise ValueError("empty grid")
    rows = [sweep_cell(config, param, v, s, **kw) for v in grid for s in seeds]
    return rows, summarize(rows)


# ---------------------------------------------------------------- argparse


def _load_config(args) -> ScenarioConfig:
    path = args.scenario or default_scenario_path()
    cfg = load_scenario(path)
    if args.seed is not None:
        cfg = cfg.reseeded(args.seed)
    return cfg


def _gains(args, cfg):
    return load_gains(args.gains) if getattr(args, "gains", None) else channel_gains(cfg)


def _write(out, name, text):
    if out is None:
        sys.stdout.write(text)
        return
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    (out / name).write_text(text, encoding="utf-8")


def _datasets(args, cfg):
    if getattr(args, "manifest", None):
        return load_manifest(args.manifest)
    return _synthetic(args).generate(cfg)


def _synthetic(args):
    return SyntheticSpec(args.clusters, args.noise, args.layout, args.jitter)


def _pi_and_eta(args, cfg, H):
    means = load_loss_manifest(args.losses, cfg)
    pi_tilde = np.asarray(cfg.D_sizes, dtype=float) * means
    if args.T0 is not None:
        T0 = args.T0
    else:
        T0 = _stage("pttm", pttm_bisect, H, cfg, cfg.pilot_sizes).T0_star
    eta = _stage("pamm", eta_targets, cfg, T0, cfg.pilot_sizes)
    return pi_tilde, eta, T0


def cmd_pipeline(args):
    cfg = _load_config(args)
    H = load_gains(args.gains) if args.gains else None
    if args.losses:
        res = run_pipeline(cfg, loss_means=load_loss_manifest(args.losses, cfg), H=H)
    else:
        res = run_pipeline(cfg, datasets=_datasets(args, cfg), H=H,
                           sampler=args.sampler, feature_mode=args.features)
    _write(args.out, "report.json", dumps_report(res.report))
    if args.out:
        _write(args.out, "pamm_trace.csv", rows_to_csv(res.pamm_trace))
        _write(args.out, "pttm_trace.csv", rows_to_csv(res.pttm_trace))
    return EXIT_OK


def cmd_fdc(args):
    cfg = _load_config(args)
    if args.rho is not None:
        cfg = cfg.replace(rho=(args.rho,) * cfg.K)
    datasets = _stage("data", _datasets, args, cfg)
    pilots = _stage("sampling", sample_pilots, datasets, cfg, args.sampler, None, args.features)
    pred, true = predicted_losses(datasets, pilots)
    rows = [
        {"client": k + 1, "pilot_size": len(p), "predicted": float(pred[k]), "true": float(true[k]),
         "pilot": " ".join(str(int(i)) for i in p)}
        for k, p in enumerate(pilots)
    ]
    _write(args.out, "fdc.csv", rows_to_csv(rows))
    return EXIT_OK


def cmd_pttm(args):
    cfg = _load_config(args)
    H = _stage("channel", _gains, args, cfg)
    res = _stage("pttm", pttm_bisect, H, cfg, cfg.pilot_sizes)
    report = {
        "T0_star": res.T0_star,
        "pilot_power": _floats(res.p_pilot),
        "equal_power_time": equal_power_pilot_time(H, cfg, cfg.pilot_sizes),
        "bisection_steps": len(res.trace),
    }
    _write(args.out, "pttm.json", dumps_report(report))
    return EXIT_OK


def cmd_jcspc(args):
    cfg = _load_config(args)
    H = _stage("channel", _gains, args, cfg)
    pi_tilde, eta, T0 = _pi_and_eta(args, cfg, H)
    problem = JcspcProblem.from_config(H, cfg, pi_tilde, eta)
    alloc, relaxed, trace = _stage("pamm", solve_jcspc, problem, not args.no_fill)
    report = {"T0": T0, "eta": _floats(eta), "relaxed_x": _floats(relaxed.x),
              "allocation": alloc.as_dict(), "certificate": alloc.info["certificate"]}
    _write(args.out, "jcspc.json", dumps_report(report))
    if args.out:
        _write(args.out, "pamm_trace.csv", rows_to_csv(list(trace.rows())))
    return EXIT_OK


def cmd_oracle(args):
    cfg = _load_config(args)
    H = _stage("channel", _gains, args, cfg)
    pi_tilde, eta, _ = _pi_and_eta(args, cfg, H)
    _, _, rows = _stage("oracle", brute_force_p2, H, pi_tilde, eta, cfg)
    table = [
        {"selection": "".join(str(s) for s in r.selection), "feasible": int(r.feasible),
         "objective": r.objective, "total_power": r.total_power}
        for r in rows
    ]
    _write(args.out, "oracle.csv", rows_to_csv(table))
    return EXIT_OK


def cmd_baseline(args):
    cfg = _load_config(args)
    H = _stage("channel", _gains, args, cfg)
    pi_tilde, eta, _ = _pi_and_eta(args, cfg, H)
    schemes = {
        "max_rate": lambda: max_rate_baseline(H, cfg, eta, pi_tilde),
        "fairness": lambda: fairness_baseline(H, cfg, eta, pi_tilde),
        "active_learning": lambda: active_learning_baseline(pi_tilde, H, cfg, eta),
    }
    names = list(schemes) if args.scheme == "all" else [args.scheme]
    rows = []
    for name in names:
        a = schemes[name]()
        rows.append({"scheme": name, "objective": a.objective, "feasible": int(a.feasible),
                     "selected": " ".join(str(k + 1) for k in a.selected()),
                     "p": " ".join(repr(float(v)) for v in a.p)})
    _write(args.out, "baselines.csv", rows_to_csv(rows))
    return EXIT_OK


def cmd_sweep(args):
    cfg = _load_config(args)
    grid = [float(v) for v in args.grid.split(",") if v.strip()]
    rows, summary = sweep(cfg, args.param, grid, range(args.seeds),
                          sampler=args.sampler, synthetic=_synthetic(args))
    _write(args.out, "sweep_cells.csv", rows_to_csv(rows))
    if args.out:
        _write(args.out, "sweep_summary.csv", rows_to_csv(summary))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="sttgs", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p, data=False, losses=False):
        p.add_argument("--scenario", help="scenario file (default: packaged default setup)")
        p.add_argument("--seed", type=int, help="override the scenario seed")
        p.add_argument("--out", help="output directory (default: print to stdout)")
        p.add_argument("--gains", help="gain matrix text file instead of a channel draw")
        if data:
            p.add_argument("--manifest", help="JSON dataset manifest")
            d = SyntheticSpec()
            p.add_argument("--clusters", type=int, default=d.cluster_count,
                           help="synthetic prototypes per client")
            p.add_argument("--noise", type=float, default=d.noise, help="synthetic per-pixel noise")
            p.add_argument("--layout", choices=("path", "clusters"), default=d.layout,
                           help="synthetic prototype arrangement")
            p.add_argument("--jitter", type=float, default=d.loss_jitter,
                           help="synthetic view-specific loss spread")
            p.add_argument("--sampler", choices=SAMPLERS, default="fdc")
            p.add_argument("--features", choices=FEATURE_MODES, default="pixels")
        if losses:
            p.add_argument("--losses", required=True, help="JSON loss manifest")
            p.add_argument("--T0", type=float, help="pilot time (default: run PTTM)")

    p = sub.add_parser("pipeline", help="full sampling-to-selection run")
    common(p, data=True)
    p.add_argument("--losses", help="JSON loss manifest used instead of sampling")
    p.set_defaults(func=cmd_pipeline)

    p = sub.add_parser("fdc", help="pilot sampling and loss prediction")
    common(p, data=True)
    p.add_argument("--rho", type=float, help="pilot ratio for every client")
    p.set_defaults(func=cmd_fdc)

    p = sub.add_parser("pttm", help="minimal pilot transmission time")
    common(p)
    p.set_defaults(func=cmd_pttm)

    p = sub.add_parser("jcspc", help="client selection and power control")
    common(p, losses=True)
    p.add_argument("--no-fill", action="store_true", help="skip the greedy fill after repair")
    p.set_defaults(func=cmd_jcspc)

    p = sub.add_parser("oracle", help="exhaustive subset table")
    common(p, losses=True)
    p.set_defaults(func=cmd_oracle)

    p = sub.add_parser("baseline", help="comparison schedulers")
    common(p, losses=True)
    p.add_argument("--scheme", choices=("max_rate", "fairness", "active_learning", "all"), default="all")
    p.set_defaults(func=cmd_baseline)

    p = sub.add_parser("sweep", help="parameter sweep over seeds")
    common(p, data=True)
    p.add_argument("--param", choices=SWEEP_PARAMS, required=True)
    p.add_argument("--grid", required=True, help="comma-separated values")
    p.add_argument("--seeds", type=int, default=10)
    p.set_defaults(func=cmd_sweep)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except StageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE if exc.infeasible else EXIT_INPUT
    except (ScenarioError, ValueError, OSError, KeyError) as exc:
        print(f"error: input: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
