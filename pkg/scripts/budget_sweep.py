"""Objective and selected-set size of every scheduler over the sum power budget."""

import argparse
import sys

import numpy as np

from sttgs.baselines import active_learning_baseline, fairness_baseline, max_rate_baseline
from sttgs.cli import channel_gains, rows_to_csv
from sttgs.oracle import oracle_allocation
from sttgs.pamm import JcspcProblem, eta_targets, solve_jcspc
from sttgs.pttm import PttmInfeasible, pttm_bisect
from sttgs.scenario import default_scenario_path, load_loss_manifest, load_scenario, reference_losses_path


def schedulers(H, cfg, pi, eta):
    yield "pamm", solve_jcspc(JcspcProblem.from_config(H, cfg, pi, eta))[0]
    yield "oracle", oracle_allocation(H, pi, eta, cfg)
    yield "max_rate", max_rate_baseline(H, cfg, eta, pi)
    yield "fairness", fairness_baseline(H, cfg, eta, pi)
    yield "active_learning", active_learning_baseline(pi, H, cfg, eta)


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--param", choices=("P_sum", "P_max", "T"), default="P_sum")
    ap.add_argument("--grid", default="0.1,0.2,0.3,0.5,1.0")
    ap.add_argument("--seeds", type=int, default=20)
    args = ap.parse_args(argv)
    base = load_scenario(default_scenario_path())
    pi = np.asarray(base.D_sizes) * load_loss_manifest(reference_losses_path(), base)
    rows = []
    for value in (float(v) for v in args.grid.split(",")):
        stats = {}
        for seed in range(args.seeds):
            cfg = base.reseeded(seed).replace(**{args.param: value})
            H = channel_gains(cfg)
            try:
                T0 = pttm_bisect(H, cfg, cfg.pilot_sizes).T0_star
            except PttmInfeasible:
                continue
            eta = eta_targets(cfg, T0, cfg.pilot_sizes)
            for name, alloc in schedulers(H, cfg, pi, eta):
                stats.setdefault(name, []).append((alloc.objective, len(alloc.selected())))
        for name, vals in stats.items():
            obj, size = np.array(vals).T
            rows.append({args.param: value, "scheme": name, "runs": len(vals),
                         "mean_objective": float(obj.mean()), "mean_selected": float(size.mean())})
    sys.stdout.write(rows_to_csv(rows))


if __name__ == "__main__":
    main()
