"""Zero-one loss of the relaxed selection and repaired objective over beta."""

import argparse
import sys

import numpy as np

from sttgs.cli import channel_gains, rows_to_csv
from sttgs.pamm import JcspcProblem, eta_targets, solve_jcspc
from sttgs.pttm import pttm_bisect
from sttgs.scenario import default_scenario_path, load_loss_manifest, load_scenario, reference_losses_path


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--beta", default="0.01,0.1,1,10")
    ap.add_argument("--seeds", type=int, default=20)
    args = ap.parse_args(argv)
    base = load_scenario(default_scenario_path())
    pi = np.asarray(base.D_sizes) * load_loss_manifest(reference_losses_path(), base)
    rows = []
    for beta in (float(v) for v in args.beta.split(",")):
        z1, obj = [], []
        for seed in range(args.seeds):
            cfg = base.reseeded(seed)
            H = channel_gains(cfg)
            eta = eta_targets(cfg, pttm_bisect(H, cfg, cfg.pilot_sizes).T0_star, cfg.pilot_sizes)
            alloc, _, trace = solve_jcspc(JcspcProblem.from_config(H, cfg, pi, eta, beta=beta))
            z1.append(trace.zero_one[-1])
            obj.append(alloc.objective)
        rows.append({"beta": beta, "median_zero_one": float(np.median(z1)),
                     "max_zero_one": float(np.max(z1)), "median_objective": float(np.median(obj))})
    sys.stdout.write(rows_to_csv(rows))


if __name__ == "__main__":
    main()
