"""Outer-iteration trace of the relaxed selection solver on one scenario."""

import argparse
import sys

import numpy as np

from sttgs.cli import channel_gains, rows_to_csv
from sttgs.pamm import JcspcProblem, eta_targets, pamm_solve
from sttgs.pttm import pttm_bisect
from sttgs.scenario import default_scenario_path, load_loss_manifest, load_scenario, reference_losses_path


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--beta", type=float, default=0.1)
    args = ap.parse_args(argv)
    cfg = load_scenario(default_scenario_path()).reseeded(args.seed)
    pi = np.asarray(cfg.D_sizes) * load_loss_manifest(reference_losses_path(), cfg)
    H = channel_gains(cfg)
    T0 = pttm_bisect(H, cfg, cfg.pilot_sizes).T0_star
    eta = eta_targets(cfg, T0, cfg.pilot_sizes)
    _, trace = pamm_solve(JcspcProblem.from_config(H, cfg, pi, eta, beta=args.beta))
    sys.stdout.write(rows_to_csv(list(trace.rows())))


if __name__ == "__main__":
    main()
