"""Selected clients and objective of every scheduler on one scenario."""

import argparse
import sys

import numpy as np

from budget_sweep import schedulers
from sttgs.cli import channel_gains, rows_to_csv
from sttgs.pamm import eta_targets
from sttgs.pttm import pttm_bisect
from sttgs.scenario import default_scenario_path, load_loss_manifest, load_scenario, reference_losses_path


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args(argv)
    cfg = load_scenario(default_scenario_path()).reseeded(args.seed)
    pi = np.asarray(cfg.D_sizes) * load_loss_manifest(reference_losses_path(), cfg)
    H = channel_gains(cfg)
    eta = eta_targets(cfg, pttm_bisect(H, cfg, cfg.pilot_sizes).T0_star, cfg.pilot_sizes)
    rows = [
        {"scheme": name, "objective": alloc.objective, "feasible": int(alloc.feasible),
         "selected": " ".join(str(k + 1) for k in alloc.selected()),
         "total_power": float(np.sum(alloc.p))}
        for name, alloc in schedulers(H, cfg, pi, eta)
    ]
    sys.stdout.write(rows_to_csv(rows))


if __name__ == "__main__":
    main()
