"""Minimal pilot time against the equal-power pilot time, per seed."""

import argparse
import sys

import numpy as np

from sttgs.cli import channel_gains, rows_to_csv
from sttgs.pttm import equal_power_pilot_time, pttm_bisect
from sttgs.scenario import default_scenario_path, load_scenario


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--seeds", type=int, default=100)
    ap.add_argument("--noise-dbm", type=int, choices=(-100, -120), default=-100)
    args = ap.parse_args(argv)
    base = load_scenario(default_scenario_path(args.noise_dbm))
    rows = []
    for seed in range(args.seeds):
        cfg = base.reseeded(seed)
        H = channel_gains(cfg)
        res = pttm_bisect(H, cfg, cfg.pilot_sizes)
        rows.append({
            "seed": seed,
            "T0_star": res.T0_star,
            "equal_power": equal_power_pilot_time(H, cfg, cfg.pilot_sizes),
            "pilot_power_sum": float(np.sum(res.p_pilot)),
            "steps": len(res.trace),
        })
    sys.stdout.write(rows_to_csv(rows))


if __name__ == "__main__":
    main()
