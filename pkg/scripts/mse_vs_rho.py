"""Loss-prediction MSE of FDC, random and uniform sampling over pilot ratios.

Writes one CSV row per (rho, sampler) with the median and quartiles over seeds.
"""

import argparse
import sys

import numpy as np

from sttgs.cli import loss_prediction_mse, rows_to_csv, sample_pilots
from sttgs.scenario import SyntheticSpec, default_scenario_path, load_scenario


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--rho", default="0.02,0.04,0.1,0.2")
    ap.add_argument("--seeds", type=int, default=100)
    args = ap.parse_args(argv)
    rhos = [float(v) for v in args.rho.split(",")]
    base = load_scenario(default_scenario_path())
    samplers = ("fdc", "random", "uniform")
    mse = {(r, s): [] for r in rhos for s in samplers}
    for seed in range(args.seeds):
        cfg = base.reseeded(seed)
        datasets = SyntheticSpec().generate(cfg)
        for r in rhos:
            c = cfg.replace(rho=(r,) * cfg.K)
            for s in samplers:
                mse[r, s].append(loss_prediction_mse(datasets, sample_pilots(datasets, c, s)))
    rows = []
    for (r, s), vals in mse.items():
        q1, med, q3 = np.percentile(vals, [25, 50, 75])
        rows.append({"rho": r, "sampler": s, "q1": q1, "median": med, "q3": q3})
    sys.stdout.write(rows_to_csv(rows))


if __name__ == "__main__":
    main()
