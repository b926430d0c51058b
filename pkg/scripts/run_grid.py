"""Run the bias/RMSE sweep and print it next to the reference table.

    python scripts/run_grid.py [--scenarios scenarios/full_grid.ini] [--workers 4] [--out results.csv]
"""

import argparse
import dataclasses
import os
import time

from causalfuse import library, scmsim

# RCT, survey -> bias Z2=1, bias Z2=0, rmse Z2=1, rmse Z2=0 (20000 replications)
REFERENCE = {
    (100, 50): (-0.009, -0.070, 0.092, 0.173),
    (100, 100): (-0.009, -0.064, 0.086, 0.165),
    (100, 200): (-0.009, -0.063, 0.083, 0.159),
    (100, 1000): (-0.008, -0.062, 0.082, 0.154),
    (100, 10000): (-0.009, -0.063, 0.081, 0.155),
    (200, 50): (-0.001, -0.043, 0.066, 0.157),
    (200, 100): (-0.001, -0.033, 0.060, 0.148),
    (200, 200): (0.000, -0.031, 0.058, 0.144),
    (200, 1000): (-0.001, -0.032, 0.055, 0.140),
    (200, 10000): (-0.001, -0.032, 0.054, 0.139),
    (400, 50): (-0.000, -0.022, 0.052, 0.122),
    (400, 100): (0.000, -0.008, 0.045, 0.113),
    (400, 200): (0.000, -0.007, 0.041, 0.107),
    (400, 1000): (-0.000, -0.007, 0.038, 0.104),
    (400, 10000): (0.000, -0.006, 0.037, 0.103),
    (1000, 50): (-0.000, -0.015, 0.042, 0.085),
    (1000, 100): (-0.000, -0.001, 0.034, 0.070),
    (1000, 200): (-0.000, -0.000, 0.029, 0.064),
    (1000, 1000): (-0.000, -0.000, 0.024, 0.060),
    (1000, 10000): (0.000, 0.000, 0.023, 0.059),
}


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--scenarios", default=os.path.join(os.path.dirname(__file__), "..", "scenarios", "full_grid.ini"))
    ap.add_argument("--workers", type=int, default=os.cpu_count() or 1)
    ap.add_argument("--replications", type=int)
    ap.add_argument("--out")
    args = ap.parse_args()

    cfg = scmsim.load_sweep(args.scenarios)
    if args.replications:
        cfg = dataclasses.replace(cfg, replications=args.replications)
    t0 = time.time()
    results = scmsim.run_sweep(scmsim.gene_therapy_scm(), cfg, library.formula("gene_therapy"), workers=args.workers)
    header, rows = scmsim.table_rows(results)
    print(f"{'RCT':>5} {'Survey':>6} | {'bias1':>7} {'bias0':>7} {'rmse1':>6} {'rmse0':>6} | reference")
    for row in rows:
        ref = REFERENCE.get((row[0], row[1]))
        ours = " ".join(f"{x:7.3f}" for x in row[2:4]) + " " + " ".join(f"{x:6.3f}" for x in row[4:6])
        refs = " ".join(f"{x:6.3f}" for x in ref) if ref else ""
        print(f"{row[0]:>5} {row[1]:>6} | {ours} | {refs}")
    print(f"{cfg.replications} replications per cell, policy={cfg.policy}, {time.time() - t0:.0f}s")
    if args.out:
        scmsim.write_table(results, args.out)


if __name__ == "__main__":
    main()
