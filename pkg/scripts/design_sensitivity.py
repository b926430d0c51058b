"""How the trial design and the empty-stratum policy move the small-sample bias.

Runs a few size pairs under each combination and prints bias and RMSE for
both trapdoor values.
"""

import argparse
import os

from causalfuse import library, scmsim

DESIGNS = {
    "treat-all/after": scmsim.RctDesign(p_treat=1.0),
    "treat-all/before": scmsim.RctDesign(p_treat=1.0, count_after_selection=False),
    "balanced/after": scmsim.RctDesign(p_treat=0.5),
    "treat-all/unselected": scmsim.RctDesign(p_treat=1.0, apply_selection=False),
}


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--replications", type=int, default=2000)
    ap.add_argument("--workers", type=int, default=os.cpu_count() or 1)
    args = ap.parse_args()
    scm = scmsim.gene_therapy_scm()
    expr = library.formula("gene_therapy")
    truth = scmsim.oracle(scm, {"X": 1}).prob({"Y": 1})
    for label, design in DESIGNS.items():
        for policy in ("zero", "skip"):
            for rct, survey in [(100, 50), (200, 1000), (1000, 10000)]:
                cells = []
                for z2 in (1, 0):
                    sc = scmsim.SimScenario(rct, survey, args.replications, z2, design=design)
                    r = scmsim.run_scenario(scm, sc, expr, truth, policy=policy, workers=args.workers)
                    cells.append(r)
                print(
                    f"{label:22} {policy:5} {rct:5} {survey:6}  "
                    f"bias {cells[0].bias:+.3f} {cells[1].bias:+.3f}  rmse {cells[0].rmse:.3f} {cells[1].rmse:.3f}",
                    flush=True,
                )


if __name__ == "__main__":
    main()
