"""Run the claim experiments and write per-run edge reports.

    python3 scripts/run_claims.py --out runs/claims
"""

import argparse
from pathlib import Path

from ntksep.gd import claim31_experiment, claim51_experiment, write_edge_reports
from ntksep.problems import bsp_supports, lp_supports


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", default="runs/claims")
    ap.add_argument("--n", type=int, default=8)
    ap.add_argument("--k", type=int, default=3)
    ap.add_argument("--alpha", type=float, nargs="+", default=[0.1, 0.5])
    ap.add_argument("--lp-alpha", type=float, nargs="+", default=[0.05, 0.1, 0.2])
    args = ap.parse_args()
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    bsp = [r for a in args.alpha for I in bsp_supports(args.n, args.k)
           for r in claim31_experiment(args.n, args.k, a, I)]
    write_edge_reports(out / "bsp_one_step.csv", bsp)
    lp = [r for a in args.lp_alpha for I in lp_supports(args.n)
          for r in claim51_experiment(args.n, a, I)]
    write_edge_reports(out / "lp_one_step.csv", lp)
    for name, reps in (("biased sparse parity", bsp), ("leaky parity", lp)):
        bad = sum(not r.verdict for r in reps)
        print(f"{name}: {len(reps)} runs, {bad} failing, worst loss {max(r.loss for r in reps):.3g}")


if __name__ == "__main__":
    main()
