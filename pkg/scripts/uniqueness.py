"""Solve from several initial guesses and report how far apart the equilibria end up.

Usage: python3 scripts/uniqueness.py [--lambdas 2,20,80] [--inits 3] [--seed 0]
"""

import argparse

from mfg_lambda.model import reference_spec
from mfg_lambda.verify import uniqueness_probe


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--lambdas", default="2,20,80")
    ap.add_argument("--inits", type=int, default=3)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()
    base = reference_spec(40.0)
    for lam in (float(v) for v in args.lambdas.split(",")):
        report = uniqueness_probe(base, lam, n_inits=args.inits, seed=args.seed)
        print(f"lambda={lam:g}: converged={report.all_converged}, max d1 {report.max_d1:.2e}, "
              f"max |lambda Du gap| {report.max_du:.2e}")
        for run in report.runs:
            print(f"    {run.label:>12}: {run.iterations:3d} iterations, residual ratio {run.contraction_ratio:.3f}")
        if report.stability is not None:
            fit = report.stability
            print(f"    stability fit K={fit.K_emp:.3g}, eta={fit.eta_emp:.3g}, "
                  f"max violation {fit.max_violation:.1e} over {fit.n_pairs} pairs")


if __name__ == "__main__":
    main()
