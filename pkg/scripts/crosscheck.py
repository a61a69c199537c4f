"""Compare the solver's u and lambda Du with their integral representations at two resolutions.

Usage: python3 scripts/crosscheck.py [--lambda 40]
"""

import argparse

from mfg_lambda.equilibrium import solve_mfg_finite_horizon
from mfg_lambda.model import reference_spec
from mfg_lambda.verify import check_duhamel_u, check_rep_lambda_du


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--lambda", dest="lam", type=float, default=40.0)
    args = ap.parse_args()
    results = []
    for spec in (reference_spec(args.lam), reference_spec(args.lam).refined()):
        sol = solve_mfg_finite_horizon(spec)
        duhamel, rep = check_duhamel_u(sol, spec), check_rep_lambda_du(sol, spec)
        results.append((duhamel, rep))
        print(f"N={spec.grid_points:4d} dt={spec.dt:.1e}: Duhamel residual {duhamel:.3e}, "
              f"lambda Du discrepancy {rep:.3e}")
    (d0, r0), (d1, r1) = results
    print(f"refinement ratios: Duhamel x{d0 / d1:.2f}, lambda Du x{r0 / r1:.2f}")


if __name__ == "__main__":
    main()
