"""Shrink the noise with lambda (nu = nu0 * lambda0 / lambda) and track the limit gap.

Each lambda is compared with the McKean-Vlasov limit run at the same nu, so the
table isolates the lambda effect from the change in diffusion.

Usage: python3 scripts/vanishing_viscosity.py [--nu0 1] [--lambda0 10] [--lambdas 10,20,40,80] [--tau 1]
"""

import argparse

import numpy as np

from mfg_lambda.equilibrium import extend_horizon
from mfg_lambda.fokker_planck import solve_limit_mckean_vlasov
from mfg_lambda.hjb import hjb_diagnostics
from mfg_lambda.metrics import wasserstein1_grid
from mfg_lambda.model import reference_spec


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--nu0", type=float, default=1.0)
    ap.add_argument("--lambda0", type=float, default=10.0)
    ap.add_argument("--lambdas", default="10,20,40,80")
    ap.add_argument("--tau", type=float, default=1.0)
    args = ap.parse_args()
    print(f"{'lambda':>8} {'nu':>8} {'sup d1 gap':>11} {'lam|Du|':>9}")
    for lam in sorted(float(v) for v in args.lambdas.split(",")):
        spec = reference_spec(lam, nu=args.nu0 * args.lambda0 / lam)
        sol = extend_horizon(spec, args.tau)
        m_inf = solve_limit_mckean_vlasov(spec, args.tau)
        gap = float(np.max(wasserstein1_grid(sol.m_traj.frames, m_inf.frames)))
        du = hjb_diagnostics(sol.u_traj, lam).scaled()["lam_sup_Du"]
        print(f"{lam:8g} {spec.nu:8.4f} {gap:11.4f} {du:9.3f}")


if __name__ == "__main__":
    main()
