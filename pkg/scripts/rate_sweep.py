"""Sweep lambda on the reference model and tabulate the rate, limit gap and scaled estimates.

Usage: python3 scripts/rate_sweep.py [--lambdas 10,20,40,80,160] [--tau 1] [--out runs/rate_sweep]
"""

import argparse
from pathlib import Path

from mfg_lambda import reporting
from mfg_lambda.fokker_planck import solve_limit_mckean_vlasov
from mfg_lambda.model import reference_spec
from mfg_lambda.verify import (
    convergence_rate_experiment,
    limit_consistency_experiment,
    scaled_estimates,
    solve_sweep,
)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--lambdas", default="10,20,40,80,160")
    ap.add_argument("--tau", type=float, default=1.0)
    ap.add_argument("--out", default="runs/rate_sweep")
    args = ap.parse_args()
    lambdas = sorted(float(v) for v in args.lambdas.split(","))
    base = reference_spec(lambdas[0])
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    sweep = solve_sweep(base, lambdas, args.tau)
    rate = convergence_rate_experiment(base, lambdas, args.tau, sweep=sweep)
    limit = solve_limit_mckean_vlasov(base, args.tau)
    gaps = limit_consistency_experiment(base, lambdas, args.tau, sweep=sweep, m_limit=limit)
    scaled = scaled_estimates(sweep)

    rows = []
    print(f"{'lambda':>8} {'e(lambda)':>10} {'d1 gap':>10} {'lam|u|':>8} {'lam|Du|':>8} {'lam|D2u|':>9} {'T used':>7}")
    for (lam, err), (_, gap) in zip(rate.rows(), gaps.rows()):
        s = scaled[lam]
        rows.append((lam, err, gap, s["lam_sup_u"], s["lam_sup_Du"], s["lam_sup_D2u"]))
        print(f"{lam:8g} {err:10.4f} {gap:10.4f} {s['lam_sup_u']:8.3f} {s['lam_sup_Du']:8.3f} "
              f"{s['lam_sup_D2u']:9.3f} {sweep.solutions[lam].horizon_used:7g}")
    print(f"fitted slope {rate.fitted_slope:.3f}; e strictly decreasing: {rate.strictly_decreasing}; "
          f"gap strictly decreasing: {gaps.strictly_decreasing}")

    reporting.write_table(out / "sweep.csv",
                          ["lambda", "error", "sup_d1_gap", "lam_sup_u", "lam_sup_Du", "lam_sup_D2u"], rows)
    (out / "rate.svg").write_text(reporting.loglog_svg(rate.lambdas, rate.errors, rate.fitted_slope,
                                                       "sup |lambda Du - D_xF|", ylabel="e(lambda)"))
    print(f"wrote {out}")


if __name__ == "__main__":
    main()
