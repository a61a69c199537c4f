"""Command-line driver: ``mfg-lambda <subcommand> <config.json> [options]``.

The config holds the problem keys (``lambda``, ``nu``, ``grid_points``, ``dt``,
``horizon``, ``hamiltonian``, ``coupling``, ``m0``) plus optional ``solver`` and
``experiments`` blocks. Command-line flags override config values.

Exit codes: 0 success, 1 solver failure, 2 configuration error (including CFL).
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import asdict
from pathlib import Path

from . import reporting
from .equilibrium import (
    MaxDoublings,
    MaxIterationsExceeded,
    SolverConfig,
    solve_limit_mckean_vlasov,
    solve_mfg_finite_horizon,
)
from .fokker_planck import SchemeError, drift_from_u, heat_flow
from .grid import Trajectory
from .metrics import grid_quantiles, wasserstein1_particles
from .model import ConfigError, ProblemSpec, validate_assumptions
from .particles import simulate_particles
from .verify import (
    check_duhamel_u,
    convergence_rate_experiment,
    limit_consistency_experiment,
    rep_lambda_du_table,
    uniqueness_probe,
)

log = logging.getLogger("mfg_lambda")

PROBLEM_KEYS = {"hamiltonian", "coupling", "lambda", "nu", "m0", "grid_points", "dt", "horizon"}
DEFAULT_LAMBDAS = [10.0, 20.0, 40.0, 80.0, 160.0]


class RunConfig:
    def __init__(self, spec: ProblemSpec, solver: SolverConfig, experiments: dict, raw: dict):
        self.spec = spec
        self.solver = solver
        self.experiments = experiments
        self.raw = raw

    def block(self, name: str) -> dict:
        return dict(self.experiments.get(name, {}))


def load_config(path: str, overrides: dict | None = None) -> RunConfig:
    try:
        raw = json.loads(Path(path).read_text())
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"invalid JSON in {path}: {exc}") from None
    if not isinstance(raw, dict):
        raise ConfigError("config must be a JSON object")
    unknown = set(raw) - PROBLEM_KEYS - {"solver", "experiments"}
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    problem = {k: v for k, v in raw.items() if k in PROBLEM_KEYS}
    for key, value in (overrides or {}).items():
        if value is not None:
            problem[key] = value
    spec = ProblemSpec.from_dict(problem)
    try:
        solver = SolverConfig.from_dict(raw.get("solver"))
    except TypeError as exc:
        raise ConfigError(f"bad solver block: {exc}") from None
    experiments = raw.get("experiments", {})
    if not isinstance(experiments, dict):
        raise ConfigError("experiments must be a JSON object")
    return RunConfig(spec, solver, experiments, raw)


def _float_list(text: str) -> list[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _manifest(cmd: str, cfg: RunConfig, **extra) -> dict:
    return {"command": cmd, "spec": cfg.spec.to_dict(), "solver": asdict(cfg.solver), **extra}


def _out_dir(args) -> Path:
    out = Path(args.out or Path("runs") / args.command)
    out.mkdir(parents=True, exist_ok=True)
    return out


# --- subcommands ---------------------------------------------------------------


def cmd_validate(args, cfg: RunConfig) -> int:
    block = cfg.block("validate")
    samples = args.samples or int(block.get("samples", 1000))
    seed = args.seed if args.seed is not None else int(block.get("seed", 0))
    report = validate_assumptions(cfg.spec, samples, seed)
    out = _out_dir(args)
    reporting.write_manifest(out / "report.json", report.to_dict())
    reporting.write_manifest(out / "manifest.json", _manifest("validate", cfg, seed=seed, passed=report.ok))
    print(json.dumps({"ok": report.ok, "violations": report.violations, "cfl_number": report.cfl_number}))
    return 0 if report.ok else 2


def cmd_solve(args, cfg: RunConfig) -> int:
    cfg.spec.check_cfl()
    sol = solve_mfg_finite_horizon(cfg.spec, config=cfg.solver)
    out = _out_dir(args)
    sol.save(out)
    reporting.write_manifest(out / "manifest.json", _manifest(
        "solve", cfg, iterations=sol.iterations, final_residual=sol.final_residual))
    print(f"converged in {sol.iterations} iterations, residual {sol.final_residual:.3e}; wrote {out}")
    return 0


def cmd_limit(args, cfg: RunConfig) -> int:
    cfg.spec.check_cfl()
    tau = args.tau if args.tau is not None else float(cfg.block("limit").get("tau", cfg.spec.horizon))
    m = solve_limit_mckean_vlasov(cfg.spec, tau)
    out = _out_dir(args)
    m.to_csv(out / "m_limit.csv")
    reporting.write_manifest(out / "manifest.json", _manifest("limit", cfg, tau=tau))
    print(f"limit dynamics on [0, {tau}] written to {out / 'm_limit.csv'}")
    return 0


def _sweep_params(args, cfg: RunConfig, name: str):
    block = cfg.block(name)
    lambdas = args.lambdas or [float(v) for v in block.get("lambdas", DEFAULT_LAMBDAS)]
    tau = args.tau if args.tau is not None else float(block.get("tau", 1.0))
    return sorted(lambdas), tau


def cmd_rate(args, cfg: RunConfig) -> int:
    cfg.spec.check_cfl()
    lambdas, tau = _sweep_params(args, cfg, "rate")
    floor_spec = cfg.spec.refined() if args.floor else None
    table = convergence_rate_experiment(cfg.spec, lambdas, tau, cfg.solver, floor_spec=floor_spec)
    out = _out_dir(args)
    reporting.write_table(out / "rate.csv", ["lambda", "error"], table.rows())
    (out / "rate.svg").write_text(reporting.loglog_svg(
        table.lambdas, table.errors, table.fitted_slope, "sup |lambda Du - D_xF|", ylabel="e(lambda)"))
    passed = table.strictly_decreasing and table.fitted_slope <= -0.4 and not table.failures
    reporting.write_manifest(out / "manifest.json", _manifest(
        "rate", cfg, lambdas=lambdas, tau=tau, fitted_slope=table.fitted_slope, floor=table.floor,
        strictly_decreasing=table.strictly_decreasing, failures=table.failures,
        tolerances={"fitted_slope_max": -0.4}, passed=passed))
    print(f"fitted slope {table.fitted_slope:.4f}; wrote {out}")
    return 0 if not table.failures else 1


def cmd_consistency(args, cfg: RunConfig) -> int:
    cfg.spec.check_cfl()
    lambdas, tau = _sweep_params(args, cfg, "consistency")
    table = limit_consistency_experiment(cfg.spec, lambdas, tau, cfg.solver)
    out = _out_dir(args)
    reporting.write_table(out / "consistency.csv", ["lambda", "sup_d1_gap"], table.rows())
    reporting.write_manifest(out / "manifest.json", _manifest(
        "consistency", cfg, lambdas=lambdas, tau=tau, strictly_decreasing=table.strictly_decreasing,
        failures=table.failures, passed=table.strictly_decreasing and not table.failures))
    print(f"gaps {['%.3e' % g for g in table.gaps]}; wrote {out}")
    return 0 if not table.failures else 1


def cmd_unique(args, cfg: RunConfig) -> int:
    cfg.spec.check_cfl()
    block = cfg.block("unique")
    lam = args.lam_probe if args.lam_probe is not None else float(block.get("lambda", cfg.spec.lam))
    inits = args.inits or int(block.get("inits", 3))
    seed = args.seed if args.seed is not None else int(block.get("seed", 0))
    report = uniqueness_probe(cfg.spec, lam, inits, seed, cfg.solver)
    out = _out_dir(args)
    reporting.write_manifest(out / "unique.json", report.to_dict())
    rows = [(a, b, report.pairwise_d1[(a, b)], report.pairwise_du[(a, b)]) for a, b in sorted(report.pairwise_d1)]
    reporting.write_table(out / "pairwise.csv", ["init_a", "init_b", "sup_d1", "sup_lambda_du"], rows)
    reporting.write_manifest(out / "manifest.json", _manifest(
        "unique", cfg, probe_lambda=lam, inits=inits, seed=seed, all_converged=report.all_converged,
        max_d1=report.max_d1, max_lambda_du=report.max_du))
    status = "all converged" if report.all_converged else "some runs did not converge"
    print(f"lambda={lam}: {status}; max d1 {report.max_d1:.3e}, max |lambda Du gap| {report.max_du:.3e}")
    return 0


def cmd_crosscheck(args, cfg: RunConfig) -> int:
    cfg.spec.check_cfl()
    sol = solve_mfg_finite_horizon(cfg.spec, config=cfg.solver)
    duhamel = check_duhamel_u(sol, cfg.spec)
    table = rep_lambda_du_table(sol, cfg.spec)
    rep = max(p.error for p in table)
    out = _out_dir(args)
    reporting.write_table(out / "crosscheck.csv", ["x_index", "t", "lambda_du_solver", "representation", "error"],
                          [(p.x_index, p.t, p.lhs, p.rhs, p.error) for p in table])
    reporting.write_manifest(out / "manifest.json", _manifest(
        "crosscheck", cfg, duhamel_residual=duhamel, lambda_du_discrepancy=rep,
        tolerances={"duhamel": 5e-3, "lambda_du": 1e-2}, passed=duhamel <= 5e-3 and rep <= 1e-2))
    print(f"Duhamel residual {duhamel:.3e}, lambda Du discrepancy {rep:.3e}")
    return 0


def cmd_particles(args, cfg: RunConfig) -> int:
    cfg.spec.check_cfl()
    block = cfg.block("particles")
    n = args.n or int(block.get("n", 100_000))
    seed = args.seed if args.seed is not None else int(block.get("seed", 0))
    t1 = args.t1 if args.t1 is not None else float(block.get("t1", 0.5))
    mode = args.mode or block.get("mode", "equilibrium")
    spec = cfg.spec
    if mode == "heat":
        drift = None
        m_ref = heat_flow(spec.m0, spec, t1)
    elif mode == "equilibrium":
        sol = solve_mfg_finite_horizon(spec, config=cfg.solver)
        drift = Trajectory(0.0, spec.dt, drift_from_u(sol.u_traj.frames, spec))
        m_ref = sol.m_traj
    else:
        raise ConfigError(f"unknown particle mode {mode!r}")
    every = max(1, int(round(0.1 / spec.dt)))
    ensembles = simulate_particles(drift, spec.m0, n, seed, spec, t1, save_every=every)
    rows = [(e.time, wasserstein1_particles(e.positions, grid_quantiles(m_ref.at(e.time), n))) for e in ensembles]
    out = _out_dir(args)
    reporting.write_table(out / "particles.csv", ["t", "d1_particles_vs_grid"], rows)
    reporting.write_manifest(out / "manifest.json", _manifest(
        "particles", cfg, n_particles=n, seed=seed, t1=t1, mode=mode, final_d1=rows[-1][1]))
    print(f"d1(particles, grid) at t={t1}: {rows[-1][1]:.3e}")
    return 0


COMMANDS = {
    "validate": cmd_validate, "solve": cmd_solve, "limit": cmd_limit, "rate": cmd_rate,
    "consistency": cmd_consistency, "unique": cmd_unique, "crosscheck": cmd_crosscheck,
    "particles": cmd_particles,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="mfg-lambda", description="Discounted mean field games on the circle.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("config")
        p.add_argument("--out", help="run directory (default runs/<command>)")
        p.add_argument("--nu", type=float)
        p.add_argument("--dt", type=float)
        p.add_argument("--horizon", type=float)
        p.add_argument("--grid-points", type=int)
        if name == "unique":
            p.add_argument("--lambda", dest="lam_probe", type=float)
            p.add_argument("--inits", type=int)
        else:
            p.add_argument("--lambda", dest="lam", type=float)
        if name in ("validate", "unique", "particles"):
            p.add_argument("--seed", type=int)
        if name == "validate":
            p.add_argument("--samples", type=int)
        if name in ("rate", "consistency", "limit"):
            p.add_argument("--tau", type=float)
        if name in ("rate", "consistency"):
            p.add_argument("--lambdas", type=_float_list)
        if name == "rate":
            p.add_argument("--floor", action="store_true", help="re-solve the largest lambda on a refined grid")
        if name == "particles":
            p.add_argument("--n", type=int)
            p.add_argument("--t1", type=float)
            p.add_argument("--mode", choices=["equilibrium", "heat"])
    return parser


def run(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    overrides = {
        "lambda": getattr(args, "lam", None),
        "nu": args.nu,
        "dt": args.dt,
        "horizon": args.horizon,
        "grid_points": args.grid_points,
    }
    try:
        cfg = load_config(args.config, overrides)
        return COMMANDS[args.command](args, cfg)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (MaxIterationsExceeded, MaxDoublings, SchemeError) as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return 1


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
