"""Command-line interface.

    rfl <command> CONFIG [--out DIR] [--seed S] [--set key=value ...]

Commands: ``filter``, ``mse``, ``lfd``, ``oracle``, ``simulate``, ``verify``
and ``report``. Exit codes: 0 success, 1 failed checks, 2 malformed
configuration, 3 violated preconditions, 4 numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .config import Config, apply_overrides, load_config, parse_config
from .errors import ConfigParse, NoConvergence, RFLError, ValidationError
from .filtering import check_solution, solve_filter
from .minimax import lfd_solve, saddle_verify
from .montecarlo import empirical_mse
from .oracle import oracle_solve

log = logging.getLogger("rfl")

COMMANDS = ("filter", "mse", "lfd", "oracle", "simulate", "verify", "report")


# --------------------------------------------------------------------------
# output helpers


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        value = float(obj)
        return value if np.isfinite(value) else str(value)
    return obj


def _envelope(cfg: Config, command: str, body: dict) -> dict:
    return {
        "command": command,
        "config_hash": cfg.digest(),
        "seed": cfg.seed,
        "r_gap_kernel": cfg.solver.r_gap_kernel,
        "tolerances": vars(cfg.tolerances).copy(),
        "version": __version__,
        "timestamp": time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime()),
        "result": body,
    }


def write_json(path: Path, doc: dict) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(_jsonable(doc), sort_keys=True, indent=2) + "\n")


def write_csv(path: Path, header, columns) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in zip(*columns):
            writer.writerow([repr(float(x)) for x in row])


# --------------------------------------------------------------------------
# commands


def cmd_filter(cfg: Config, out: Path, args) -> int:
    problem = cfg.problem()
    f, g = cfg.densities()
    sol = solve_filter(problem, f, g, cfg.filter_options())
    body = {**sol.summary(), "grids": problem.describe(), "checks": check_solution(sol, cfg.filter_options())}
    write_json(out / "filter.json", _envelope(cfg, "filter", body))
    t = problem.target.times
    write_csv(out / "c.csv", ("t", "value"), (t, sol.c.real))
    lam = problem.freq.points
    write_csv(out / "h.csv", ("lambda", "re", "im"), (lam, sol.h.real, sol.h.imag))
    write_csv(out / "v.csv", ("t", "value"), (sol.weights.times, sol.v))
    if getattr(args, "dump_operators", False):
        from .operators import assemble

        system = assemble(sol.f, sol.g, problem.fourier, problem.freq, problem.target.weights,
                          problem.target.active, sol.kernel, problem.target.in_gaps)
        for name in ("B", "R", "Q"):
            np.savetxt(out / f"{name}.csv", getattr(system, name).real, delimiter=",")
    print(f"delta = {sol.delta:.10g} (spectral {sol.delta_spectral:.10g})")
    return 0


def cmd_mse(cfg: Config, out: Path, args) -> int:
    problem = cfg.problem()
    f, g = cfg.densities()
    sol = solve_filter(problem, f, g, cfg.filter_options())
    body = {"delta": sol.delta, "delta_spectral": sol.delta_spectral, "var_a_xi": sol.var_a,
            "horizon": cfg.solver.horizon}
    write_json(out / "mse.json", _envelope(cfg, "mse", body))
    print(f"{sol.delta:.12g}")
    return 0


def _class_override(text):
    if text is None:
        return None
    path = Path(text)
    try:
        return json.loads(path.read_text()) if path.exists() else json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigParse(f"class spec {text!r} is not valid JSON: {exc}") from exc


def cmd_lfd(cfg: Config, out: Path, args) -> int:
    for key, attr in (("f", "class_f"), ("g", "class_g")):
        spec = _class_override(getattr(args, attr, None))
        if spec is not None:
            classes = dict(cfg.classes)
            classes[key] = spec
            data = cfg.to_dict()
            data["classes"] = classes
            cfg = parse_config(data)
    problem = cfg.problem()
    class_f, class_g = cfg.density_classes(problem.freq)
    saddle = lfd_solve(problem, class_f, class_g, cfg.lfd_options())
    report = saddle_verify(saddle, problem, class_f, class_g, cfg.n_density_samples, cfg.n_perturbations,
                           seed=cfg.seed, tol=cfg.tolerances.tol_saddle)
    budget_ok = max(saddle.residuals["budget_f"], saddle.residuals["budget_g"]) <= cfg.tolerances.tol_budget
    body = {"saddle": saddle.summary(), "report": report.to_dict(), "budget_pass": budget_ok,
            "grids": problem.describe()}
    write_json(out / "lfd.json", _envelope(cfg, "lfd", body))
    lam = problem.freq.points
    write_csv(out / "f0.csv", ("lambda", "value"), (lam, saddle.f0))
    write_csv(out / "g0.csv", ("lambda", "value"), (lam, saddle.g0))
    print(f"delta0 = {saddle.delta:.10g} after {saddle.iterations} iterations; saddle {'pass' if report.passed else 'FAIL'}")
    if not saddle.converged:
        raise NoConvergence("least favorable densities did not converge", saddle=saddle)
    return 0 if report.passed and budget_ok else 1


def cmd_oracle(cfg: Config, out: Path, args) -> int:
    problem = cfg.problem()
    f, g = cfg.densities()
    sol = oracle_solve(problem, f, g, cfg.solver.cond_max)
    write_json(out / "oracle.json", _envelope(cfg, "oracle", sol.summary()))
    write_csv(out / "oracle_weights.csv", ("t", "value"), (sol.times, sol.weights))
    print(f"oracle mse = {sol.mse:.10g}")
    return 0


def cmd_simulate(cfg: Config, out: Path, args) -> int:
    problem = cfg.problem()
    f, g = cfg.densities()
    orc = oracle_solve(problem, f, g, cfg.solver.cond_max)
    rep = empirical_mse(orc.weights, problem, f, g, cfg.trials, cfg.seed, reference=orc.mse)
    write_json(out / "simulate.json", _envelope(cfg, "simulate", rep.to_dict()))
    print(f"empirical mse = {rep.mse:.6g} +/- {rep.std_error:.2g} (z = {rep.z_score:.3f})")
    return 0


def run_verify(cfg: Config) -> dict:
    """Dual-form, orthogonality, leakage, oracle and Monte Carlo checks."""
    tol = cfg.tolerances
    problem = cfg.problem()
    f, g = cfg.densities()
    sol = solve_filter(problem, f, g, cfg.filter_options())
    orc = oracle_solve(problem, f, g, cfg.solver.cond_max)
    sim = empirical_mse(orc.weights, problem, f, g, cfg.trials, cfg.seed, reference=orc.mse)
    d = sol.diagnostics
    rel_oracle = abs(sol.delta - orc.mse) / abs(orc.mse) if orc.mse else abs(sol.delta)
    checks = {
        "dual_form": d["dual_form_discrepancy"] <= tol.tol_dual * (1 + abs(sol.delta)),
        "orthogonality": d["orthogonality_residual"] <= tol.tol_orth * d["orthogonality_scale"],
        "subspace_leakage": d["subspace_leakage"] <= tol.tol_leak,
        "oracle_agreement": rel_oracle <= tol.tol_oracle,
        "monte_carlo": sim.z_score is not None and abs(sim.z_score) <= tol.tol_z,
    }
    return {
        "checks": checks,
        "passed": all(checks.values()),
        "delta": sol.delta,
        "delta_spectral": sol.delta_spectral,
        "oracle_mse": orc.mse,
        "oracle_relative_gap": rel_oracle,
        "diagnostics": d,
        "simulation": sim.to_dict(),
        "grids": problem.describe(),
    }


def cmd_verify(cfg: Config, out: Path, args) -> int:
    body = run_verify(cfg)
    write_json(out / "verify.json", _envelope(cfg, "verify", body))
    for name, ok in body["checks"].items():
        print(f"{'PASS' if ok else 'FAIL'} {name}")
    return 0 if body["passed"] else 1


def cmd_report(cfg: Config, out: Path, args) -> int:
    parts = {}
    for name in ("filter", "mse", "lfd", "oracle", "simulate", "verify"):
        path = out / f"{name}.json"
        if path.exists():
            parts[name] = json.loads(path.read_text())
    if not parts:
        raise ValidationError(f"no command outputs found in {out}")
    write_json(out / "report.json", _envelope(cfg, "report", parts))
    print(f"report covers: {', '.join(sorted(parts))}")
    return 0


HANDLERS = {
    "filter": cmd_filter,
    "mse": cmd_mse,
    "lfd": cmd_lfd,
    "oracle": cmd_oracle,
    "simulate": cmd_simulate,
    "verify": cmd_verify,
    "report": cmd_report,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="rfl", description="Minimax-robust filtering with missing observations.")
    parser.add_argument("--version", action="version", version=f"rfl {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("config", help="JSON configuration file")
        p.add_argument("--out", help="output directory (overrides the config)")
        p.add_argument("--seed", type=int, help="master seed (overrides the config)")
        p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                       help="override a scalar config field, e.g. grid.dt=0.1")
        p.add_argument("-v", "--verbose", action="store_true")
        if name == "filter":
            p.add_argument("--dump-operators", action="store_true", help="write B, R, Q as CSV")
        if name == "lfd":
            p.add_argument("--class-f", help="class spec for f (JSON text or file)")
            p.add_argument("--class-g", help="class spec for g (JSON text or file)")
        if name == "simulate":
            p.add_argument("--trials", type=int)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = load_config(args.config)
        overrides = list(args.set)
        if args.seed is not None:
            overrides.append(f"seed={args.seed}")
        if getattr(args, "trials", None) is not None:
            overrides.append(f"trials={args.trials}")
        if args.out is not None:
            overrides.append(f"output={json.dumps(args.out)}")
        cfg = apply_overrides(cfg, overrides)
        return HANDLERS[args.command](cfg, Path(cfg.output), args)
    except RFLError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return exc.exit_code
    except ValueError as exc:
        print(f"error: ValidationError: {exc}", file=sys.stderr)
        return ValidationError.exit_code


if __name__ == "__main__":
    sys.exit(main())
