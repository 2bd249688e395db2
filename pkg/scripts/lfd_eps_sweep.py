"""Least favorable error as a function of the class radius.

    python scripts/lfd_eps_sweep.py configs/p1.json --pair l2_l2 --eps 0 0.025 0.05 0.1

Prints one CSV row per radius: eps, delta0, iterations, converged, budget
residual and the two saddle violations.
"""

import argparse
import csv
import sys

from rfl.config import apply_overrides, load_config
from rfl.minimax import Contamination, Known, L1Ball, L2Ball, lfd_solve, saddle_verify
from rfl.spectra import power


def make_pair(kind, eps, f, g, grid, power_factor):
    if kind == "contamination_known":
        return Contamination(f, eps, power_factor * power(f, grid)), Known(g)
    if kind == "l1_l2":
        return L1Ball(f, eps), L2Ball(g, eps)
    if kind == "l2_l2":
        return L2Ball(f, eps), L2Ball(g, eps)
    raise SystemExit(f"unknown pair {kind!r}")


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("config")
    parser.add_argument("--pair", default="l2_l2", choices=("contamination_known", "l1_l2", "l2_l2"))
    parser.add_argument("--eps", type=float, nargs="+", default=[0.0, 0.025, 0.05, 0.1])
    parser.add_argument("--power-factor", type=float, default=1.2)
    parser.add_argument("--samples", type=int, default=20, help="density samples for the saddle check")
    parser.add_argument("--set", action="append", default=[], metavar="KEY=VALUE")
    args = parser.parse_args()

    cfg = apply_overrides(load_config(args.config), args.set)
    problem = cfg.problem()
    f, g = cfg.densities()
    writer = csv.writer(sys.stdout)
    writer.writerow(["eps", "delta0", "iterations", "converged", "budget_residual", "left", "right"])
    for eps in args.eps:
        cls_f, cls_g = make_pair(args.pair, eps, f, g, problem.freq, args.power_factor)
        s = lfd_solve(problem, cls_f, cls_g, cfg.lfd_options())
        rep = saddle_verify(s, problem, cls_f, cls_g, args.samples, 10, seed=cfg.seed)
        budget = max(s.residuals["budget_f"], s.residuals["budget_g"])
        writer.writerow([eps, repr(s.delta), s.iterations, s.converged, f"{budget:.2e}",
                         f"{rep.left_violation:.2e}", f"{rep.right_violation:.2e}"])
        sys.stdout.flush()


if __name__ == "__main__":
    main()
