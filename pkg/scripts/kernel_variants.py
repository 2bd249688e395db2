"""Filter error and diagnostics for both gap kernels against the oracle.

    python scripts/kernel_variants.py configs/p1.json
"""

import argparse

from rfl.config import apply_overrides, load_config
from rfl.filtering import FilterOptions, check_solution, solve_filter
from rfl.operators import KERNELS
from rfl.oracle import oracle_solve


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("config")
    parser.add_argument("--set", action="append", default=[], metavar="KEY=VALUE")
    args = parser.parse_args()

    cfg = apply_overrides(load_config(args.config), args.set)
    problem = cfg.problem()
    f, g = cfg.densities()
    orc = oracle_solve(problem, f, g, cfg.solver.cond_max)
    print(f"oracle mse {orc.mse:.10g}")
    print(f"{'kernel':<12}{'delta':>14}{'rel. gap':>12}{'leakage':>12}  checks")
    for kernel in KERNELS:
        opts = FilterOptions(r_gap_kernel=kernel, method=cfg.solver.method)
        sol = solve_filter(problem, f, g, opts)
        checks = check_solution(sol, opts)
        failed = [k for k, ok in checks.items() if not ok]
        rel = abs(sol.delta - orc.mse) / orc.mse
        status = "all pass" if not failed else "fail: " + ", ".join(failed)
        print(f"{kernel:<12}{sol.delta:>14.8g}{rel:>12.2e}{sol.weights.leakage:>12.2e}  {status}")


if __name__ == "__main__":
    main()
