"""Compare the spectral filter with the covariance oracle and a Monte Carlo run.

    python scripts/p1_oracle_check.py configs/p1.json --trials 10000
"""

import argparse
import json
import time

from rfl.config import apply_overrides, load_config
from rfl.filtering import solve_filter
from rfl.montecarlo import empirical_mse
from rfl.oracle import oracle_solve


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("config")
    parser.add_argument("--trials", type=int, default=None)
    parser.add_argument("--set", action="append", default=[], metavar="KEY=VALUE")
    args = parser.parse_args()

    cfg = apply_overrides(load_config(args.config), args.set)
    problem = cfg.problem()
    f, g = cfg.densities()

    t0 = time.perf_counter()
    sol = solve_filter(problem, f, g, cfg.filter_options())
    t1 = time.perf_counter()
    orc = oracle_solve(problem, f, g, cfg.solver.cond_max)
    t2 = time.perf_counter()
    sim = empirical_mse(orc.weights, problem, f, g, args.trials or cfg.trials, cfg.seed, reference=orc.mse)
    t3 = time.perf_counter()

    print(json.dumps({
        "delta": sol.delta,
        "delta_spectral": sol.delta_spectral,
        "oracle_mse": orc.mse,
        "relative_gap": abs(sol.delta - orc.mse) / orc.mse,
        "var_a_xi": sol.var_a,
        "simulation": sim.to_dict(),
        "seconds": {"filter": t1 - t0, "oracle": t2 - t1, "simulate": t3 - t2},
        "r_gap_kernel": cfg.solver.r_gap_kernel,
    }, indent=2))


if __name__ == "__main__":
    main()
