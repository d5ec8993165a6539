"""Solve every bundled scenario and write the plans under runs/<name>."""

import argparse
from pathlib import Path

from orbcrawl.ocp import build_problem, closure_error, solve
from orbcrawl.scenario import BUNDLED, load_scenario


def main():
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("--out", default="runs")
    p.add_argument("names", nargs="*", default=[n for n in BUNDLED if n != "ablation_5s"])
    args = p.parse_args()
    print(f"{'scenario':<12}{'status':>12}{'iters':>7}{'time [s]':>10}{'cost':>12}{'max eq':>10}{'closure [m]':>13}")
    for name in args.names:
        cfg = load_scenario(name)
        sol = solve(build_problem(cfg))
        sol.write(Path(args.out) / name)
        closure = closure_error(sol, cfg.load_model())
        print(f"{name:<12}{sol.status:>12}{sol.iterations:>7}{sol.wall_time:>10.1f}{sol.cost:>12.5g}"
              f"{sol.residuals['max_eq']:>10.1e}{closure:>13.2e}")


if __name__ == "__main__":
    main()
