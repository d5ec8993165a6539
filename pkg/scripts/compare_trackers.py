"""Track the Case 1.1 plan with the diff-IK and impedance baselines.

Also prints the impedance base error for a list of stiffness values
(``--window`` limits the sweep to the first seconds of the plan).
"""

import argparse

from orbcrawl.ocp import build_problem, solve
from orbcrawl.scenario import load_scenario
from orbcrawl.sim import Simulator, TrackerConfig, track


def main():
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("--scenario", default="case1_1")
    p.add_argument("--sweep", type=float, nargs="*", default=[0.0, 500.0, 1500.0, 3000.0])
    p.add_argument("--window", type=float)
    args = p.parse_args()
    cfg = load_scenario(args.scenario)
    sim = Simulator(cfg.load_model())
    sol = solve(build_problem(cfg))
    print(f"{args.scenario}: plan {sol.status}, cost {sol.cost:.4g}")
    for name in ("diffik", "impedance"):
        s = track(sol, sim, TrackerConfig(name=name)).summary()
        print(f"  {name:<10} base {s['mean_base_error']:.3e} m  {s['mean_base_rot_error']:.3e} rad"
              f"  ee {s['mean_ee_error']:.3e} m")
    if args.sweep:
        print("stiffness sweep" + (f" over the first {args.window:g} s" if args.window else ""))
        for k in args.sweep:
            rep = track(sol, sim, TrackerConfig(name="impedance", stiffness=k), duration=args.window)
            print(f"  K={k:<8g} base {rep.mean_base_error:.3e} m")


if __name__ == "__main__":
    main()
