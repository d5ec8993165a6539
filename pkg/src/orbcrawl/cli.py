"""Command-line front end.

    orbcrawl plan     --scenario case1_1 --out runs/case1_1 [--no-thrusters]
    orbcrawl track    --scenario case1_1 --out runs/case1_1 [--controller impedance] [--rate 50]
    orbcrawl ablate   --scenario ablation_5s --polys 2,3,4,5 | --contacts 4,6 --out runs/ablation
    orbcrawl envcheck --scenario case1_1 [--steps 50] [--seed 0]

Exit codes: 0 success, 1 failed environment checks, 2 non-convergence,
3 configuration or input error.  ``ORBCRAWL_LOG`` sets the log level.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import sys
from dataclasses import asdict
from pathlib import Path

from .scenario import ConfigError, load_scenario

EXIT_OK, EXIT_CHECKS, EXIT_NOT_CONVERGED, EXIT_CONFIG = 0, 1, 2, 3

# mean base tracking errors [m] that the classical baselines are expected to land near
REFERENCE_BASE_ERROR = {"diffik": 9.2e-2, "impedance": 7.6e-2}


def _int_list(text):
    try:
        vals = [int(v) for v in text.split(",") if v.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected a comma-separated integer list, got {text!r}") from exc
    if not vals or min(vals) < 1:
        raise argparse.ArgumentTypeError("list entries must be positive integers")
    return vals


def build_parser():
    p = argparse.ArgumentParser(prog="orbcrawl", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--scenario", required=True, help="scenario YAML path or bundled name")
        sp.add_argument("--out", help="output directory (default: runs/<scenario>)")
        sp.add_argument("--seed", type=int, help="override the scenario seed")

    sp = sub.add_parser("plan", help="solve the trajectory optimisation problem")
    common(sp)
    sp.add_argument("--no-thrusters", action="store_true", help="disable the base thrusters")

    sp = sub.add_parser("track", help="track a solved plan on the full-dynamics simulator")
    common(sp)
    sp.add_argument("--solution", help="plan CSV (default: <out>/solution.csv)")
    sp.add_argument("--controller", choices=("pd", "diffik", "impedance", "external"))
    sp.add_argument("--policy", help="module:function returning policy(state, targets) for --controller external")
    sp.add_argument("--rate", type=float, help="outer-loop rate [Hz]")

    sp = sub.add_parser("ablate", help="re-solve over polynomial or contact-phase counts")
    common(sp)
    group = sp.add_mutually_exclusive_group(required=True)
    group.add_argument("--polys", type=_int_list)
    group.add_argument("--contacts", type=_int_list)
    sp.add_argument("--no-thrusters", action="store_true")

    sp = sub.add_parser("envcheck", help="run the environment self-checks")
    common(sp)
    sp.add_argument("--steps", type=int, default=50, help="steps in the determinism transcript")
    return p


def _out_dir(args, cfg):
    return Path(args.out or cfg.out or Path("runs") / cfg.name)


def cmd_plan(args, cfg):
    from .ocp import build_problem, solve

    overrides = {"thrusters": False} if args.no_thrusters else {}
    sol = solve(build_problem(cfg, **overrides))
    out = sol.write(_out_dir(args, cfg))
    rep = sol.report()
    print(f"{cfg.name}: {sol.status} in {sol.iterations} iterations, {sol.wall_time:.1f} s, cost {sol.cost:.6g}")
    print(f"  max equality residual {sol.residuals['max_eq']:.2e}, "
          f"displacement {', '.join(f'{v:+.4f}' for v in rep.get('displacement', []))} m")
    print(f"  peak contact force per arm {', '.join(f'{v:.3f}' for v in rep['peak_force'])} N")
    print(f"  wrote {out}")
    if not sol.converged:
        print("  WARNING: solver did not converge; outputs are partial", file=sys.stderr)
        return EXIT_NOT_CONVERGED
    return EXIT_OK


def _load_policy(spec):
    import importlib

    mod, _, fn = spec.partition(":")
    if not fn:
        raise ConfigError("--policy must look like module:function")
    try:
        return getattr(importlib.import_module(mod), fn)()
    except (ImportError, AttributeError) as exc:
        raise ConfigError(f"cannot load policy {spec!r}: {exc}") from exc


def cmd_track(args, cfg):
    from .ocp import load_plan_csv
    from .sim import Simulator, TrackerConfig, track

    out = _out_dir(args, cfg)
    path = Path(args.solution) if args.solution else out / "solution.csv"
    if not path.exists():
        raise ConfigError(f"solution file {path} not found; run 'orbcrawl plan' first")
    plan = load_plan_csv(path)
    ctrl = asdict(cfg.controller)
    if args.controller:
        ctrl["name"] = args.controller
    if args.rate:
        ctrl["rate"] = args.rate
    try:
        tcfg = TrackerConfig(**ctrl)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    policy = _load_policy(args.policy) if tcfg.name == "external" and args.policy else None
    if tcfg.name == "external" and policy is None:
        raise ConfigError("--controller external needs --policy module:function")
    sim = Simulator(cfg.load_model())
    rep = track(plan, sim, tcfg, policy=policy)
    rep.write(out)
    s = rep.summary()
    ref = REFERENCE_BASE_ERROR.get(tcfg.name)
    print(f"{'controller':<12}{'base [m]':>12}{'base [rad]':>12}{'EE [m]':>12}{'reference':>12}")
    print(f"{tcfg.name:<12}{s['mean_base_error']:>12.3e}{s['mean_base_rot_error']:>12.3e}{s['mean_ee_error']:>12.3e}"
          f"{(f'{ref:.1e}' if ref else '-'):>12}")
    print(f"  wrote {out / 'tracking.csv'}")
    return EXIT_OK


def cmd_ablate(args, cfg):
    from .ocp import ablate_contacts, ablate_polynomials, build_problem

    overrides = {"thrusters": False} if args.no_thrusters else {}
    prob = build_problem(cfg, **overrides)
    rows, _ = ablate_polynomials(prob, args.polys) if args.polys else ablate_contacts(prob, args.contacts)
    rows = sorted(rows, key=lambda r: r.cost)
    out = _out_dir(args, cfg)
    out.mkdir(parents=True, exist_ok=True)
    cols = list(rows[0].as_dict())
    with open(out / "ablation.csv", "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=cols)
        w.writeheader()
        for r in rows:
            w.writerow(r.as_dict())
    with open(out / "ablation.json", "w") as fh:
        json.dump([r.as_dict() for r in rows], fh, indent=2)
    print(f"{'setting':<12}{'conv':>6}{'cost':>12}{'max eq':>10}{'iters':>7}{'time [s]':>10}{'max swing [m]':>15}")
    for r in rows:
        print(f"{r.label + '=' + str(r.value):<12}{('yes' if r.converged else 'no'):>6}{r.cost:>12.5g}"
              f"{r.max_eq:>10.1e}{r.iterations:>7}{r.solve_time:>10.1f}{r.max_swing_displacement:>15.3f}")
    print(f"  wrote {out / 'ablation.csv'}")
    return EXIT_OK if all(r.converged for r in rows) else EXIT_NOT_CONVERGED


def cmd_envcheck(args, cfg):
    from .env import EnvConfig
    from .env.checks import run_checks

    env_cfg = EnvConfig.load(cfg._resolve(cfg.env)) if cfg.env else EnvConfig()
    results, digest = run_checks(env_cfg, seed=cfg.seed, steps=args.steps)
    for r in results:
        print(f"{'PASS' if r.passed else 'FAIL'}  {r.name:<22} {r.detail}")
    print(f"transcript sha256 {digest}")
    return EXIT_OK if all(r.passed for r in results) else EXIT_CHECKS


COMMANDS = {"plan": cmd_plan, "track": cmd_track, "ablate": cmd_ablate, "envcheck": cmd_envcheck}


def main(argv=None):
    level = getattr(logging, os.environ.get("ORBCRAWL_LOG", "WARNING").upper(), logging.WARNING)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
    args = build_parser().parse_args(argv)
    try:
        cfg = load_scenario(args.scenario)
        if args.seed is not None:
            cfg = cfg.with_(seed=args.seed)
        return COMMANDS[args.command](args, cfg)
    except (ConfigError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
