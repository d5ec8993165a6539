"""Roll the crawling environment with a scripted policy and print the reward terms."""

import argparse

import numpy as np

from orbcrawl.env import CrawlEnv, EnvConfig


def main():
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--steps", type=int, default=150)
    p.add_argument("--policy", choices=("hold", "random"), default="hold")
    args = p.parse_args()
    env = CrawlEnv(EnvConfig(), seed=args.seed)
    env.reset()
    rng = np.random.default_rng(args.seed)
    totals = None
    for k in range(args.steps):
        a = np.concatenate([env.state.q, np.zeros(3)])
        if args.policy == "random":
            a += np.concatenate([0.05 * rng.normal(size=env.nj), 5.0 * rng.normal(size=3)])
        tr = env.step(a)
        parts = tr.reward.as_dict()
        totals = parts if totals is None else {n: totals[n] + v for n, v in parts.items()}
        if k % 25 == 0:
            print(f"t={tr.info['time']:6.2f}  r={tr.reward.total:9.3f}  base err {tr.info['base_error']:.3f} m"
                  f"  ee err {np.mean(tr.info['ee_error']):.3f} m")
        if tr.done:
            print("episode ended", "(terminated)" if tr.terminated else "(timeout)")
            break
    print("summed reward terms:")
    for n, v in totals.items():
        print(f"  {n:<15}{v:12.3f}")


if __name__ == "__main__":
    main()
