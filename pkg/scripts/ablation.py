"""Polynomial-count and contact-count sweeps on the fast 2.5 m / 5 s crawl."""

import argparse

from orbcrawl.cli import main as cli


def main():
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("--out", default="runs/ablation")
    args = p.parse_args()
    codes = [cli(["ablate", "--scenario", "ablation_5s", "--polys", "2,3,4,5", "--out", f"{args.out}/polys"]),
             cli(["ablate", "--scenario", "ablation_5s", "--contacts", "4,6", "--out", f"{args.out}/contacts"])]
    raise SystemExit(max(codes))


if __name__ == "__main__":
    main()
