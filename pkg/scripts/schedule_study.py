#!/usr/bin/env python3
"""Compare noise schedules: prints the signal fraction sqrt(abar_t) over the
chain and the terminal noise level for each supported family and step count.

Usage: python scripts/schedule_study.py [--steps 50 100]
"""
import argparse
import math

import groupdance as gd
from groupdance.diffusion import SCHEDULE_KINDS


def main():
    parser = argparse.ArgumentParser()
    parser.add_argument("--steps", type=int, nargs="+", default=[50, 100])
    args = parser.parse_args()

    for steps in args.steps:
        for kind in SCHEDULE_KINDS:
            sched = gd.make_schedule(steps, kind)
            marks = [0, steps // 4, steps // 2, 3 * steps // 4, steps - 1]
            profile = " ".join(
                f"t={t}:{math.sqrt(float(sched.alpha_bar[t])):.3f}" for t in marks)
            print(f"{kind:7s} T={steps:4d}  signal {profile}  "
                  f"abar_T={float(sched.alpha_bar[-1]):.2e}")


if __name__ == "__main__":
    main()
