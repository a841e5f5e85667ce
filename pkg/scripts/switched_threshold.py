"""Locate the stable-activation fraction at which the planar switched example
stops certifying, by bisection on the cyclic switching signal.

Usage: python scripts/switched_threshold.py [--neutral 0.01]
"""

import argparse
import math

from impiss.certify import check_thm5
from impiss.cli import SW_FLOW_CLASSES, SW_JUMP_CLASSES, switched_sigma


def holds(p_s, p_n):
    sigma = switched_sigma("b", p_s=p_s, p_n=p_n)
    return check_thm5([sigma], SW_FLOW_CLASSES, SW_JUMP_CLASSES, 1.0, 3.0, 0.0, 2.0).holds


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--neutral", type=float, default=0.01)
    ap.add_argument("--tol", type=float, default=1e-3)
    args = ap.parse_args()
    lo, hi = 0.80, 0.98
    assert not holds(lo, args.neutral) and holds(hi, args.neutral)
    while hi - lo > args.tol:
        mid = 0.5 * (lo + hi)
        lo, hi = (lo, mid) if holds(mid, args.neutral) else (mid, hi)
    # per unit period: c_s p_s - c_u (1 - p_s - p_n) > ln d_u
    predicted = (3.0 * (1.0 - args.neutral) + math.log(2.0)) / 4.0
    print(f"empirical threshold in ({lo:.4f}, {hi:.4f}]; linear prediction {predicted:.4f}")


if __name__ == "__main__":
    main()
