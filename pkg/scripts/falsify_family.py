"""Random counterexample search on the scalar plant of the decaying family.

The proven envelope (with its e^2 slack) should survive the search; the same
envelope with the slack removed should be broken, typically just after a jump.
Usage: python scripts/falsify_family.py [--budget 200] [--seed 0]
"""

import argparse
import math

from impiss.certify import FalsifyOptions, falsify, lyapunov_iss_envelope
from impiss.comparison import example2_system
from impiss.funcspace import MonotonePW, SontagKL
from impiss.hybridsim import MeasureFn


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--budget", type=int, default=200)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--lam", type=float, default=2.0)
    args = ap.parse_args()
    ident = MonotonePW.identity()
    plant = example2_system(args.lam, 4.0)
    h = MeasureFn.from_text("abs(x1)", 1)
    for label, scale, u_range in [("with e^2", math.exp(2.0), (0.0, 0.5)),
                                  ("without e^2", 1.0, (0.0, 0.0))]:
        beta, rho = lyapunov_iss_envelope(SontagKL(ident, ident, 1.0, scale), ident, ident, ident, ident)
        opts = FalsifyOptions(t0_max=2.5, duration=1.5, u_range=u_range)
        res = falsify(plant, h, h, beta, rho, "weak", args.budget, args.seed, opts)
        print(f"{label}: {res.verdict} after {res.trials} trials")
        if res.counterexample:
            cx = res.counterexample
            print(f"  t0={cx['t0']:.4f} x0={cx['x0']} t={cx['t']:.4f} "
                  f"h={cx['h']:.4g} > bound {cx['bound']:.4g}")


if __name__ == "__main__":
    main()
