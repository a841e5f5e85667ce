"""Dwell-time threshold sweep for the linear setting.

For each tau_D the closed-form certificate is computed; on holds cases the
emitted (eta, mu) witnesses are re-checked with the window scanner on
seeded class members.  Usage: python scripts/dwell_sweep.py [--seeds N]
"""

import argparse

import numpy as np

from impiss.certify import check_cor1, check_thm3
from impiss.timing import DwellClassSpec, generate


def sweep(kind, c, d, taus, seeds, n0=1.0, horizon=50.0):
    for tau in taus:
        cert = check_cor1(c, d, DwellClassSpec(kind, n0=n0, tau_d=tau))
        line = f"{kind:4s} c={c:+.2f} d={d:.2f} tau_D={tau:.3f}: {cert.verdict:5s}"
        if cert.holds:
            gs = [generate(f"{kind}_random", horizon, s, n0=n0, tau_d=tau) for s in range(seeds)]
            w = cert.witnesses
            weak = check_thm3(c, d, gs, "weak", eta=w["eta"], mu=w["mu"])
            strong = check_thm3(c, d, gs, "strong", eta=w["eta_strong"], mu=w["mu_strong"])
            line += f"  eta={w['eta']:.4f} mu={w['mu']:.4f}  scan weak={weak.verdict} strong={strong.verdict}"
        print(line)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--seeds", type=int, default=20)
    args = ap.parse_args()
    sweep("adt", 1.0, 2.0, np.r_[0.5, 0.6, 0.69, 0.7, 0.8, 1.0], args.seeds)
    sweep("radt", -0.5, 0.5, np.r_[1.0, 1.2, 1.38, 1.39, 1.6], args.seeds)


if __name__ == "__main__":
    main()
