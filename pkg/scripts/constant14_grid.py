"""Check alpha3(tau) <= tau - 1/14 for the internal-case closed form on a log grid.

    python scripts/constant14_grid.py [--points 1000000]

Also prints the limits of tau - alpha3(tau): about 0.0718 as tau -> 1 and
1/12 as tau -> infinity, so 1/14 is never attained.
"""
import argparse

import numpy as np

from ritz_extract.bounds import alpha3_internal_closed_form


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--points", type=int, default=1_000_000)
    ap.add_argument("--lo", type=float, default=1 + 1e-6)
    ap.add_argument("--hi", type=float, default=1e6)
    a = ap.parse_args()
    tau = np.geomspace(a.lo, a.hi, a.points)
    gap = tau - alpha3_internal_closed_form(tau)
    i = int(np.argmin(gap))
    print(f"points={a.points} min(tau - alpha3) = {gap[i]:.10f} at tau = {tau[i]:.6g}")
    print(f"1/14 = {1 / 14:.10f}; holds everywhere: {bool(np.all(gap >= 1 / 14))}")
    print(f"tau -> 1: {gap[0]:.10f} (limit {1 - 2 * np.sqrt(12) / (4 + np.sqrt(12)):.10f})")
    print(f"tau -> inf: {gap[-1]:.10f} (1/12 = {1 / 12:.10f})")


if __name__ == "__main__":
    main()
