#!/usr/bin/env python3
"""Empirical Cartan-cell frequencies of counted points against the
height-ball model, per prime.

Usage:
    python scripts/run_equidistribution.py [--tmax 16384] [--primes 2,3,5]
"""

import argparse

from heightcount.enumeration import cartan_statistics, scan_pgl2_adjoint
from heightcount.zeta import model_cell_probabilities


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--tmax", type=int, default=2**14)
    ap.add_argument("--primes", default="2,3,5")
    ap.add_argument("--threads", type=int, default=2)
    args = ap.parse_args()
    primes = tuple(int(p) for p in args.primes.split(","))

    scan = scan_pgl2_adjoint(args.tmax, primes_tracked=primes, threads=args.threads)
    for p in primes:
        emp = cartan_statistics(scan.histogram(p))
        model, tail = model_cell_probabilities(p, max(emp))
        print(f"p = {p}  (model tail beyond table: {float(tail):.2e})")
        print(f"  {'k':>3} {'empirical':>12} {'model':>12} {'abs diff':>10}")
        for k in sorted(emp):
            e, m = float(emp[k]), float(model.get(k, 0))
            print(f"  {k:>3} {e:>12.6f} {m:>12.6f} {abs(e - m):>10.2e}")


if __name__ == "__main__":
    main()
