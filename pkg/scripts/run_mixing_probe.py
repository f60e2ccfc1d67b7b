#!/usr/bin/env python3
"""Decay-function diagnostics: sandwich constants on a diagonal family and
L^p convergence trends at one prime.

Usage:
    python scripts/run_mixing_probe.py [--prime 2] [--max-exponent 20]
"""

import argparse
import json

from heightcount.heights import PrimitiveMatrix
from heightcount.mixing import verify_bounds


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--prime", type=int, default=2)
    ap.add_argument("--max-exponent", type=int, default=20)
    ap.add_argument("--eps", type=float, default=0.1)
    ap.add_argument("--m", type=int, default=4)
    ap.add_argument("--pexp", default="2,2.5,3")
    args = ap.parse_args()

    p = args.prime
    sample = [PrimitiveMatrix(((p**j if j else 1, 0), (0, 1))) for j in range(args.max_exponent + 1)]
    rep = verify_bounds(
        sample,
        eps=args.eps,
        m=args.m,
        lp_prime=p,
        lp_exponents=[float(x) for x in args.pexp.split(",")],
    )
    print(f"sample: diag({p}^k, 1), k <= {args.max_exponent}")
    print(f"lower sandwich violations: {rep.lower_sandwich_violations}")
    print(f"C_eps (eps = {rep.eps}): {rep.c_eps:.6f}")
    print(f"C for xi <= C H^(-1/{rep.m}): {rep.c_height:.6f}")
    for e, snaps in rep.lp_partial_sums.items():
        trend = "divergent" if snaps[-1] / snaps[0] > 10 else "convergent"
        print(f"L^p probe e = {e}: first {snaps[0]:.4f}, last {snaps[-1]:.4f} ({trend})")
    print(json.dumps({"c_eps": rep.c_eps, "c_height": rep.c_height}))


if __name__ == "__main__":
    main()
