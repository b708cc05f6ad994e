#!/usr/bin/env python3
"""Audit the structural constants of cascade weights across split ratios.

Prints, for each ratio bound rho and seed, the measured doubling and
reverse doubling constants, the generator guarantee 1 + rho, and the
summability constants for a few powers, so one can eyeball how sharp
the generator bound is in practice.
"""

import argparse

from rectfrac import (GridConfig, condition_d_constant, doubling_constant,
                      gen_cascade, reverse_doubling_constant)


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--dims", default="1,1")
    ap.add_argument("--depth", type=int, default=5)
    ap.add_argument("--rhos", default="1.5,2,3")
    ap.add_argument("--seeds", type=int, default=5)
    ap.add_argument("--eps", default="0.25,0.5,1")
    args = ap.parse_args()

    cfg = GridConfig(tuple(int(d) for d in args.dims.split(",")), args.depth)
    eps_list = [float(e) for e in args.eps.split(",")]
    header = ["rho", "seed", "doubling", "bound", "reverse"] + \
             [f"cond(eps={e})" for e in eps_list]
    print("  ".join(f"{h:>12}" for h in header))
    for rho_txt in args.rhos.split(","):
        rho = float(rho_txt)
        for seed in range(args.seeds):
            w = gen_cascade(cfg, rho, seed)
            row = [f"{rho:12.2f}", f"{seed:12d}",
                   f"{doubling_constant(w).value:12.6f}",
                   f"{1 + rho:12.2f}",
                   f"{reverse_doubling_constant(w).value:12.6f}"]
            for e in eps_list:
                row.append(f"{condition_d_constant(w, e).value:12.6f}")
            print("  ".join(row))


if __name__ == "__main__":
    main()
