#!/usr/bin/env python3
"""Dump samples of every absolute-value approximant for plotting."""

import argparse
import os

import numpy as np

from twofluid import matfun
from twofluid.runio import write_samples_csv


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", default="out_poly")
    ap.add_argument("--samples", type=int, default=2001)
    ap.add_argument("--lam-int", type=float, default=1e-3, dest="lam_int")
    args = ap.parse_args()
    os.makedirs(args.out, exist_ok=True)
    xs = np.linspace(-1, 1, args.samples)

    specs = {
        "p0": matfun.build_low_order("p0", -1.0, 1.0),
        "p1": matfun.build_low_order("p1", -1.0, 1.0),
        "p2": matfun.build_low_order("p2", -1.0, 1.0),
        "phdf": matfun.build_PHDF(),
    }
    for p in (2, 4, 8, 16):
        specs[f"p2p_{p}"] = matfun.build_P2p(p)
    from types import SimpleNamespace
    b = SimpleNamespace(lam_min=np.array([-1.0]), lam_max=np.array([1.0]),
                        lam_int_max=np.array([args.lam_int]),
                        a_max=np.array([1.0]),
                        lam_small=np.array([args.lam_int]))
    specs["phdd"] = matfun.build_PHDD(b, d=1.0)
    specs["phdd_d10"] = matfun.build_PHDD(b, d=10.0)

    for name, spec in specs.items():
        write_samples_csv(os.path.join(args.out, f"{name}.csv"),
                          ("x", "P", "abs"),
                          (xs, matfun.eval_poly(spec, xs), np.abs(xs)))
    for tau in (0.1, 1e-3, 1e-5):
        write_samples_csv(os.path.join(args.out, f"tanh_{tau:g}.csv"),
                          ("x", "P", "abs"),
                          (xs, matfun.phi_tanh(xs, tau), np.abs(xs)))
    print(f"wrote {len(specs) + 3} sample files to {args.out}/")


if __name__ == "__main__":
    main()
