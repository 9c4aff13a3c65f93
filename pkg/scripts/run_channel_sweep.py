#!/usr/bin/env python3
"""Subcooled-channel robustness sweep: inlet void fractions 1e-4..1e-8
with the positivity-controlled dynamic Hermite scheme, reporting the
per-run problem statistics."""

import argparse
import os
import time

import numpy as np

from twofluid.cases import boiling_onset_oracle, load_case
from twofluid.matfun import AbsApproximant
from twofluid.runio import write_snapshot, write_stats
from twofluid.solver import TimeStepControl, run


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--alphas", nargs="+", type=float,
                    default=[1e-4, 1e-5, 1e-6, 1e-7, 1e-8])
    ap.add_argument("--cfl", type=float, default=None)
    ap.add_argument("--t-end", type=float, default=None, dest="t_end")
    ap.add_argument("--out", default="out_channel")
    args = ap.parse_args()
    os.makedirs(args.out, exist_ok=True)

    print(f"{'alpha_in':>9s} {'status':10s} {'steps':>6s} {'prob.%':>7s} "
          f"{'mean iters':>10s} {'dt cuts':>7s} {'onset[m]':>9s} {'wall[s]':>8s}")
    for alpha in args.alphas:
        case = load_case("channel_subcooled", alpha_inlet=alpha)
        if args.cfl:
            case.cfl = args.cfl
        if args.t_end:
            case.t_end = args.t_end
        oracle = boiling_onset_oracle(case)
        state = case.initial_state()
        t0 = time.time()
        final, stats = run(case.problem(), state, AbsApproximant("phdd"),
                           TimeStepControl(cfl=case.cfl), case.t_end,
                           mode="implicit", positivity_control=True)
        wall = time.time() - t0
        _, h_l_sat, _, _ = case.sat.lookup(final.prim[:, 1])
        boiling = final.prim[:, 5] >= h_l_sat
        onset = case.mesh.centers[np.argmax(boiling)] if boiling.any() else np.nan
        tag = f"subcooled_{alpha:.0e}"
        write_snapshot(os.path.join(args.out, f"{tag}.csv"),
                       case.mesh.centers, final)
        write_stats(os.path.join(args.out, f"{tag}_stats.json"), stats)
        print(f"{alpha:9.0e} {stats.status:10s} {stats.steps:6d} "
              f"{100 * stats.problematic_fraction:7.3f} "
              f"{stats.mean_resolve_iterations:10.2f} {stats.dt_reductions:7d} "
              f"{onset:9.3f} {wall:8.1f}")
    print(f"oracle onset: {oracle.y_boil:.3f} m "
          f"(published IAPWS-based reference: 1.21 m)")


if __name__ == "__main__":
    main()
