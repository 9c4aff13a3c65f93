"""Command-line driver.

Subcommands:
  run    -- simulate a case and write profile/statistics files
  oracle -- print a case's closed-form reference profile as CSV
  probe  -- eigenvector-collapse sweep (CSV: alpha, cond_R, angle_rad)
  poly   -- dump absolute-value approximant samples (CSV: x, P, abs)
"""

from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from . import matfun
from .cases import (boiling_onset_oracle, collapse_state_factory, load_case,
                    ransom_oracle)
from .eigen import collapse_probe
from .errors import TwoFluidError
from .matfun import AbsApproximant
from .runio import write_samples_csv, write_snapshot, write_stats
from .solver import TimeStepControl, run as run_solver

VARIANT_CHOICES = ("exact", "p0", "p1", "p2", "p2p", "phdf", "phdd", "tanh")


def _out_dir(args):
    path = args.out or os.environ.get("TWOFLUID_OUT", ".")
    os.makedirs(path, exist_ok=True)
    return path


def _cmd_run(args):
    case = load_case(args.case, alpha_inlet=args.alpha_inlet)
    if args.cells:
        from .solver import Mesh1D
        case.mesh = Mesh1D(n_cells=args.cells, length=case.mesh.length)
    if args.t_end is not None:
        case.t_end = args.t_end
    if args.cfl is not None:
        case.cfl = args.cfl
    approx = AbsApproximant(args.scheme, p=args.p, d=args.d, tau=args.tau)
    ctl = TimeStepControl(cfl=case.cfl, newton_max=args.newton_max)
    state = case.initial_state()
    mode = args.mode or case.mode
    final, stats = run_solver(case.problem(), state, approx, ctl, case.t_end,
                              mode=mode, positivity_control=args.positivity)
    out = _out_dir(args)
    tag = f"{case.name}_{args.scheme}"
    write_snapshot(os.path.join(out, f"{tag}_profile.csv"),
                   case.mesh.centers, final)
    write_stats(os.path.join(out, f"{tag}_stats.json"), stats)
    print(f"{case.name}: {stats.status} after {stats.steps} steps "
          f"(t = {stats.t_reached:.4g} s, wall {stats.wall_time:.1f} s)")
    if stats.status != "completed":
        print(f"diagnostic: {stats.diagnostic}")
        return 1
    return 0


def _cmd_oracle(args):
    case = load_case(args.case)
    out = _out_dir(args)
    path = os.path.join(out, f"{case.name}_oracle.csv")
    if case.name == "ransom":
        res = ransom_oracle(args.t if args.t is not None else case.t_end,
                            y=case.mesh.centers)
        write_samples_csv(path, ("y", "alpha_v"), (res.y, res.alpha_v))
        print(f"front position y_f = {res.y_front:.6g} m; profile in {path}")
    else:
        res = boiling_onset_oracle(case)
        print(f"boiling onset y_boil = {res.y_boil:.6g} m")
        write_samples_csv(path, ("y_boil",), (np.array([res.y_boil]),))
    return 0


def _cmd_probe(args):
    case = load_case(args.case)
    alphas = [10.0 ** (-k) for k in range(1, args.decades + 1)]
    rep = collapse_probe(collapse_state_factory(case), alphas)
    out = _out_dir(args)
    path = os.path.join(out, f"{case.name}_collapse.csv")
    write_samples_csv(path, ("alpha", "cond_R", "angle_rad"),
                      (rep.alpha, rep.cond_r, rep.angle_rad))
    print(f"collapse sweep written to {path}")
    return 0


def _cmd_poly(args):
    xs = np.linspace(-1.0, 1.0, args.samples)
    v = args.variant
    if v == "phdf":
        vals = matfun.eval_poly(matfun.build_PHDF(), xs)
    elif v == "p2p":
        vals = matfun.eval_poly(matfun.build_P2p(args.p), xs)
    elif v in ("p0", "p1", "p2"):
        vals = matfun.eval_poly(matfun.build_low_order(v, -1.0, 1.0), xs)
    elif v == "tanh":
        vals = matfun.phi_tanh(xs, args.tau if args.tau else 1e-3)
    elif v == "phdd":
        from types import SimpleNamespace
        b = SimpleNamespace(lam_min=np.array([-1.0]), lam_max=np.array([1.0]),
                            lam_int_max=np.array([args.lam_int]),
                            a_max=np.array([1.0]),
                            lam_small=np.array([args.lam_int]))
        vals = matfun.eval_poly(matfun.build_PHDD(b, d=args.d), xs)
    else:
        raise TwoFluidError(f"no sample dump for variant {v!r}")
    out = _out_dir(args)
    path = os.path.join(out, f"poly_{v}.csv")
    write_samples_csv(path, ("x", "P", "abs"), (xs, vals, np.abs(xs)))
    print(f"{args.samples} samples of {v} written to {path}")
    return 0


def build_parser():
    ap = argparse.ArgumentParser(prog="twofluid",
                                 description=__doc__,
                                 formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = ap.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="simulate a case")
    p_run.add_argument("--case", required=True,
                       help="case name (ransom, channel_saturated, "
                            "channel_subcooled) or config path")
    p_run.add_argument("--scheme", default="phdd", choices=VARIANT_CHOICES)
    p_run.add_argument("--alpha-inlet", type=float, default=None,
                       dest="alpha_inlet")
    p_run.add_argument("--cells", type=int, default=None)
    p_run.add_argument("--t-end", type=float, default=None, dest="t_end")
    p_run.add_argument("--cfl", type=float, default=None)
    p_run.add_argument("--mode", choices=("explicit", "implicit"), default=None)
    p_run.add_argument("--positivity", action="store_true",
                       help="run the adaptive-diffusion controller (phdd only)")
    p_run.add_argument("--newton-max", type=int, default=20, dest="newton_max")
    p_run.add_argument("--p", type=int, default=4, help="even-family order")
    p_run.add_argument("--d", type=float, default=1.0, help="Hermite diffusion")
    p_run.add_argument("--tau", type=float, default=None, help="tanh accuracy")
    p_run.add_argument("--out", default=None, help="output directory")
    p_run.set_defaults(func=_cmd_run)

    p_or = sub.add_parser("oracle", help="print a case's analytic reference")
    p_or.add_argument("--case", required=True)
    p_or.add_argument("--t", type=float, default=None)
    p_or.add_argument("--out", default=None)
    p_or.set_defaults(func=_cmd_oracle)

    p_pr = sub.add_parser("probe", help="eigenvector-collapse sweep")
    p_pr.add_argument("--case", default="channel_saturated")
    p_pr.add_argument("--decades", type=int, default=8)
    p_pr.add_argument("--out", default=None)
    p_pr.set_defaults(func=_cmd_probe)

    p_po = sub.add_parser("poly", help="dump approximant samples")
    p_po.add_argument("--variant", required=True, choices=VARIANT_CHOICES)
    p_po.add_argument("--samples", type=int, default=1001)
    p_po.add_argument("--p", type=int, default=4)
    p_po.add_argument("--d", type=float, default=1.0)
    p_po.add_argument("--tau", type=float, default=None)
    p_po.add_argument("--lam-int", type=float, default=1e-3, dest="lam_int")
    p_po.add_argument("--out", default=None)
    p_po.set_defaults(func=_cmd_poly)
    return ap


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except TwoFluidError as exc:
        report = {"error": type(exc).__name__, "message": str(exc)}
        print(json.dumps(report), file=sys.stderr)
        return 1


if __name__ == "__main__":      # pragma: no cover
    sys.exit(main())
