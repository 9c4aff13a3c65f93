"""Adaptive local-diffusion positivity controller for the dynamic
Hermite scheme.

One controlled step:

  a. reset the per-cell problem counters c_i,
  b. build the interface polynomials with diffusion D = 1 everywhere,
  c. solve the time step,
  d. flag cells with positivity or state-computation problems and
     increment their c_i,
  e. raise D = 10 c_i^3 (capped so D |lam_int_max| stays below the
     stability ceiling max(|lam_min|, lam_max)) on interfaces touching a
     flagged cell,
  f. re-solve; after max_pos_iters unresolved attempts divide dt by the
     reduction factor and restart the step from scratch.

Counters live within a single time step; accepted steps always satisfy
the full positivity set.  Diffusion is raised only next to flagged
cells, so untouched interfaces keep D = 1 bitwise.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import Aborted, NewtonDiverged
from .matfun import AbsApproximant
from .solver import (NewtonStats, Problem, TimeStepControl, implicit_step,
                     positivity_fields)
from .model import StateArray


@dataclass
class PositivityLedger:
    """Per-run accounting mirroring the reported robustness statistics."""

    n_cells: int
    steps_total: int = 0
    problematic_steps: int = 0
    resolve_iterations: list = field(default_factory=list)
    dt_reductions: int = 0
    problem_kinds: dict = field(default_factory=dict)

    @property
    def problematic_fraction(self):
        return self.problematic_steps / self.steps_total if self.steps_total else 0.0

    @property
    def mean_resolve_iterations(self):
        if not self.resolve_iterations:
            return 0.0
        return float(np.mean(self.resolve_iterations))

    def record_step(self, resolves, kinds=()):
        self.steps_total += 1
        if resolves:
            self.problematic_steps += 1
            self.resolve_iterations.append(resolves)
        for k in kinds:
            self.problem_kinds[k] = self.problem_kinds.get(k, 0) + 1

    def as_dict(self):
        return {
            "steps_total": self.steps_total,
            "problematic_steps": self.problematic_steps,
            "problematic_step_fraction": self.problematic_fraction,
            "mean_resolve_iterations": self.mean_resolve_iterations,
            "dt_reductions": self.dt_reductions,
            "problem_kinds": dict(self.problem_kinds),
        }


def detect_problems(state: StateArray, closure_bad=None):
    """List of (cell, kind) for positivity-set or state-computation failures.

    Kinds: mass_v, mass_l, energy_v, energy_l, alpha_range, eos_convergence.
    """
    out = []
    viol = positivity_fields(state.cons)
    alpha = state.prim[:, 0]
    viol["alpha_range"] = (alpha < -1e-14) | (alpha > 1.0 + 1e-14)
    for name, mask in viol.items():
        for i in np.argwhere(mask).ravel():
            out.append((int(i), name))
    if closure_bad is not None:
        for i in np.argwhere(np.asarray(closure_bad, dtype=bool)).ravel():
            out.append((int(i), "eos_convergence"))
    return sorted(set(out))


def diffusion_for(c_i, lam_int_max=None, lam_min=None, lam_max=None):
    """D = 10 c_i^3, capped so D |lam_int_max| <= max(|lam_min|, lam_max)."""
    c_i = np.asarray(c_i, dtype=float)
    d = 10.0 * c_i**3
    if lam_int_max is not None:
        ceiling = np.maximum(np.abs(lam_min), np.abs(lam_max))
        with np.errstate(divide="ignore", invalid="ignore"):
            cap = np.where(np.abs(lam_int_max) > 0,
                           ceiling / np.abs(lam_int_max), np.inf)
        d = np.minimum(d, cap)
    return np.maximum(d, 1.0) if d.ndim else float(max(min(d, np.inf), 1.0))


def _interface_diffusion(c, bounds, d_prev):
    """Target D per interface from cell counters; monotone, capped."""
    c_iface = np.zeros(len(c) + 1)
    c_iface[:-1] = np.maximum(c_iface[:-1], c)   # interface left of cell i
    c_iface[1:] = np.maximum(c_iface[1:], c)     # interface right of cell i
    d = np.where(c_iface > 0,
                 diffusion_for(c_iface, bounds.lam_int_max,
                               bounds.lam_min, bounds.lam_max),
                 1.0)
    return np.maximum(d_prev, d)


def controlled_step(state: StateArray, problem: Problem,
                    approx: AbsApproximant, dt, ctl: TimeStepControl,
                    ledger: PositivityLedger, problem_injector=None,
                    prev_branch=None):
    """One accepted time step under the adaptive-diffusion control loop.

    Returns (state', info) with info = {dt_used, resolves, dt_reductions,
    newton_iterations}.  Raises Aborted when dt_min is reached.  The
    optional problem_injector(resolve_index, trial_state) -> [(cell,
    kind)] is a fault-injection seam for tests.
    """
    if approx.variant != "phdd":
        raise ValueError("the positivity controller drives the dynamic "
                         "Hermite variant only")
    n = problem.mesh.n_cells
    dt_try = dt
    dt_reductions = 0
    newton_total = 0
    while True:
        c = np.zeros(n, dtype=int)
        d_iface = np.ones(n + 1)
        resolves = 0
        kinds_seen = []
        while True:
            try:
                trial, nst = implicit_step(state, problem, approx, dt_try,
                                           ctl, d_array=d_iface, check=False,
                                           prev_branch=prev_branch)
                newton_total += nst.iterations
            except NewtonDiverged:
                nst = None
                trial = None
            if trial is not None and nst.converged:
                problems = detect_problems(trial, np.isin(
                    np.arange(n), np.asarray(nst.bad_cells, dtype=int)))
                if problem_injector is not None:
                    problems = sorted(set(problems)
                                      | set(problem_injector(resolves, trial)))
                if not problems:
                    ledger.record_step(resolves, kinds_seen)
                    ledger.dt_reductions += dt_reductions
                    info = {"dt_used": dt_try, "resolves": resolves,
                            "dt_reductions": dt_reductions,
                            "newton_iterations": newton_total,
                            "branch": nst.branch}
                    return trial, info
                for cell, kind in problems:
                    c[cell] += 1
                    kinds_seen.append(kind)
                d_iface = _interface_diffusion(c, nst.bounds, d_iface)
                resolves += 1
                if resolves <= ctl.max_pos_iters:
                    continue
            # Newton divergence or out of re-solve budget: shrink dt
            dt_try /= ctl.dt_reduction
            dt_reductions += 1
            if dt_try < ctl.dt_min:
                raise Aborted(
                    f"positivity control reached dt_min={ctl.dt_min:g}")
            break
