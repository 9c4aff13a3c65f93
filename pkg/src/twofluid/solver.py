"""1-D finite-volume time integration with Roe-type interface matrices.

The update uses the split interface matrices on state differences,

    V_i' = V_i - dt/dx (A-_{i+1/2} (V_{i+1} - V_i)
                        + A+_{i-1/2} (V_i - V_{i-1})) + dt S_i,

explicitly or through a backward-Euler residual solved by Newton with
frozen-at-iterate interface matrices (rebuilt every Newton iteration)
and a block-tridiagonal direct solve.  Ghost cells implement fixed
inlet primitives with extrapolated pressure, and fixed outlet pressure
with extrapolated remaining primitives.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy.linalg import lapack, solve_banded

from .eigen import EigenBounds, approx_eigenvalues
from .errors import (Aborted, DegenerateField, NegativeMass, NewtonDiverged,
                     NewtonStalled, OutOfValidityBox, PositivityViolation,
                     PressureNewtonDiverged, TwoFluidError)
from .matfun import AbsApproximant, apply_abs
from .model import (EV, IA, IHL, IHV, IP, IUL, IUV, MV, SourceConfig,
                    StateArray, boiling_branch, conserved_from_primitives,
                    jacobian, roe_average, solve_primitives,
                    source_jacobian_fd, source_terms)


@dataclass(frozen=True)
class Mesh1D:
    n_cells: int
    length: float

    def __post_init__(self):
        if self.n_cells < 3:
            raise ValueError("need at least 3 cells")
        if self.length <= 0:
            raise ValueError("length must be positive")

    @property
    def dx(self):
        return self.length / self.n_cells

    @property
    def centers(self):
        return (np.arange(self.n_cells) + 0.5) * self.dx


@dataclass(frozen=True)
class BoundarySpec:
    """Inlet fixes (alpha_v, u_v, u_l, h_v, h_l); outlet fixes p."""

    inlet_alpha_v: float
    inlet_u_v: float
    inlet_u_l: float
    inlet_h_v: float
    inlet_h_l: float
    outlet_p: float


@dataclass
class TimeStepControl:
    """Stepping and Newton knobs.

    newton_tol applies to the mixture-scaled residual; the default sits
    above the accuracy floor of the frozen-coefficient Newton at
    boundary cells (ca. 4e-7 scaled) and far below the scheme's own
    truncation error.
    """

    cfl: float = 0.9
    dt_min: float = 1e-12
    newton_max: int = 20
    newton_tol: float = 1e-6
    dt_reduction: float = 10.0
    max_pos_iters: int = 5
    dt_growth: float = 2.0

    def __post_init__(self):
        if self.cfl <= 0:
            raise ValueError("CFL must be positive")


@dataclass
class Problem:
    """Everything a stepper needs besides the state itself."""

    mesh: Mesh1D
    bc: BoundarySpec
    eos_v: object
    eos_l: object
    src: SourceConfig
    sat: object = None
    jac_method: str = "analytic"


@dataclass
class NewtonStats:
    iterations: int = 0
    converged: bool = True
    residual: float = 0.0
    bad_cells: list = field(default_factory=list)
    bounds: Optional[EigenBounds] = None
    branch: Optional[np.ndarray] = None


def initial_uniform_state(problem: Problem, alpha_v, p, u_v, u_l, h_v, h_l):
    n = problem.mesh.n_cells
    return conserved_from_primitives(
        np.full(n, alpha_v), np.full(n, p), np.full(n, u_v), np.full(n, u_l),
        np.full(n, h_v), np.full(n, h_l), problem.eos_v, problem.eos_l)


def ghost_states(state: StateArray, problem: Problem) -> StateArray:
    """Extend by one ghost layer on each side per the boundary contract."""
    bc = problem.bc
    w = state.prim
    inlet = conserved_from_primitives(
        bc.inlet_alpha_v, w[0, IP], bc.inlet_u_v, bc.inlet_u_l,
        bc.inlet_h_v, bc.inlet_h_l, problem.eos_v, problem.eos_l, check=False)
    outlet = conserved_from_primitives(
        w[-1, IA], bc.outlet_p, w[-1, IUV], w[-1, IUL],
        w[-1, IHV], w[-1, IHL], problem.eos_v, problem.eos_l, check=False)
    cons = np.vstack([inlet.cons, state.cons, outlet.cons])
    prim = np.vstack([inlet.prim, state.prim, outlet.prim])
    return StateArray(cons, prim)


def _ghost_jacobians(state: StateArray, problem: Problem):
    """FD sensitivities d(ghost cons)/d(boundary-cell cons), both ends.

    The ghosts extrapolate part of the boundary cell's state; at large
    CFL the implicit Newton cycles unless this feedback enters the
    boundary diagonal blocks.  All 24 probes run as one batched closure
    solve.
    """
    out = []
    for which in ("inlet", "outlet"):
        sl = slice(0, 1) if which == "inlet" else slice(-1, None)
        base_cons = state.cons[sl]
        base_prim = state.prim[sl]
        h = 1e-7 * (1.0 + np.abs(base_cons[0]))
        probes = np.repeat(base_cons, 12, axis=0)
        for j in range(6):
            probes[2 * j, j] += h[j]
            probes[2 * j + 1, j] -= h[j]
        prim, bad = solve_primitives(probes, problem.eos_v, problem.eos_l,
                                     np.full(12, base_prim[0, IP]),
                                     h_fallback=np.repeat(
                                         base_prim[:, [IHV, IHL]], 12, axis=0),
                                     negative="clamp")
        if np.any(bad):
            prim[bad] = base_prim[0]
        ghosts = _one_ghost(StateArray(probes, prim), problem, which)
        jac = np.empty((6, 6))
        for j in range(6):
            jac[:, j] = (ghosts.cons[2 * j] - ghosts.cons[2 * j + 1]) / (2.0 * h[j])
        out.append(jac)
    return out


def _one_ghost(boundary_state: StateArray, problem: Problem, which):
    bc = problem.bc
    w = boundary_state.prim
    if which == "inlet":
        return conserved_from_primitives(
            bc.inlet_alpha_v, w[:, IP], bc.inlet_u_v, bc.inlet_u_l,
            bc.inlet_h_v, bc.inlet_h_l, problem.eos_v, problem.eos_l,
            check=False)
    return conserved_from_primitives(
        w[:, IA], bc.outlet_p, w[:, IUV], w[:, IUL], w[:, IHV], w[:, IHL],
        problem.eos_v, problem.eos_l, check=False)


def interface_system(ext: StateArray, problem: Problem, approx: AbsApproximant,
                     d_array=None, bounds=None, work=None):
    """Interface matrices and bounds for all N+1 interfaces of an extended state.

    `bounds` may be supplied to reuse wave-speed bounds from an earlier
    evaluation: the implicit Newton freezes them over a step so the
    interpolation nodes cannot flip between near-degenerate candidates
    from one iterate to the next (the matrices themselves are rebuilt).
    """
    left = StateArray(ext.cons[:-1], ext.prim[:-1])
    right = StateArray(ext.cons[1:], ext.prim[1:])
    hat = roe_average(left, right, problem.eos_v, problem.eos_l)
    amat = jacobian(hat, problem.src, problem.eos_v, problem.eos_l,
                    method=problem.jac_method)
    if bounds is None:
        bounds = approx_eigenvalues(hat, problem.eos_v, problem.eos_l,
                                    problem.src)
    row_scale = None
    if approx.variant == "tanh":
        c = hat.cons
        s_m = 1.0 + np.abs(c[:, 0]) + np.abs(c[:, 1])
        s_q = s_m + np.abs(c[:, 2]) + np.abs(c[:, 3])
        s_e = s_m + np.abs(c[:, 4]) + np.abs(c[:, 5])
        row_scale = np.stack([s_m, s_m, s_q, s_q, s_e, s_e], axis=-1)
    _, a_plus, a_minus = apply_abs(approx, amat, bounds, d_array=d_array,
                                   work=work, row_scale=row_scale)
    return amat, a_plus, a_minus, bounds


def _matvec(mats, vecs):
    return (mats @ vecs[..., None])[..., 0]


def _flux_divergence(ext: StateArray, a_plus, a_minus, dx):
    """Per-cell (1/dx) * (A-_{right} dV_right + A+_{left} dV_left)."""
    dv = ext.cons[1:] - ext.cons[:-1]
    return (_matvec(a_minus[1:], dv[1:]) + _matvec(a_plus[:-1], dv[:-1])) / dx


def positivity_fields(cons):
    """Boolean masks of per-cell positivity-set violations."""
    return {
        "mass_v": cons[:, 0] < 0.0,
        "mass_l": cons[:, 1] < 0.0,
        "energy_v": cons[:, 4] < 0.0,
        "energy_l": cons[:, 5] < 0.0,
    }


def _advance_primitives(cons, state_prev: StateArray, problem: Problem):
    """Closure solve for a candidate conserved field; never raises on
    closure failure, returns (StateArray, bad_mask)."""
    clamped = np.array(cons, dtype=float)
    neg = clamped[:, :2] < 0.0
    clamped[:, :2] = np.maximum(clamped[:, :2], 0.0)
    prim, bad = solve_primitives(clamped, problem.eos_v, problem.eos_l,
                                 state_prev.prim[:, IP],
                                 h_fallback=state_prev.prim[:, [IHV, IHL]])
    if np.any(bad):
        prim[bad] = state_prev.prim[bad]
    st = StateArray(np.array(cons, dtype=float), prim)
    return st, bad | neg.any(axis=1)


def explicit_step(state: StateArray, problem: Problem, approx: AbsApproximant,
                  dt, d_array=None, check=True):
    """One forward-Euler Roe-type step.

    With check=True the positivity set and the pressure closure are
    enforced by exceptions; check=False returns (state', bad_closure,
    bounds) for the controller to inspect.
    """
    ext = ghost_states(state, problem)
    _, a_plus, a_minus, bounds = interface_system(ext, problem, approx, d_array)
    s = source_terms(state, problem.src, problem.sat, problem.eos_v, problem.eos_l)
    cons_new = state.cons - dt * _flux_divergence(ext, a_plus, a_minus,
                                                  problem.mesh.dx) + dt * s
    if check:
        viol = positivity_fields(cons_new)
        bad = [(int(i), name) for name, mask in viol.items()
               for i in np.argwhere(mask).ravel()]
        if bad:
            raise PositivityViolation(f"explicit step produced {bad[:6]}",
                                      cells=bad)
        prim, badc = solve_primitives(cons_new, problem.eos_v, problem.eos_l,
                                      state.prim[:, IP],
                                      h_fallback=state.prim[:, [IHV, IHL]])
        if np.any(badc):
            cells = np.argwhere(badc).ravel().tolist()
            raise PressureNewtonDiverged(
                f"closure failed after explicit step in cells {cells[:6]}",
                cells=cells)
        return StateArray(cons_new, prim)
    st, bad = _advance_primitives(cons_new, state, problem)
    return st, bad, bounds


class _BandedAssembler:
    """Index plumbing turning block-tridiagonal (N,6,6) data into the
    scipy solve_banded ab layout; built once per mesh size."""

    def __init__(self, n_cells, nvar=6):
        self.n = n_cells
        self.nvar = nvar
        self.kl = self.ku = 2 * nvar - 1
        rows = n_cells * nvar
        self.shape = (self.kl + self.ku + 1, rows)

        def block_indices(offset):
            cells = np.arange(n_cells - abs(offset))
            r0 = (cells + max(0, -offset)) * nvar
            c0 = (cells + max(0, offset)) * nvar
            i = r0[:, None, None] + np.arange(nvar)[None, :, None]
            j = c0[:, None, None] + np.arange(nvar)[None, None, :]
            i, j = np.broadcast_arrays(i, j)
            return (self.ku + i - j).ravel(), j.ravel()

        self.idx_diag = block_indices(0)
        self.idx_upper = block_indices(+1)
        self.idx_lower = block_indices(-1)

    def solve(self, lower, diag, upper, rhs):
        ab = np.zeros(self.shape)
        ab[self.idx_diag] = diag.ravel()
        ab[self.idx_upper[0], self.idx_upper[1]] = upper.ravel()
        ab[self.idx_lower[0], self.idx_lower[1]] = lower.ravel()
        sol = solve_banded((self.kl, self.ku), ab, rhs.ravel())
        return sol.reshape(self.n, self.nvar)

    def factor(self, lower, diag, upper):
        """LU-factor the banded matrix once for reuse across iterations."""
        ab = np.zeros((2 * self.kl + self.ku + 1, self.shape[1]))
        sub = ab[self.kl:]
        sub[self.idx_diag] = diag.ravel()
        sub[self.idx_upper[0], self.idx_upper[1]] = upper.ravel()
        sub[self.idx_lower[0], self.idx_lower[1]] = lower.ravel()
        lu, piv, info = lapack.dgbtrf(ab, self.kl, self.ku)
        if info != 0:
            raise np.linalg.LinAlgError(f"banded LU failed, info={info}")
        return lu, piv

    def solve_factored(self, fac, rhs):
        lu, piv = fac
        sol, info = lapack.dgbtrs(lu, self.kl, self.ku, rhs.ravel(), piv)
        if info != 0:
            raise np.linalg.LinAlgError(f"banded solve failed, info={info}")
        return sol.reshape(self.n, self.nvar)


_ASSEMBLERS = {}


def _assembler(n_cells):
    if n_cells not in _ASSEMBLERS:
        _ASSEMBLERS[n_cells] = _BandedAssembler(n_cells)
    return _ASSEMBLERS[n_cells]


def implicit_step(state: StateArray, problem: Problem, approx: AbsApproximant,
                  dt, ctl: TimeStepControl, d_array=None, check=True,
                  prev_branch=None, initial_guess=None):
    """Backward-Euler step solved by an inexact Newton iteration.

    Interface matrices in the residual are rebuilt at every Newton
    iterate; the linear Jacobian freezes them (Picard-in-matrix),
    differentiates sources and the identity part, and its factorization
    is reused over a few iterations.  Convergence: mixture-scaled
    residual infinity norm below newton_tol, with a stagnation exit
    when the frozen-coefficient accuracy floor is reached just above
    it.  Raises NewtonDiverged past the iteration cap; positivity is
    checked on the converged iterate.
    """
    dx = problem.mesh.dx
    n = state.n
    v0 = state.cons
    cur = state.copy()
    guess_state = None
    if initial_guess is not None:
        trial, bad_g = _advance_primitives(initial_guess, state, problem)
        if not np.any(bad_g) and not np.any(trial.cons[:, :2] < 0):
            guess_state = trial
    bad = np.zeros(n, dtype=bool)
    stats = NewtonStats()
    eye = np.eye(6)
    any_src = (problem.src.enable_drag or problem.src.enable_wall_friction
               or problem.src.enable_gravity or problem.src.enable_heating)

    # the evaporation branch is selected once per step, at the step-start
    # state: the residual stays smooth in the unknown and the switch
    # advances in time with first-order accuracy, like the rest of the
    # backward-Euler discretization
    branch = boiling_branch(state, problem.src, problem.sat,
                            prev=prev_branch)
    stats.branch = branch

    def residual_scale(cons):
        # both phases share one pressure, so the meaningful magnitude of
        # a phase equation is the mixture's: a vanishing phase cannot be
        # held to an absolute tolerance finer than float64 cancellation
        # in the pressure-scale flux terms
        s = np.empty_like(cons)
        s[:, 0] = s[:, 1] = 1.0 + np.abs(cons[:, 0]) + np.abs(cons[:, 1])
        s[:, 2] = s[:, 3] = 1.0 + np.abs(cons[:, 2]) + np.abs(cons[:, 3])
        s[:, 4] = s[:, 5] = 1.0 + np.abs(cons[:, 4]) + np.abs(cons[:, 5])
        return s

    # wave-speed bounds frozen at the step-start interfaces, so the
    # Hermite nodes and tanh stiffness cannot flip between iterates;
    # the polynomial node data is cached alongside
    poly_work = {}
    bounds0 = interface_system(ghost_states(cur, problem), problem, approx,
                               d_array, work=poly_work)[3]

    def scaled_residual(st: StateArray):
        ext = ghost_states(st, problem)
        _, a_plus, a_minus, bounds = interface_system(ext, problem, approx,
                                                      d_array, bounds=bounds0,
                                                      work=poly_work)
        s = source_terms(st, problem.src, problem.sat,
                         problem.eos_v, problem.eos_l, boiling_mask=branch)
        resid = (st.cons - v0
                 + dt * _flux_divergence(ext, a_plus, a_minus, dx)
                 - dt * s)
        rnorm = float(np.max(np.abs(resid) / residual_scale(st.cons)))
        return resid, rnorm, a_plus, a_minus, bounds

    resid, rnorm, a_plus, a_minus, bounds = scaled_residual(cur)
    if guess_state is not None:
        # extrapolated start is used only when it actually helps
        try:
            resid_g, rnorm_g, ap_g, am_g, b_g = scaled_residual(guess_state)
        except (OutOfValidityBox, PressureNewtonDiverged, NegativeMass,
                NewtonStalled):
            rnorm_g = np.inf
        if rnorm_g < rnorm:
            cur = guess_state
            resid, rnorm, a_plus, a_minus, bounds = (resid_g, rnorm_g,
                                                     ap_g, am_g, b_g)
    asm = _assembler(n)
    fac = None
    rnorm_at_factor = np.inf
    rnorm_init = rnorm
    best_overall = None
    stall = 0
    for it in range(ctl.newton_max + 1):
        stats.bounds = bounds
        stats.iterations = it
        stats.residual = rnorm
        if best_overall is None or rnorm < 0.98 * best_overall[1]:
            best_overall = (cur, rnorm, bad)
            stall = 0
        else:
            stall += 1
        if rnorm < ctl.newton_tol:
            stats.converged = True
            break
        # frozen-coefficient accuracy floor: progress has stopped (or the
        # cap is reached) just above the tolerance; accept the best
        # iterate rather than grind or bail
        near = best_overall[1] < 10.0 * ctl.newton_tol
        if near and (stall >= 4 or it == ctl.newton_max):
            cur, rnorm, bad = best_overall
            stats.residual = rnorm
            stats.converged = True
            break
        hopeless = it >= 8 and best_overall[1] > 0.3 * rnorm_init
        if it == ctl.newton_max or hopeless:
            stats.converged = False
            if check:
                raise NewtonDiverged(
                    f"implicit Newton at residual {rnorm:.3e} after "
                    f"{it} iterations")
            break

        # refresh the frozen-coefficient matrix sparingly: the Picard
        # part limits contraction regardless, so rebuilding every
        # iteration buys little
        if fac is None or (it % 4 == 0 and rnorm > 0.25 * rnorm_at_factor):
            r = dt / dx
            diag = eye[None] + r * (a_plus[:-1] - a_minus[1:])
            if any_src:
                ds = source_jacobian_fd(cur, problem.src, problem.sat,
                                        problem.eos_v, problem.eos_l,
                                        boiling_mask=branch)
                diag = diag - dt * ds
            dg_in, dg_out = _ghost_jacobians(cur, problem)
            diag[0] -= r * (a_plus[0] @ dg_in)
            diag[-1] += r * (a_minus[-1] @ dg_out)
            lower = -r * a_plus[1:-1]
            upper = r * a_minus[1:-1]
            fac = asm.factor(lower, diag, upper)
            rnorm_at_factor = rnorm
        delta = asm.solve_factored(fac, resid)

        # nonmonotone damping: the max-norm residual may rise through a
        # hump on the way to quadratic convergence, so full steps are
        # accepted inside a generous window and halved only on blow-up;
        # trials that leave EOS/saturation validity count as infinitely
        # bad instead of ending the run
        step = 1.0
        best = None
        for _ in range(8):
            trial, bad_t = _advance_primitives(cur.cons - step * delta, cur,
                                               problem)
            try:
                resid_t, rnorm_t, ap_t, am_t, bt = scaled_residual(trial)
            except (OutOfValidityBox, PressureNewtonDiverged, NegativeMass,
                    NewtonStalled):
                step *= 0.5
                continue
            if best is None or rnorm_t < best[1]:
                best = (trial, rnorm_t, resid_t, ap_t, am_t, bt, bad_t)
            if rnorm_t <= 4.0 * rnorm:
                best = (trial, rnorm_t, resid_t, ap_t, am_t, bt, bad_t)
                break
            step *= 0.5
        if best is None:
            stats.converged = False
            if check:
                raise NewtonDiverged(
                    "every damped trial left the model's validity range")
            break
        cur, rnorm, resid, a_plus, a_minus, bounds, bad = (
            best[0], best[1], best[2], best[3], best[4], best[5], best[6])

    stats.bad_cells = np.argwhere(bad).ravel().tolist()
    if check:
        viol = positivity_fields(cur.cons)
        cells = [(int(i), name) for name, mask in viol.items()
                 for i in np.argwhere(mask).ravel()]
        if cells:
            raise PositivityViolation(
                f"implicit step produced {cells[:6]}", cells=cells)
        if stats.bad_cells:
            raise PressureNewtonDiverged(
                f"closure failed in cells {stats.bad_cells[:6]}",
                cells=stats.bad_cells)
    return cur, stats


def dt_from_amax(a_max, dx, cfl):
    """Time step dt = CFL dx / |a_max|."""
    if a_max <= 0:
        raise DegenerateField("all wave speeds vanished; no CFL step exists")
    return cfl * dx / a_max


def compute_dt(state: StateArray, problem: Problem, cfl):
    """CFL step from the fastest signal speed over the cell states."""
    bounds = approx_eigenvalues(state, problem.eos_v, problem.eos_l,
                                problem.src)
    a = float(np.max(bounds.a_signal))
    return dt_from_amax(a, problem.mesh.dx, cfl)


@dataclass
class RunStats:
    status: str = "completed"
    steps: int = 0
    t_reached: float = 0.0
    newton_iterations: int = 0
    dt_final: float = 0.0
    dt_reductions: int = 0
    problematic_steps: int = 0
    resolve_iterations: list = field(default_factory=list)
    diagnostic: str = ""
    wall_time: float = 0.0

    @property
    def problematic_fraction(self):
        return self.problematic_steps / self.steps if self.steps else 0.0

    @property
    def mean_resolve_iterations(self):
        if not self.resolve_iterations:
            return 0.0
        return float(np.mean(self.resolve_iterations))

    def as_dict(self):
        return {
            "status": self.status,
            "steps": self.steps,
            "t_reached": self.t_reached,
            "newton_iterations": self.newton_iterations,
            "dt_final": self.dt_final,
            "dt_reductions": self.dt_reductions,
            "problematic_steps": self.problematic_steps,
            "problematic_step_fraction": self.problematic_fraction,
            "mean_resolve_iterations": self.mean_resolve_iterations,
            "diagnostic": self.diagnostic,
            "wall_time": self.wall_time,
        }


def run(problem: Problem, state: StateArray, approx: AbsApproximant,
        ctl: TimeStepControl, t_end, mode="explicit",
        positivity_control=False, snapshot_cb: Optional[Callable] = None,
        snapshot_every: int = 0, max_steps: int = 10**7):
    """Advance to t_end; returns (final_state, RunStats).

    Breakdown errors (defective matrices, positivity, closure failures)
    terminate the run with a diagnostic instead of propagating, so the
    exact-eigendecomposition route degrades into a reported failure.
    Newton divergence triggers time-step reduction; recovered steps grow
    dt back geometrically toward the CFL target.
    """
    from .positivity import PositivityLedger, controlled_step

    stats = RunStats()
    ledger = PositivityLedger(problem.mesh.n_cells)
    t = 0.0
    dt_cap = np.inf
    branch = None
    prev_cons = None
    prev_dt = None
    t_start = time.perf_counter()
    try:
        while t < t_end * (1.0 - 1e-12) and stats.steps < max_steps:
            dt_target = compute_dt(state, problem, ctl.cfl)
            dt_eff = min(dt_target, dt_cap)
            if dt_eff < ctl.dt_min:
                raise Aborted(
                    f"required step {dt_eff:.3e} fell below dt_min="
                    f"{ctl.dt_min:g}")
            dt = min(dt_eff, t_end - t)
            if positivity_control:
                state, info = controlled_step(state, problem, approx, dt,
                                              ctl, ledger,
                                              prev_branch=branch)
                dt_used = info["dt_used"]
                branch = info["branch"]
                effort = info["newton_iterations"] / max(1, 1 + info["resolves"])
                stats.newton_iterations += info["newton_iterations"]
                if info["dt_reductions"]:
                    dt_cap = dt_used
            else:
                dt_used, reductions = dt, 0
                effort = 0
                while True:
                    try:
                        if mode == "implicit":
                            guess = None
                            if prev_cons is not None and prev_dt:
                                # linear-in-time predictor for the Newton start
                                guess = state.cons + (dt_used / prev_dt) * (
                                    state.cons - prev_cons)
                            prev_cons = state.cons.copy()
                            state, nst = implicit_step(state, problem, approx,
                                                       dt_used, ctl,
                                                       prev_branch=branch,
                                                       initial_guess=guess)
                            stats.newton_iterations += nst.iterations
                            effort = nst.iterations
                            branch = nst.branch
                            prev_dt = dt_used
                        else:
                            state = explicit_step(state, problem, approx,
                                                  dt_used)
                        break
                    except NewtonDiverged:
                        # gentler than the positivity controller's /10:
                        # retry quickly and let the effort control settle
                        dt_used /= 3.0
                        reductions += 1
                        if dt_used < ctl.dt_min:
                            raise Aborted(
                                f"dt fell below dt_min={ctl.dt_min:g} "
                                "without Newton recovery")
                stats.dt_reductions += reductions
                if reductions:
                    dt_cap = dt_used
            t += dt_used
            stats.steps += 1
            stats.dt_final = dt_used
            # effort-controlled step size: stay at the CFL target while
            # Newton converges comfortably, back off below it during
            # stiff transients instead of thrashing on failed solves
            if mode == "implicit" or positivity_control:
                if effort > 8:
                    dt_cap = dt_used * max(0.3, 8.0 / effort)
                elif effort < 4:
                    dt_cap = (dt_cap * 1.2 if np.isfinite(dt_cap)
                              else dt_used * 1.2)
                else:
                    dt_cap = dt_used * 1.05
            else:
                dt_cap = (dt_cap * ctl.dt_growth
                          if np.isfinite(dt_cap) else np.inf)
            if snapshot_cb and snapshot_every and stats.steps % snapshot_every == 0:
                snapshot_cb(t, state)
    except Aborted as exc:
        stats.status = "aborted"
        stats.diagnostic = str(exc)
    except TwoFluidError as exc:
        stats.status = "breakdown"
        stats.diagnostic = f"{type(exc).__name__}: {exc}"
    stats.t_reached = t
    stats.wall_time = time.perf_counter() - t_start
    if positivity_control:
        stats.problematic_steps = ledger.problematic_steps
        stats.resolve_iterations = list(ledger.resolve_iterations)
        stats.dt_reductions = ledger.dt_reductions
    if snapshot_cb:
        snapshot_cb(t, state)
    return state, stats
