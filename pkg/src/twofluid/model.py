"""1-D six-equation two-fluid model assembly.

Conserved vector per cell (SI):

    V = (m_v, m_l, q_v, q_l, e_v, e_l)
      = (a_v r_v, a_l r_l, a_v r_v u_v, a_l r_l u_l, a_v r_v E_v, a_l r_l E_l)

Primitive cache per cell: (alpha_v, p, u_v, u_l, h_v, h_l).

The quasi-linear form is written in the conserved variables,

    B(V) dV/dt + C(V) dV/dx = S(V),   A = B^-1 C,

so the two mass rows of A are exact unit rows (mass flux q_k is linear
in V) and interior flux differences telescope: mass conservation is
automatism, not a tuning target.  C collects the conservative flux
Jacobian plus the genuinely non-conservative products a_k dp/dx and
D_pi d(alpha)/dx; B carries the p * d(alpha_k)/dt coupling of the energy
equations as a rank-one perturbation of the identity.

Both an analytic and a column-wise finite-difference assembly of A are
provided; they must agree and the test-suite holds them to that.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .eos import PhaseEos
from .errors import NegativeMass, OutOfValidityBox, PressureNewtonDiverged

# conserved / primitive column indices
MV, ML, QV, QL, EV, EL = range(6)
IA, IP, IUV, IUL, IHV, IHL = range(6)

# relative mass below which a phase is treated as absent from a cell
PHASE_FLOOR = 1e-12


@dataclass
class SourceConfig:
    """Closure constants and switches for the right-hand side terms."""

    delta: float = 1.1          # Bestion interfacial-pressure coefficient, >= 1
    kappa: float = 1e-4         # alpha floor inside coefficient evaluations
    drag_cd: float = 0.44
    drag_ri: float = 5e-4       # bubble radius in a_i = 3 alpha_v / r_i
    wall_f: float = 0.017
    wall_dh: float = 0.628
    gravity: float = 0.0        # signed, along +x
    heat_q: float = 0.0         # volumetric wall heat concentration [W/m^3]
    enable_drag: bool = False
    enable_wall_friction: bool = False
    enable_gravity: bool = False
    enable_heating: bool = False

    def __post_init__(self):
        if self.delta < 1.0:
            raise ValueError("Bestion delta must be >= 1 for hyperbolicity")
        for name in ("drag_ri", "wall_dh"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")

    def with_flags(self, **kw):
        return replace(self, **kw)


@dataclass
class StateArray:
    """Cell-block of states: conserved (N,6) plus primitive cache (N,6).

    Treated as immutable once built; densities are memoized per instance.
    """

    cons: np.ndarray
    prim: np.ndarray

    def __post_init__(self):
        self.cons = np.atleast_2d(np.asarray(self.cons, dtype=float))
        self.prim = np.atleast_2d(np.asarray(self.prim, dtype=float))
        self._rho = None

    @property
    def n(self):
        return self.cons.shape[0]

    def copy(self):
        return StateArray(self.cons.copy(), self.prim.copy())

    def densities(self, eos_v: PhaseEos, eos_l: PhaseEos, check=False):
        if self._rho is None:
            rv = eos_v.density(self.prim[:, IP], self.prim[:, IHV], check=check)
            rl = eos_l.density(self.prim[:, IP], self.prim[:, IHL], check=check)
            self._rho = (rv, rl)
        return self._rho


def conserved_from_primitives(alpha_v, p, u_v, u_l, h_v, h_l, eos_v, eos_l,
                              check=True) -> StateArray:
    """Exact algebraic map primitives -> conserved; E_k = h_k + u_k^2/2 - p/rho_k."""
    alpha_v, p, u_v, u_l, h_v, h_l = np.broadcast_arrays(
        *(np.atleast_1d(np.asarray(a, dtype=float))
          for a in (alpha_v, p, u_v, u_l, h_v, h_l)))
    if np.any(alpha_v < 0) or np.any(alpha_v > 1):
        raise ValueError("alpha_v outside [0, 1]")
    rho_v = eos_v.density(p, h_v, check=check)
    rho_l = eos_l.density(p, h_l, check=check)
    alpha_l = 1.0 - alpha_v
    m_v = alpha_v * rho_v
    m_l = alpha_l * rho_l
    e_spec_v = h_v + 0.5 * u_v**2 - p / rho_v
    e_spec_l = h_l + 0.5 * u_l**2 - p / rho_l
    cons = np.stack([m_v, m_l, m_v * u_v, m_l * u_l,
                     m_v * e_spec_v, m_l * e_spec_l], axis=-1)
    prim = np.stack([alpha_v, p, u_v, u_l, h_v, h_l], axis=-1)
    return StateArray(cons, prim)


def _phase_g(cons, k):
    """g_k = E_k - u_k^2/2 for present cells, with present mask."""
    m = cons[:, MV + k]
    q = cons[:, QV + k]
    e = cons[:, EV + k]
    total = cons[:, MV] + cons[:, ML]
    present = m > PHASE_FLOOR * np.maximum(total, 1e-300)
    ms = np.where(present, m, 1.0)
    u = np.where(present, q / ms, 0.0)
    g = np.where(present, e / ms - 0.5 * u**2, 0.0)
    return present, u, g


def solve_primitives(cons, eos_v, eos_l, p_guess, h_fallback=None,
                     rtol=1e-13, max_iter=60, negative="raise"):
    """Solve the volume closure a_v + a_l = 1 for p by Newton iteration.

    Returns (prim, bad) where bad marks cells whose iteration failed to
    converge or whose converged state is outside an EOS validity box.
    Negative partial masses raise by default (state corruption, not a
    closure problem); negative='clamp' evaluates them as vanished
    phases, which is what finite-difference probe states need.

    h_fallback (N,2) supplies enthalpies for absent phases (the conserved
    vector carries no information about them).
    """
    cons = np.atleast_2d(np.asarray(cons, dtype=float))
    n = cons.shape[0]
    if np.any(cons[:, MV] < 0) or np.any(cons[:, ML] < 0):
        if negative == "raise":
            bad = np.argwhere((cons[:, MV] < 0) | (cons[:, ML] < 0)).ravel()
            raise NegativeMass(
                f"negative partial mass in cells {bad.tolist()[:8]}")
        cons = cons.copy()
        cons[:, :2] = np.maximum(cons[:, :2], 0.0)
    if np.any(cons[:, MV] + cons[:, ML] <= 0):
        raise NegativeMass("cell with zero total mass")

    pres_v, u_v, g_v = _phase_g(cons, 0)
    pres_l, u_l, g_l = _phase_g(cons, 1)

    p = np.array(np.broadcast_to(np.asarray(p_guess, dtype=float), (n,)),
                 dtype=float)
    p = np.maximum(p, 1.0)
    m_v, m_l = cons[:, MV], cons[:, ML]

    # placeholder g for absent phases keeps the vectorized EOS calls off
    # singular arguments; those lanes are masked out of the closure
    g_v = np.where(pres_v, g_v, 1.0)
    g_l = np.where(pres_l, g_l, 1.0)

    converged = np.zeros(n, dtype=bool)
    polish = 0
    for _ in range(max_iter):
        rho_v = eos_v.density_pg(p, g_v)
        rho_l = eos_l.density_pg(p, g_l)
        r = (np.where(pres_v, m_v / rho_v, 0.0)
             + np.where(pres_l, m_l / rho_l, 0.0) - 1.0)
        converged = np.abs(r) < rtol
        if converged.all():
            # one extra update lands on the fixed point to roundoff, so
            # the result no longer depends on the warm start
            if polish:
                break
            polish += 1
        dr = -(np.where(pres_v, m_v * eos_v.drho_dp_pg(p, g_v) / rho_v**2, 0.0)
               + np.where(pres_l, m_l * eos_l.drho_dp_pg(p, g_l) / rho_l**2, 0.0))
        dr = np.where(np.abs(dr) > 1e-300, dr, -1e-300)
        dp = -r / dr
        # keep the iterate positive; halving toward zero is enough here
        p_new = p + dp
        p = np.where(p_new > 0.0, p_new, 0.5 * p)

    bad = ~converged

    h_v = np.where(pres_v, eos_v.enthalpy_from_pg(p, g_v), 0.0)
    h_l = np.where(pres_l, eos_l.enthalpy_from_pg(p, g_l), 0.0)
    if h_fallback is not None:
        h_v = np.where(pres_v, h_v, h_fallback[:, 0])
        h_l = np.where(pres_l, h_l, h_fallback[:, 1])
    rho_v = eos_v.density(p, h_v, check=False)
    rho_l = eos_l.density(p, h_l, check=False)
    alpha_v = np.where(pres_v, m_v / rho_v, 0.0)

    ok_v = eos_v.box.contains(p, h_v) | ~pres_v
    ok_l = eos_l.box.contains(p, h_l) | ~pres_l
    bad |= ~(ok_v & ok_l)

    prim = np.stack([alpha_v, p, u_v, u_l, h_v, h_l], axis=-1)
    return prim, bad


def primitives_from_conserved(state_or_cons, eos_v, eos_l, p_guess=None) -> StateArray:
    """Raising wrapper around solve_primitives; fills the primitive cache."""
    if isinstance(state_or_cons, StateArray):
        cons = state_or_cons.cons
        if p_guess is None:
            p_guess = state_or_cons.prim[:, IP]
        h_fb = state_or_cons.prim[:, [IHV, IHL]]
    else:
        cons = np.atleast_2d(np.asarray(state_or_cons, dtype=float))
        h_fb = None
    if p_guess is None:
        p_guess = 1e5
    prim, bad = solve_primitives(cons, eos_v, eos_l, p_guess, h_fallback=h_fb)
    if np.any(bad):
        cells = np.argwhere(bad).ravel().tolist()
        raise PressureNewtonDiverged(
            f"pressure closure failed in cells {cells[:8]}", cells=cells)
    return StateArray(np.array(cons, dtype=float), prim)


def bestion_term(alpha_v, rho_v, rho_l, u_r, delta):
    """Interfacial pressure default D_p^i = delta a_v a_l rho~ u_r^2 >= 0."""
    alpha_v = np.asarray(alpha_v, dtype=float)
    alpha_l = 1.0 - alpha_v
    denom = alpha_v * rho_l + alpha_l * rho_v
    rho_t = np.where(denom > 0, rho_v * rho_l / np.where(denom > 0, denom, 1.0), 0.0)
    return delta * alpha_v * alpha_l * rho_t * np.asarray(u_r, dtype=float) ** 2


def flux_vector(state: StateArray, eos_v, eos_l):
    """Conservative part of the flux; non-conservative products excluded."""
    c, w = state.cons, state.prim
    alpha_v, p = w[:, IA], w[:, IP]
    u_v, u_l = w[:, IUV], w[:, IUL]
    f = np.empty_like(c)
    f[:, MV] = c[:, QV]
    f[:, ML] = c[:, QL]
    f[:, QV] = c[:, QV] * u_v
    f[:, QL] = c[:, QL] * u_l
    f[:, EV] = u_v * (c[:, EV] + alpha_v * p)
    f[:, EL] = u_l * (c[:, EL] + (1.0 - alpha_v) * p)
    return f


def _closure_gradients(state: StateArray, eos_v, eos_l):
    """Total derivatives of p and alpha_v w.r.t. the conserved vector.

    Implicit differentiation of the volume closure; absent phases keep
    their cached enthalpy, so their g-sensitivities are zero.
    """
    c, w = state.cons, state.prim
    n = c.shape[0]
    p = w[:, IP]
    grad_p = np.zeros((n, 6))
    grad_g = {}
    rho = {}
    rho_p = {}
    rho_g = {}
    g_cols = np.zeros((n, 6))

    for k, eos in ((0, eos_v), (1, eos_l)):
        present, u, g = _phase_g(c, k)
        m = c[:, MV + k]
        ms = np.where(present, m, 1.0)
        e_spec = np.where(present, c[:, EV + k] / ms, 0.0)
        h = w[:, IHV + k]
        g_cache = h - p / np.where(present, eos.density(p, h, check=False), 1.0)
        g_use = np.where(present, g, g_cache)
        rho[k] = eos.density_pg(p, g_use)
        rho_p[k] = eos.drho_dp_pg(p, g_use)
        rho_g[k] = eos.drho_dg(p, g_use)

        dg = np.zeros((n, 6))
        dg[:, MV + k] = np.where(present, (u**2 - e_spec) / ms, 0.0)
        dg[:, QV + k] = np.where(present, -u / ms, 0.0)
        dg[:, EV + k] = np.where(present, 1.0 / ms, 0.0)
        grad_g[k] = dg

        # d(closure)/dV through this phase: m_k / rho_k
        g_cols[:, MV + k] += 1.0 / rho[k]
        g_cols -= (m / rho[k] ** 2 * rho_g[k])[:, None] * dg

    g_p = -(c[:, MV] * rho_p[0] / rho[0] ** 2 + c[:, ML] * rho_p[1] / rho[1] ** 2)
    g_p = np.where(np.abs(g_p) > 1e-300, g_p, -1e-300)
    grad_p = -g_cols / g_p[:, None]

    grad_rho_v = rho_p[0][:, None] * grad_p + rho_g[0][:, None] * grad_g[0]
    grad_alpha = np.zeros((n, 6))
    grad_alpha[:, MV] = 1.0 / rho[0]
    grad_alpha -= (c[:, MV] / rho[0] ** 2)[:, None] * grad_rho_v
    return grad_p, grad_alpha, rho[0], rho[1]


def _assemble_bc(state: StateArray, grad_p, grad_alpha, rho_v, rho_l,
                 src: SourceConfig, dflux=None, eos_v=None, eos_l=None):
    """Build C of the quasi-linear form and the energy-row coupling w.

    The time-derivative matrix is B = I + (e_EV - e_EL) w^T with
    w = p grad_alpha, so A = B^-1 C reduces to a rank-one row update of
    C (Sherman-Morrison); mass and momentum rows of A equal those of C
    bitwise.  dflux, when given, replaces the analytic flux Jacobian.
    """
    c, w = state.cons, state.prim
    n = c.shape[0]
    alpha_v, p = w[:, IA], w[:, IP]
    u_v, u_l = w[:, IUV], w[:, IUL]

    cmat = np.zeros((n, 6, 6))
    if dflux is None:
        pres_v, _, _ = _phase_g(c, 0)
        pres_l, _, _ = _phase_g(c, 1)
        du_v = np.zeros((n, 6))
        ms_v = np.where(pres_v, c[:, MV], 1.0)
        du_v[:, QV] = np.where(pres_v, 1.0 / ms_v, 0.0)
        du_v[:, MV] = np.where(pres_v, -u_v / ms_v, 0.0)
        du_l = np.zeros((n, 6))
        ms_l = np.where(pres_l, c[:, ML], 1.0)
        du_l[:, QL] = np.where(pres_l, 1.0 / ms_l, 0.0)
        du_l[:, ML] = np.where(pres_l, -u_l / ms_l, 0.0)

        cmat[:, MV, QV] = 1.0
        cmat[:, ML, QL] = 1.0
        cmat[:, QV, MV] = -u_v**2
        cmat[:, QV, QV] = 2.0 * u_v
        cmat[:, QL, ML] = -u_l**2
        cmat[:, QL, QL] = 2.0 * u_l
        cmat[:, EV, :] = ((c[:, EV] + alpha_v * p)[:, None] * du_v
                          + u_v[:, None] * (p[:, None] * grad_alpha
                                            + alpha_v[:, None] * grad_p))
        cmat[:, EV, EV] += u_v
        alpha_l = 1.0 - alpha_v
        cmat[:, EL, :] = ((c[:, EL] + alpha_l * p)[:, None] * du_l
                          + u_l[:, None] * (-p[:, None] * grad_alpha
                                            + alpha_l[:, None] * grad_p))
        cmat[:, EL, EL] += u_l
    else:
        cmat[:] = dflux

    # non-conservative products, alpha floored only inside these coefficients
    av = np.clip(alpha_v, src.kappa, 1.0 - src.kappa)
    al = 1.0 - av
    dpi = bestion_term(av, rho_v, rho_l, u_v - u_l, src.delta)
    cmat[:, QV, :] += av[:, None] * grad_p + dpi[:, None] * grad_alpha
    cmat[:, QL, :] += al[:, None] * grad_p - dpi[:, None] * grad_alpha

    w_row = p[:, None] * grad_alpha
    return w_row, cmat


def _rank_one_time_inverse(w_row, cmat):
    """A = (I + (e_EV - e_EL) w^T)^-1 C applied as a row update."""
    denom = 1.0 + w_row[:, EV] - w_row[:, EL]
    wc = np.einsum("nj,njk->nk", w_row, cmat) / denom[:, None]
    amat = cmat.copy()
    amat[:, EV, :] -= wc
    amat[:, EL, :] += wc
    return amat


def quasilinear_matrix(state: StateArray, eos_v, eos_l, src: SourceConfig):
    """Analytic quasi-linear matrix A(V) = B^-1 C, shape (N, 6, 6)."""
    grad_p, grad_alpha, rho_v, rho_l = _closure_gradients(state, eos_v, eos_l)
    w_row, cmat = _assemble_bc(state, grad_p, grad_alpha, rho_v, rho_l, src)
    return _rank_one_time_inverse(w_row, cmat)


def quasilinear_matrix_fd(state: StateArray, eos_v, eos_l, src: SourceConfig):
    """Finite-difference reference for quasilinear_matrix.

    Column-wise centred differences of the flux and of the closure maps
    p(V), alpha_v(V) with step 1e-7 * (1 + |V_j|).
    """
    c = state.cons
    n = c.shape[0]
    h_fb = state.prim[:, [IHV, IHL]]

    def closure(cv):
        prim, bad = solve_primitives(cv, eos_v, eos_l, state.prim[:, IP],
                                     h_fallback=h_fb, negative="clamp")
        if np.any(bad):
            raise PressureNewtonDiverged("FD probe state failed closure",
                                         cells=np.argwhere(bad).ravel().tolist())
        st = StateArray(cv, prim)
        return flux_vector(st, eos_v, eos_l), prim[:, IP], prim[:, IA]

    dflux = np.zeros((n, 6, 6))
    grad_p = np.zeros((n, 6))
    grad_alpha = np.zeros((n, 6))
    for j in range(6):
        h = 1e-7 * (1.0 + np.abs(c[:, j]))
        cp = c.copy()
        cm = c.copy()
        cp[:, j] += h
        cm[:, j] -= h
        f_p, p_p, a_p = closure(cp)
        f_m, p_m, a_m = closure(cm)
        dflux[:, :, j] = (f_p - f_m) / (2.0 * h[:, None])
        grad_p[:, j] = (p_p - p_m) / (2.0 * h)
        grad_alpha[:, j] = (a_p - a_m) / (2.0 * h)

    rho_v, rho_l = state.densities(eos_v, eos_l)
    w_row, cmat = _assemble_bc(state, grad_p, grad_alpha, rho_v, rho_l, src,
                               dflux=dflux)
    return _rank_one_time_inverse(w_row, cmat)


def jacobian(state: StateArray, src: SourceConfig, eos_v, eos_l, method="analytic"):
    """Quasi-linear interface matrix; 'analytic' or 'fd' assembly."""
    if method == "analytic":
        return quasilinear_matrix(state, eos_v, eos_l, src)
    if method == "fd":
        return quasilinear_matrix_fd(state, eos_v, eos_l, src)
    raise ValueError(f"unknown jacobian method {method!r}")


def roe_average(left: StateArray, right: StateArray, eos_v, eos_l) -> StateArray:
    """Interface linearization state.

    Arithmetic mean of (alpha_v, p); velocities and enthalpies averaged
    with sqrt(alpha_k rho_k) weights.  Consistent: hat(V, V) = V.
    """
    wl, wr = left.prim, right.prim
    alpha = 0.5 * (wl[:, IA] + wr[:, IA])
    p = 0.5 * (wl[:, IP] + wr[:, IP])
    out_u = []
    for k in (0, 1):
        a = np.sqrt(np.maximum(left.cons[:, MV + k], 0.0))
        b = np.sqrt(np.maximum(right.cons[:, MV + k], 0.0))
        s = a + b
        both_gone = s <= 0
        a = np.where(both_gone, 0.5, a)
        b = np.where(both_gone, 0.5, b)
        s = np.where(both_gone, 1.0, s)
        u = (a * wl[:, IUV + k] + b * wr[:, IUV + k]) / s
        h = (a * wl[:, IHV + k] + b * wr[:, IHV + k]) / s
        out_u.append((u, h))
    (u_v, h_v), (u_l, h_l) = out_u
    return conserved_from_primitives(alpha, p, u_v, u_l, h_v, h_l,
                                     eos_v, eos_l, check=False)


def source_terms(state: StateArray, src: SourceConfig, sat, eos_v=None, eos_l=None,
                 boiling_mask=None):
    """Right-hand side per unit volume, shape (N, 6).

    Heating follows the boiling-channel closure: below liquid saturation
    all wall heat goes to the liquid; at or above saturation it drives
    evaporation Gamma = q / L.  Interfacial velocity is u_l, interfacial
    enthalpies are the saturation values.  boiling_mask overrides the
    switch (the source Jacobian freezes the branch so finite differences
    do not straddle the discontinuity).
    """
    c, w = state.cons, state.prim
    n = c.shape[0]
    s = np.zeros((n, 6))
    alpha_v, p = w[:, IA], w[:, IP]
    alpha_l = 1.0 - alpha_v
    u_v, u_l = w[:, IUV], w[:, IUL]
    u_r = u_v - u_l

    if src.enable_heating:
        if sat is None:
            raise ValueError("heating enabled but no saturation table given")
        h_v_sat, h_l_sat, _, _ = sat.lookup(p)
        lat = h_v_sat - h_l_sat
        boiling = (w[:, IHL] >= h_l_sat) if boiling_mask is None else boiling_mask
        gamma = np.where(boiling, src.heat_q / lat, 0.0)
        q_wall_l = np.where(boiling, 0.0, src.heat_q)
        s[:, MV] += gamma
        s[:, ML] -= gamma
        s[:, QV] += gamma * u_l          # u^i = u_l
        s[:, QL] -= gamma * u_l
        s[:, EV] += gamma * (0.5 * u_v**2 + h_v_sat)
        s[:, EL] -= gamma * (0.5 * u_l**2 + h_l_sat)
        s[:, EL] += q_wall_l

    if src.enable_drag:
        rho_v, rho_l = state.densities(eos_v, eos_l)
        rho_m = alpha_v * rho_v + alpha_l * rho_l
        a_i = 3.0 * alpha_v / src.drag_ri
        f_v = -0.125 * src.drag_cd * a_i * rho_m * np.abs(u_r) * u_r
        s[:, QV] += f_v
        s[:, QL] -= f_v
        s[:, EV] += f_v * u_l
        s[:, EL] -= f_v * u_l

    if src.enable_wall_friction:
        rho_v, rho_l = state.densities(eos_v, eos_l)
        # opposes each phase's motion; |u|u carries the direction
        coef = 0.5 * src.wall_f / src.wall_dh
        s[:, QV] -= coef * alpha_v * rho_v * np.abs(u_v) * u_v
        s[:, QL] -= coef * alpha_l * rho_l * np.abs(u_l) * u_l

    if src.enable_gravity:
        rho_v, rho_l = state.densities(eos_v, eos_l)
        g = src.gravity
        s[:, QV] += alpha_v * rho_v * g
        s[:, QL] += alpha_l * rho_l * g
        s[:, EV] += alpha_v * rho_v * g * u_v
        s[:, EL] += alpha_l * rho_l * g * u_l

    return s


def boiling_branch(state: StateArray, src: SourceConfig, sat, prev=None,
                   band=1e-4):
    """Evaporation-switch mask for the h_l >= h_l_sat(p) branch.

    Ignition requires a small overshoot (band * latent heat) and cells
    stay on the branch while h_l >= h_l_sat - noise.  On the boiling
    branch the liquid-enthalpy drift is positive above saturation and
    negative below, so this places the hysteresis on the self-sustaining
    side: cells sitting exactly at saturation (the saturated case's
    initial state) heat briefly, ignite once, and never chatter.
    """
    if not src.enable_heating or sat is None:
        return None
    h_v_sat, h_l_sat, _, _ = sat.lookup(state.prim[:, IP])
    lat = h_v_sat - h_l_sat
    h_l = state.prim[:, IHL]
    on = h_l >= h_l_sat + band * lat
    if prev is not None:
        hold = prev & (h_l >= h_l_sat - 1e-6 * lat)
        on = on | hold
    return on


def source_jacobian_fd(state: StateArray, src: SourceConfig, sat, eos_v, eos_l,
                       boiling_mask=None):
    """Columnwise FD of source_terms w.r.t. the conserved vector.

    The evaporation switch is frozen (to boiling_mask, or to the base
    state's branch) so the probes differentiate a smooth function.
    """
    c = state.cons
    n = c.shape[0]
    h_fb = state.prim[:, [IHV, IHL]]
    mask = boiling_mask if boiling_mask is not None else \
        boiling_branch(state, src, sat)
    out = np.zeros((n, 6, 6))
    for j in range(6):
        h = 1e-7 * (1.0 + np.abs(c[:, j]))
        sp = []
        for sign in (1.0, -1.0):
            cv = c.copy()
            cv[:, j] += sign * h
            prim, bad = solve_primitives(cv, eos_v, eos_l, state.prim[:, IP],
                                         h_fallback=h_fb, negative="clamp")
            if np.any(bad):
                # fall back to the base primitives for failed probe cells
                prim[bad] = state.prim[bad]
            sp.append(source_terms(StateArray(cv, prim), src, sat, eos_v,
                                   eos_l, boiling_mask=mask))
        out[:, :, j] = (sp[0] - sp[1]) / (2.0 * h[:, None])
    return out
