"""Eigenvalue bounds and eigenstructure diagnostics of the interface matrix.

The closed-form estimates follow the first-order-in-slip expansion of the
two-fluid characteristic polynomial: a fast acoustic pair, a void-wave
pair around the cross-weighted material velocity, and the two trivial
material velocities.  The mixture 'characteristic' speed is

    a_m^2 = (a_v r_l + a_l r_v) * g2,
    g2    = c_v^2 c_l^2 / (a_v r_l c_l^2 + a_l r_v c_v^2),

the unique dimensionally consistent combination of the published a_m и
g factors; it reproduces the numeric spectrum to well inside the stated
O(xi^2) envelope and tends to the pure-liquid sound speed as a_v -> 0.

The numeric route is a full batched eigendecomposition with condition
number; it is the cross-check and the collapse diagnostic, never a hot
path.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import EigSolverFailure, NonHyperbolic
from .model import (IA, IHL, IHV, IP, IUL, IUV, SourceConfig, StateArray,
                    bestion_term)

# fraction by which the extremal bounds are widened before polynomial
# normalization, so roundoff never puts a scaled eigenvalue outside [-1, 1]
BOUND_INFLATION = 0.02


@dataclass
class EigenBounds:
    """Per-state wave-speed bounds; all fields are arrays of equal length."""

    lam_min: np.ndarray        # inflated smallest eigenvalue
    lam_max: np.ndarray        # inflated largest eigenvalue
    lam_int_max: np.ndarray    # largest-magnitude intermediate eigenvalue
    a_max: np.ndarray          # max(|lam_min|, lam_max) after inflation
    a_signal: np.ndarray       # uninflated max |eigenvalue| (CFL speed)
    lam_small: np.ndarray      # smallest nonzero |eigenvalue| estimate
    estimates: np.ndarray      # (N, 6): fast-, fast+, void-, void+, u_v, u_l
    source: str = "approximate"

    @property
    def n(self):
        return self.lam_min.shape[0]


def mixture_speeds(alpha_v, rho_v, rho_l, c_v, c_l):
    """Return (a_m, c_m, g2): characteristic and mixture sound speeds."""
    alpha_v = np.asarray(alpha_v, dtype=float)
    alpha_l = 1.0 - alpha_v
    g2 = c_v**2 * c_l**2 / (alpha_v * rho_l * c_l**2 + alpha_l * rho_v * c_v**2)
    a_m = np.sqrt((alpha_v * rho_l + alpha_l * rho_v) * g2)
    c_m = np.sqrt((alpha_l * rho_v + alpha_v * rho_l)
                  / (alpha_l * rho_v / c_l**2 + alpha_v * rho_l / c_v**2))
    return a_m, c_m, g2


def approx_eigenvalues(state: StateArray, eos_v, eos_l, src: SourceConfig) -> EigenBounds:
    """Closed-form eigenvalue estimates and bounds for each state row.

    The interfacial-pressure term inside the void radicand uses the same
    kappa-floored volume fractions as the quasi-linear matrix assembly,
    so estimates and matrix stay mutually consistent near degeneracy.

    Raises NonHyperbolic when the void radicand goes negative, i.e. when
    the interfacial pressure falls below the hyperbolicity bound.
    """
    w = state.prim
    alpha = w[:, IA]
    p = w[:, IP]
    u_v, u_l = w[:, IUV], w[:, IUL]
    rho_v, rho_l = state.densities(eos_v, eos_l)
    c_v = eos_v.sound_speed(p, w[:, IHV], check=False)
    c_l = eos_l.sound_speed(p, w[:, IHL], check=False)
    alpha_l = 1.0 - alpha
    u_r = u_v - u_l

    a_m, _, _ = mixture_speeds(alpha, rho_v, rho_l, c_v, c_l)
    denom = alpha_l * rho_v + alpha * rho_l
    fast_c = (alpha * rho_l * u_v + alpha_l * rho_v * u_l) / denom
    void_c = (alpha_l * rho_v * u_v + alpha * rho_l * u_l) / denom

    av = np.clip(alpha, src.kappa, 1.0 - src.kappa)
    al = 1.0 - av
    dpi = bestion_term(av, rho_v, rho_l, u_r, src.delta)
    denom_f = al * rho_v + av * rho_l
    radicand = (dpi - u_r**2 * av * rho_v * al * rho_l / denom_f) / denom_f
    if np.any(radicand < -1e-12 * np.maximum(a_m, 1.0) ** 2):
        bad = np.argwhere(radicand < 0).ravel().tolist()
        raise NonHyperbolic(
            f"void radicand negative at rows {bad[:8]} "
            "(interfacial pressure below the hyperbolicity bound)")
    dv = np.sqrt(np.maximum(radicand, 0.0))

    est = np.stack([fast_c - a_m, fast_c + a_m,
                    void_c - dv, void_c + dv, u_v, u_l], axis=-1)
    lam_min_raw = est.min(axis=-1)
    lam_max_raw = est.max(axis=-1)
    a_raw = np.maximum(np.abs(lam_min_raw), np.abs(lam_max_raw))
    pad = BOUND_INFLATION * a_raw
    lam_min = lam_min_raw - pad
    lam_max = lam_max_raw + pad
    a_max = np.maximum(np.abs(lam_min), np.abs(lam_max))
    lam_int_max = np.max(np.abs(est[:, 2:]), axis=-1)

    # eigenvalues below 1e-6 a_max are classified as zero here: waves that
    # slow are unresolvable by any absolute-value fit and would only push
    # the tanh stiffness parameter to its floor
    mags = np.abs(est)
    nz = np.where(mags > 1e-6 * a_max[:, None], mags, np.inf)
    lam_small = nz.min(axis=-1)
    lam_small = np.where(np.isfinite(lam_small), lam_small, 0.0)

    return EigenBounds(lam_min=lam_min, lam_max=lam_max,
                       lam_int_max=lam_int_max, a_max=a_max, a_signal=a_raw,
                       lam_small=lam_small, estimates=est, source="approximate")


def numeric_spectrum(A):
    """Batched eigendecomposition (eigenvalues, R, cond_2(R)).

    A may be (n, n) or (N, n, n).  Complex eigenvalues are returned as
    such; a large cond(R) is the degeneracy signal, no exception here.
    """
    A = np.asarray(A, dtype=float)
    single = A.ndim == 2
    if single:
        A = A[None]
    try:
        w, R = np.linalg.eig(A)
    except np.linalg.LinAlgError as exc:   # pragma: no cover - rare
        raise EigSolverFailure(str(exc)) from exc
    sv = np.linalg.svd(R, compute_uv=False)
    with np.errstate(divide="ignore"):
        cond = sv[..., 0] / sv[..., -1]
    cond = np.where(np.isfinite(cond), cond, np.inf)
    if single:
        return w[0], R[0], float(cond[0])
    return w, R, cond


def numeric_bounds(A) -> EigenBounds:
    """EigenBounds from the numeric spectrum (cross-check path)."""
    w, _, _ = numeric_spectrum(A)
    w = np.atleast_2d(w)
    wr = np.sort(w.real, axis=-1)
    est = np.concatenate([wr[:, :1], wr[:, -1:], wr[:, 1:-1]], axis=-1)
    lam_min_raw = wr[:, 0]
    lam_max_raw = wr[:, -1]
    a_raw = np.maximum(np.abs(lam_min_raw), np.abs(lam_max_raw))
    pad = BOUND_INFLATION * a_raw
    lam_min = lam_min_raw - pad
    lam_max = lam_max_raw + pad
    a_max = np.maximum(np.abs(lam_min), np.abs(lam_max))
    if wr.shape[1] > 2:
        lam_int_max = np.max(np.abs(wr[:, 1:-1]), axis=-1)
    else:
        lam_int_max = np.zeros_like(lam_min)
    mags = np.abs(w)
    nz = np.where(mags > 1e-14 * a_max[:, None], mags, np.inf)
    lam_small = nz.min(axis=-1)
    lam_small = np.where(np.isfinite(lam_small), lam_small, 0.0)
    return EigenBounds(lam_min=lam_min, lam_max=lam_max,
                       lam_int_max=lam_int_max, a_max=a_max, a_signal=a_raw,
                       lam_small=lam_small, estimates=est, source="numeric")


@dataclass
class CollapseReport:
    """Degeneration diagnostic along an alpha_v sweep."""

    alpha: np.ndarray
    cond_r: np.ndarray
    angle_rad: np.ndarray

    def rows(self):
        return zip(self.alpha, self.cond_r, self.angle_rad)


def _void_pair_angle(A, est, scale):
    """Angle between the two void-wave eigenvectors of A.

    Eigenvectors are matched to the closed-form estimates through the
    shared sort order, then row-scaled by the state magnitudes so that
    the angle measures relative, not unit-weighted, alignment.
    """
    w, R, cond = numeric_spectrum(A)
    order_est = np.argsort(est)
    rank = np.empty(6, dtype=int)
    rank[order_est] = np.arange(6)
    order_num = np.argsort(w.real)
    i3 = order_num[rank[2]]   # void- estimate slot
    i4 = order_num[rank[3]]   # void+ estimate slot
    r3 = R[:, i3].real / scale
    r4 = R[:, i4].real / scale
    c = abs(float(np.dot(r3, r4))) / (np.linalg.norm(r3) * np.linalg.norm(r4))
    return float(np.arccos(min(1.0, c))), cond


def collapse_probe(state_factory, alpha_list):
    """Sweep alpha_v toward zero and report cond(R) and void-pair angle.

    state_factory(alpha) must return (StateArray, A_matrix, EigenBounds)
    for a single state; alpha_list must be positive and descending.
    """
    alphas = np.asarray(list(alpha_list), dtype=float)
    if np.any(alphas <= 0) or np.any(np.diff(alphas) >= 0):
        raise ValueError("alpha_list must be positive and strictly descending")
    conds = np.empty_like(alphas)
    angles = np.empty_like(alphas)
    for i, a in enumerate(alphas):
        state, amat, bounds = state_factory(float(a))
        scale = np.maximum(np.abs(state.cons[0]),
                           [1.0, 1.0, 1.0, 1.0, 1e5, 1e5])
        angles[i], conds[i] = _void_pair_angle(amat[0], bounds.estimates[0], scale)
    return CollapseReport(alpha=alphas, cond_r=conds, angle_rad=angles)
