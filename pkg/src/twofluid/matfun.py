"""Matrix absolute-value approximants M ~ |A| and the A+/- splitting.

Four families:

  * exact eigendecomposition  |A| = R diag(|l_i|) R^-1 (breaks down when
    the eigenvector matrix degenerates -- that breakdown is made explicit
    as DefectiveMatrix);
  * fixed polynomials P0/P1/P2 from the extremal eigenvalues, even
    extremal-contact polynomials of degree 2p, and the shipped
    high-degree fixed even polynomial (degree 34) with its published
    coefficients plus a 1e-10 stability shift;
  * a per-interface Hermite interpolant of degree 23 in Newton form over
    the nodes {lam_min x10, -lam_int x2, +lam_int x2, lam_max x10}, with
    a diffusion knob D scaling the interpolated intermediate magnitude;
  * a hyperbolic-tangent approximant computed by integrating the matrix
    ODE dX/dz = B (I - X^2) with implicit Euler and an inner Newton
    iteration, never touching eigenvectors.

All polynomial data lives in the normalized variable x = lambda / a_max;
matrix evaluation scales A down, applies the polynomial, and scales the
result back up.  Everything here accepts batched matrices of shape
(N, n, n) and is pure.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import (DefectiveMatrix, DegenerateSpectrum, IllConditionedSystem,
                     NewtonStalled, NodeCoalescence)

try:                                    # optional compiled kernel for the ODE
    import numba as _numba
    HAVE_NUMBA = True
except ImportError:                     # pragma: no cover - env dependent
    _numba = None
    HAVE_NUMBA = False

COND_LIMIT = 1e12
ENVELOPE_EPS = 1e-9

# Published coefficients of the high-degree fixed even polynomial,
# P(x) = sum_k a_k x^(2k), k = 0..17 (degree 34), before the 1e-10 shift.
HDF_COEFFS = np.array([
    6.209633161688544e-02, 4.516480010541272e+00, -3.049057345414379e+01,
    1.657256844603353e+02, -6.133533687894306e+02, 1.580698142537855e+03,
    -2.879210705862515e+03, 3.673105197391366e+03, -3.121407591514732e+03,
    1.512887040780976e+03, -2.111058506112595e+02, 9.753698909265717e+01,
    -6.475861637079317e+02, 8.947647548149256e+02, -6.303841204016171e+02,
    2.586951712420909e+02, -5.941358894806618e+01, 5.960406627331660e+00,
])
HDF_SHIFT = 1e-10


@dataclass(frozen=True)
class PolynomialSpec:
    """Polynomial over the normalized variable x = lambda / a_max.

    `coeffs` are monomial coefficients a_0..a_n.  When `newton_nodes`
    is set, evaluation uses the Newton form (nodes + divided differences)
    instead: for clustered Hermite data the monomial expansion is kept
    only as the record, the Newton form is the numerically trustworthy
    representation.
    """

    coeffs: np.ndarray
    parity_even: bool = False
    conditions: tuple = ()
    newton_nodes: Optional[np.ndarray] = None
    newton_coeffs: Optional[np.ndarray] = None
    label: str = ""

    @property
    def degree(self):
        return len(self.coeffs) - 1

    def __call__(self, x):
        return eval_poly(self, x)


def eval_poly(spec: PolynomialSpec, x):
    """Scalar/array evaluation of the spec on normalized x."""
    x = np.asarray(x, dtype=float)
    if spec.newton_nodes is not None:
        acc = np.full_like(x, spec.newton_coeffs[-1])
        for k in range(len(spec.newton_nodes) - 2, -1, -1):
            acc = acc * (x - spec.newton_nodes[k]) + spec.newton_coeffs[k]
        return acc
    if spec.parity_even:
        y = x * x
        c = spec.coeffs[::2]
        acc = np.full_like(x, c[-1])
        for k in range(len(c) - 2, -1, -1):
            acc = acc * y + c[k]
        return acc
    acc = np.full_like(x, spec.coeffs[-1])
    for k in range(len(spec.coeffs) - 2, -1, -1):
        acc = acc * x + spec.coeffs[k]
    return acc


def _batched_eye(n_batch, n):
    return np.broadcast_to(np.eye(n), (n_batch, n, n)).copy()


def _horner_matrix(coeffs, At):
    """coeffs (m,) or (N, m); At (N, n, n).  Plain monomial Horner."""
    nb, n = At.shape[0], At.shape[1]
    c = np.broadcast_to(np.asarray(coeffs, dtype=float),
                        (nb, np.shape(coeffs)[-1]))
    eye = np.eye(n)
    acc = c[:, -1, None, None] * eye
    for k in range(c.shape[1] - 2, -1, -1):
        acc = acc @ At
        acc += c[:, k, None, None] * eye
    return acc


def _horner_matrix_even(coeffs_even, At):
    """Even polynomial sum c_k (A^2)^k with half the multiplications."""
    A2 = At @ At
    return _horner_matrix(coeffs_even, A2)


def _newton_horner_numpy(nodes, dd, At):
    nb, n = At.shape[0], At.shape[1]
    eye = np.eye(n)
    acc = dd[:, -1, None, None] * eye
    for k in range(nodes.shape[1] - 2, -1, -1):
        shifted = At - nodes[:, k, None, None] * eye
        acc = shifted @ acc
        acc += dd[:, k, None, None] * eye
    return acc


def _newton_horner_matrix(nodes, dd, At):
    """Newton-form evaluation; nodes/dd are (N, m), At is (N, n, n)."""
    nodes = np.ascontiguousarray(nodes)
    dd = np.ascontiguousarray(dd)
    At = np.ascontiguousarray(At)
    if HAVE_NUMBA:
        return _newton_horner_kernel(nodes, dd, At)
    return _newton_horner_numpy(nodes, dd, At)


def eval_matrix_polynomial(spec: PolynomialSpec, A, a_max):
    """Evaluate a_max * P(A / a_max) with matrix Horner recurrences.

    Works on defective matrices: only matrix products are used.  The
    cost is one matrix multiply per degree (half for even polynomials).
    """
    A = np.asarray(A, dtype=float)
    single = A.ndim == 2
    if single:
        A = A[None]
    a = float(a_max)
    if a <= 0:
        raise ValueError("a_max must be positive")
    At = A / a
    if spec.newton_nodes is not None:
        nodes = np.broadcast_to(spec.newton_nodes, (A.shape[0], len(spec.newton_nodes)))
        dd = np.broadcast_to(spec.newton_coeffs, nodes.shape)
        out = _newton_horner_matrix(nodes, dd, At) * a
    elif spec.parity_even:
        out = _horner_matrix_even(spec.coeffs[::2], At) * a
    else:
        out = _horner_matrix(spec.coeffs, At) * a
    return out[0] if single else out


# ----------------------------------------------------------------------
# exact route
# ----------------------------------------------------------------------

def abs_exact(A, cond_limit=COND_LIMIT):
    """|A| through the eigendecomposition; DefectiveMatrix when R degenerates."""
    A = np.asarray(A, dtype=float)
    single = A.ndim == 2
    if single:
        A = A[None]
    w, R = np.linalg.eig(A)
    sv = np.linalg.svd(R, compute_uv=False)
    with np.errstate(divide="ignore", invalid="ignore"):
        cond = sv[..., 0] / sv[..., -1]
    cond = np.where(np.isfinite(cond), cond, np.inf)
    bad = cond > cond_limit
    if np.any(bad):
        idx = np.argwhere(bad).ravel().tolist()
        raise DefectiveMatrix(
            f"eigenvector matrix condition {cond[bad].max():.3e} exceeds "
            f"{cond_limit:.1e} at rows {idx[:8]}")
    Rinv = np.linalg.inv(R)
    M = (R * np.abs(w)[:, None, :]) @ Rinv
    M = M.real
    return M[0] if single else M


# ----------------------------------------------------------------------
# fixed polynomial builders
# ----------------------------------------------------------------------

def _low_order_coeffs(variant, lam_min, lam_max):
    """Normalized coefficients of P0/P1/P2; vectorized over bounds arrays."""
    lam_min = np.asarray(lam_min, dtype=float)
    lam_max = np.asarray(lam_max, dtype=float)
    a = np.maximum(np.abs(lam_min), np.abs(lam_max))
    xm = lam_min / a
    xM = lam_max / a
    if variant == "p0":
        return np.stack([np.ones_like(xm)], axis=-1)
    if variant == "p1":
        c1 = (np.abs(xM) - np.abs(xm)) / (xM - xm)
        c0 = np.abs(xm) - c1 * xm
        return np.stack([c0, c1], axis=-1)
    if variant == "p2":
        # parabola through both endpoints, slope of |x| matched at the
        # endpoint of larger magnitude; stays inside the stability area
        big_is_max = np.abs(xM) >= np.abs(xm)
        xb = np.where(big_is_max, xM, xm)
        xo = np.where(big_is_max, xm, xM)
        sb = np.sign(xb)
        # P(x) = |xb| + sb (x - xb) + c2 (x - xb)^2 with P(xo) = |xo|
        c2 = (np.abs(xo) - np.abs(xb) - sb * (xo - xb)) / (xo - xb) ** 2
        c0 = np.abs(xb) - sb * xb + c2 * xb**2
        c1 = sb - 2.0 * c2 * xb
        return np.stack([c0, c1, c2], axis=-1)
    raise ValueError(f"unknown low-order variant {variant!r}")


def build_low_order(variant, lam_min, lam_max) -> PolynomialSpec:
    """P0 (constant), P1 (chord) or P2 (chord + one slope), normalized."""
    lam_min = float(lam_min)
    lam_max = float(lam_max)
    a = max(abs(lam_min), abs(lam_max))
    if a == 0.0 or (lam_max - lam_min) < 1e-14 * a:
        raise DegenerateSpectrum(
            f"cannot interpolate on [{lam_min:g}, {lam_max:g}]")
    variant = variant.lower()
    coeffs = _low_order_coeffs(variant, lam_min, lam_max)
    return PolynomialSpec(
        coeffs=np.atleast_1d(coeffs),
        conditions=((lam_min / a, abs(lam_min) / a), (lam_max / a, abs(lam_max) / a)),
        label=variant)


def build_P2p(p: int) -> PolynomialSpec:
    """Even degree-2p polynomial with order-p contact to |x| at x = 1.

    Conditions: P(1) = 1, P'(1) = 1, P^(j)(1) = 0 for j = 2..p.  The
    (p+1)x(p+1) system is solved directly with one step of iterative
    refinement; beyond p = 16 it is numerically unstable and refused.
    """
    if not (1 <= int(p) <= 16):
        raise ValueError("p must be in 1..16")
    p = int(p)
    m = p + 1
    powers = 2 * np.arange(m)
    mat = np.zeros((m, m))
    rhs = np.zeros(m)
    # row 0: value, row 1: first derivative, rows j>=2: j-th derivative
    for j in range(m):
        fall = np.ones(m)
        for i in range(j):
            fall *= powers - i
        mat[j] = fall
    rhs[0] = 1.0
    rhs[1] = 1.0
    # row equilibration keeps the falling factorials from swamping the solve
    scale = np.abs(mat).max(axis=1)
    mat_s = mat / scale[:, None]
    rhs_s = rhs / scale
    coeffs_even = np.linalg.solve(mat_s, rhs_s)
    resid = rhs_s - mat_s @ coeffs_even
    coeffs_even += np.linalg.solve(mat_s, resid)
    resid = rhs_s - mat_s @ coeffs_even
    rel = np.max(np.abs(resid)) / max(np.max(np.abs(coeffs_even)), 1.0)
    if rel > 1e-8:
        raise IllConditionedSystem(
            f"P_2p system relative residual {rel:.2e} at p={p}")
    coeffs = np.zeros(2 * p + 1)
    coeffs[::2] = coeffs_even
    return PolynomialSpec(coeffs=coeffs, parity_even=True,
                          conditions=((1.0, 1.0, tuple(range(2, p + 1))),),
                          label=f"p2p({p})")


_PHDF_CACHE = None


def build_PHDF() -> PolynomialSpec:
    """Shipped degree-34 even polynomial, constant term shifted by +1e-10."""
    global _PHDF_CACHE
    if _PHDF_CACHE is None:
        coeffs = np.zeros(35)
        coeffs[::2] = HDF_COEFFS
        coeffs[0] += HDF_SHIFT
        _PHDF_CACHE = PolynomialSpec(coeffs=coeffs, parity_even=True,
                                     label="phdf")
    return _PHDF_CACHE


# ----------------------------------------------------------------------
# dynamic Hermite interpolant
# ----------------------------------------------------------------------

# node multiplicity pattern: lam_min x10, -lam_int x2, +lam_int x2, lam_max x10
_HERMITE_BLOCK = np.array([0] * 10 + [1] * 2 + [2] * 2 + [3] * 10)
_HERMITE_M = len(_HERMITE_BLOCK)


def _hermite_abs_data(xm, xi, xM, d):
    """Nodes and confluent divided differences on normalized bounds.

    All arguments are 1-D arrays (batch).  Derivative data per block:
    slope -1/-1/+1/+1, all higher derivatives zero at the extremal
    blocks.  Returns (nodes, dd), each (N, 24).
    """
    n = xm.shape[0]
    block_x = np.stack([xm, -xi, xi, xM], axis=-1)              # (N, 4)
    block_v = np.stack([np.abs(xm), d * xi, d * xi, np.abs(xM)], axis=-1)
    block_s = np.array([-1.0, -1.0, 1.0, 1.0])

    nodes = block_x[:, _HERMITE_BLOCK]                          # (N, 24)
    table = np.zeros((n, _HERMITE_M, _HERMITE_M))
    table[:, :, 0] = block_v[:, _HERMITE_BLOCK]
    for j in range(1, _HERMITE_M):
        i = np.arange(_HERMITE_M - j)
        confluent = _HERMITE_BLOCK[i + j] == _HERMITE_BLOCK[i]
        dx = nodes[:, i + j] - nodes[:, i]
        dx_safe = np.where(confluent[None, :], 1.0, dx)
        quot = (table[:, i + 1, j - 1] - table[:, i, j - 1]) / dx_safe
        if j == 1:
            conf_val = np.broadcast_to(block_s[_HERMITE_BLOCK[i]], quot.shape)
        else:
            conf_val = np.zeros_like(quot)
        table[:, i, j] = np.where(confluent[None, :], conf_val, quot)
    dd = table[:, 0, :]
    return nodes, dd


def hermite_abs_batch(lam_min, lam_max, lam_int_max, a_max, d):
    """Batched Hermite data in normalized variable plus a fallback mask.

    Interfaces where the intermediate node coalesces with zero or where
    the spectrum does not straddle it are flagged for the P2 fallback.
    """
    lam_min = np.atleast_1d(np.asarray(lam_min, dtype=float))
    lam_max = np.atleast_1d(np.asarray(lam_max, dtype=float))
    lam_int_max = np.atleast_1d(np.asarray(lam_int_max, dtype=float))
    a_max = np.atleast_1d(np.asarray(a_max, dtype=float))
    d = np.broadcast_to(np.asarray(d, dtype=float), lam_min.shape)

    xm = lam_min / a_max
    xM = lam_max / a_max
    xi = np.abs(lam_int_max) / a_max
    fallback = (xi < 1e-14) | (xm >= -xi) | (xM <= xi)
    xi_safe = np.where(fallback, 0.25, xi)
    xm_safe = np.where(fallback, -1.0, xm)
    xM_safe = np.where(fallback, 1.0, xM)
    nodes, dd = _hermite_abs_data(xm_safe, xi_safe, xM_safe, d)
    return nodes, dd, fallback


def build_PHDD(bounds, d=1.0, index=0) -> PolynomialSpec:
    """Degree-23 Hermite interpolant of |x| for one state of `bounds`.

    Nodes: extremal eigenvalues with 10-fold contact (value, slope of
    |x|, eight vanishing higher derivatives) and +-lam_int_max with value
    d*|lam_int_max| and slopes -+1.  Rebuilt per interface per step by the
    solver through the batched path; this wrapper serves one state.
    """
    i = index
    lam_int = float(np.atleast_1d(bounds.lam_int_max)[i])
    a_max = float(np.atleast_1d(bounds.a_max)[i])
    lam_min = float(np.atleast_1d(bounds.lam_min)[i])
    lam_max = float(np.atleast_1d(bounds.lam_max)[i])
    if abs(lam_int) < 1e-14 * a_max:
        raise NodeCoalescence(
            f"lam_int_max {lam_int:g} below resolution of a_max {a_max:g}")
    if not (lam_min < -abs(lam_int) < abs(lam_int) < lam_max):
        raise NodeCoalescence(
            f"spectrum [{lam_min:g}, {lam_max:g}] does not straddle "
            f"+-{abs(lam_int):g}")
    if d < 1.0:
        raise ValueError("diffusion factor d must be >= 1")
    if d * abs(lam_int) > a_max * (1 + 1e-12):
        raise ValueError("d * lam_int_max exceeds a_max; cap it first")
    nodes, dd, fb = hermite_abs_batch(np.array([lam_min]), np.array([lam_max]),
                                      np.array([lam_int]), np.array([a_max]),
                                      np.array([float(d)]))
    # monomial expansion kept as the record; evaluation uses Newton form
    poly = np.polynomial.polynomial.Polynomial([dd[0, -1]])
    for k in range(_HERMITE_M - 2, -1, -1):
        poly = poly * np.polynomial.polynomial.Polynomial([-nodes[0, k], 1.0]) + dd[0, k]
    cond = tuple((float(x), None) for x in
                 (lam_min / a_max, -abs(lam_int) / a_max,
                  abs(lam_int) / a_max, lam_max / a_max))
    return PolynomialSpec(coeffs=poly.coef, parity_even=False,
                          conditions=cond, newton_nodes=nodes[0],
                          newton_coeffs=dd[0], label=f"phdd(d={d:g})")


# ----------------------------------------------------------------------
# hyperbolic tangent route
# ----------------------------------------------------------------------

def phi_tanh(x, tau):
    """Phi(x) = tau + (1 - tau) x tanh(x/tau) cotanh(1/tau); Phi(1) = 1."""
    if np.any(np.asarray(tau) <= 0):
        raise ValueError("tau must be positive")
    x = np.asarray(x, dtype=float)
    return tau + (1.0 - tau) * x * np.tanh(x / tau) / np.tanh(1.0 / tau)


def _tanh_ode_numpy(hB, n1, n2, tol):
    """Implicit-Euler integration of dX/dz = B(I - X^2) on z in [0, 1].

    Each step solves X + hB X^2 = X_prev + hB by Newton.  All iterates
    are rational functions of B, so the Frechet correction reduces to
    E = (I + 2 hB X)^-1 F inside that commutative algebra; the residual
    is still measured in full matrix arithmetic, which keeps the check
    honest against roundoff drift out of the algebra.
    """
    nb, n = hB.shape[0], hB.shape[1]
    eye = np.eye(n)
    X = np.zeros_like(hB)
    # the residual is assembled from products of size ~ |hB| (1 + |X|)^2,
    # so the reachable floor in float64 scales with the data; tol applies
    # relative to that scale (with an n-factor headroom over the floor),
    # never below the dimension-relative tol.  Rows stop updating once
    # they converge: extra corrections on a converged stiff row only
    # bounce it around its own noise floor.
    hb_norm = np.sqrt(np.sum(hB * hB, axis=(1, 2))) / n
    for step in range(n1):
        target = X + hB
        x_norm = np.sqrt(np.sum(X * X, axis=(1, 2))) / n
        thresh = tol * np.maximum(1.0, n * hb_norm * (1.0 + x_norm) ** 2)
        Y = X.copy()
        done = np.zeros(nb, dtype=bool)
        for _ in range(n2):
            W = hB @ Y
            F = Y + W @ Y - target
            resid = np.sqrt(np.sum(F * F, axis=(1, 2))) / n
            done = resid <= thresh
            if done.all():
                break
            M = eye + 2.0 * W
            E = np.linalg.solve(M, F)
            Y = np.where(done[:, None, None], Y, Y - E)
        else:
            W = hB @ Y
            F = Y + W @ Y - target
            resid = np.sqrt(np.sum(F * F, axis=(1, 2))) / n
            if np.any(resid > thresh):
                bad = np.argwhere(resid > thresh).ravel().tolist()
                raise NewtonStalled(
                    f"matrix-ODE Newton above tol {tol:g} after {n2} "
                    f"iterations at rows {bad[:8]}")
        X = Y
    return X


if HAVE_NUMBA:
    @_numba.njit(cache=False, fastmath=False, parallel=True)
    def _newton_horner_kernel(nodes, dd, At):   # pragma: no cover - compiled
        nb = At.shape[0]
        n = At.shape[1]
        m = nodes.shape[1]
        out = np.empty_like(At)
        for b in _numba.prange(nb):
            acc = np.zeros((n, n))
            tmp = np.zeros((n, n))
            for i in range(n):
                acc[i, i] = dd[b, m - 1]
            for k in range(m - 2, -1, -1):
                x = nodes[b, k]
                c = dd[b, k]
                for i in range(n):
                    for j in range(n):
                        s = -x * acc[i, j]
                        for l in range(n):
                            s += At[b, i, l] * acc[l, j]
                        tmp[i, j] = s
                for i in range(n):
                    for j in range(n):
                        acc[i, j] = tmp[i, j]
                    acc[i, i] += c
            out[b] = acc
        return out

    @_numba.njit(cache=False, fastmath=False, inline="always")
    def _matmul_small(a, b, out):       # pragma: no cover - compiled
        n = a.shape[0]
        for i in range(n):
            for j in range(n):
                s = 0.0
                for k in range(n):
                    s += a[i, k] * b[k, j]
                out[i, j] = s

    @_numba.njit(cache=False, fastmath=False, inline="always")
    def _solve_small(m, f, out):        # pragma: no cover - compiled
        """Pivoted Gaussian elimination solving m X = f for n x n blocks."""
        n = m.shape[0]
        a = m.copy()
        x = f.copy()
        for col in range(n):
            piv = col
            big = abs(a[col, col])
            for r in range(col + 1, n):
                if abs(a[r, col]) > big:
                    big = abs(a[r, col])
                    piv = r
            if piv != col:
                for c in range(n):
                    a[col, c], a[piv, c] = a[piv, c], a[col, c]
                    x[col, c], x[piv, c] = x[piv, c], x[col, c]
            d = a[col, col]
            for r in range(col + 1, n):
                fac = a[r, col] / d
                if fac != 0.0:
                    for c in range(col, n):
                        a[r, c] -= fac * a[col, c]
                    for c in range(n):
                        x[r, c] -= fac * x[col, c]
        for col in range(n - 1, -1, -1):
            d = a[col, col]
            for c in range(n):
                s = x[col, c]
                for r in range(col + 1, n):
                    s -= a[col, r] * out[r, c]
                out[col, c] = s / d
        return out

    @_numba.njit(cache=False, fastmath=False, parallel=True)
    def _tanh_ode_kernel(hB, n1, n2, tol):  # pragma: no cover - compiled
        nb = hB.shape[0]
        n = hB.shape[1]
        X = np.zeros_like(hB)
        ok = np.ones(nb, dtype=np.bool_)
        for b in _numba.prange(nb):
            hb = hB[b]
            snorm = 0.0
            for i in range(n):
                for j in range(n):
                    snorm += hb[i, j] * hb[i, j]
            hb_norm = np.sqrt(snorm) / n
            x = np.zeros((n, n))
            y = np.zeros((n, n))
            w = np.zeros((n, n))
            f = np.zeros((n, n))
            m = np.zeros((n, n))
            e = np.zeros((n, n))
            for step in range(n1):
                xnorm = 0.0
                for i in range(n):
                    for j in range(n):
                        y[i, j] = x[i, j]
                        xnorm += x[i, j] * x[i, j]
                xnorm = np.sqrt(xnorm) / n
                thresh = tol * max(1.0, n * hb_norm * (1.0 + xnorm) ** 2)
                good = False
                for _ in range(n2):
                    _matmul_small(hb, y, w)
                    _matmul_small(w, y, f)
                    s = 0.0
                    for i in range(n):
                        for j in range(n):
                            f[i, j] += y[i, j] - x[i, j] - hb[i, j]
                            s += f[i, j] * f[i, j]
                    if np.sqrt(s) / n <= thresh:
                        good = True
                        break
                    for i in range(n):
                        for j in range(n):
                            m[i, j] = 2.0 * w[i, j]
                        m[i, i] += 1.0
                    _solve_small(m, f, e)
                    for i in range(n):
                        for j in range(n):
                            y[i, j] -= e[i, j]
                if not good:
                    _matmul_small(hb, y, w)
                    _matmul_small(w, y, f)
                    s = 0.0
                    for i in range(n):
                        for j in range(n):
                            f[i, j] += y[i, j] - x[i, j] - hb[i, j]
                            s += f[i, j] * f[i, j]
                    if np.sqrt(s) / n > thresh:
                        ok[b] = False
                for i in range(n):
                    for j in range(n):
                        x[i, j] = y[i, j]
            for i in range(n):
                for j in range(n):
                    X[b, i, j] = x[i, j]
        return X, ok


def tanh_matrix(A, a_max, tau, n1=100, n2=40, tol=1e-12, row_scale=None):
    """a_max * Phi(A / a_max) with the tanh factor from the matrix ODE.

    tau may be a scalar or per-matrix array.  The scalar cotanh(1/tau)
    factor multiplies the tanh matrix directly.

    `row_scale` (N, n), when given, integrates the ODE in the balanced
    basis D^-1 A D with D = diag(row_scale) and transforms the result
    back: an exact diagonal similarity that removes the raw-unit
    disparity of physical matrices, keeping iterate magnitudes and the
    inner Newton's roundoff floor tame.
    """
    A = np.asarray(A, dtype=float)
    single = A.ndim == 2
    if single:
        A = A[None]
    nb, n = A.shape[0], A.shape[1]
    a_max = np.broadcast_to(np.asarray(a_max, dtype=float), (nb,))
    tau_arr = np.broadcast_to(np.asarray(tau, dtype=float), (nb,))
    if np.any(tau_arr <= 0) or np.any(tau_arr > 1.0):
        raise ValueError("tau must lie in (0, 1]")
    At = A / a_max[:, None, None]
    if row_scale is not None:
        d = np.atleast_2d(np.asarray(row_scale, dtype=float))
        At = At / d[:, :, None] * d[:, None, :]
    hB = At / (tau_arr[:, None, None] * n1)
    hB = np.ascontiguousarray(hB)
    if HAVE_NUMBA:
        X, ok = _tanh_ode_kernel(hB, n1, n2, tol)
        if not np.all(ok):
            bad = np.argwhere(~ok).ravel().tolist()
            raise NewtonStalled(
                f"matrix-ODE Newton above tol {tol:g} after {n2} iterations "
                f"at rows {bad[:8]}")
    else:
        X = _tanh_ode_numpy(hB, n1, n2, tol)
    cot = 1.0 / np.tanh(1.0 / tau_arr)
    eye = np.eye(n)
    phi = (tau_arr[:, None, None] * eye
           + ((1.0 - tau_arr) * cot)[:, None, None] * (At @ X))
    if row_scale is not None:
        phi = phi * d[:, :, None] / d[:, None, :]
    out = phi * a_max[:, None, None]
    return out[0] if single else out


# ----------------------------------------------------------------------
# strategy dispatch
# ----------------------------------------------------------------------

VARIANTS = ("exact", "p0", "p1", "p2", "p2p", "phdf", "phdd", "tanh")


@dataclass
class AbsApproximant:
    """Strategy object mapping an interface matrix to M ~ |A|.

    variant-specific parameters: `p` for the even extremal-contact
    family (1..16), `d` for the dynamic Hermite diffusion knob (>= 1),
    `tau` for the tanh route (None selects lam_small/10 per interface,
    floored at 1e-8).
    """

    variant: str
    p: int = 4
    d: float = 1.0
    tau: Optional[float] = None
    _spec: Optional[PolynomialSpec] = field(default=None, repr=False)

    def __post_init__(self):
        v = self.variant.lower()
        if v not in VARIANTS:
            raise ValueError(f"unknown variant {self.variant!r}")
        self.variant = v
        if v == "p2p":
            if not (1 <= self.p <= 16):
                raise ValueError("p must be in 1..16")
            self._spec = build_P2p(self.p)
        elif v == "phdf":
            self._spec = build_PHDF()
        if self.d < 1.0:
            raise ValueError("d must be >= 1")
        if self.tau is not None and not (0.0 < self.tau <= 1.0):
            raise ValueError("tau must lie in (0, 1]")


def _phdd_matrix(A_t, bounds, d_array, work=None):
    """Dynamic Hermite |A|; node data may be cached across evaluations
    with identical bounds and diffusion (`work` dict owned by the caller)."""
    key = None
    data = None
    if work is not None:
        key = (id(bounds), np.asarray(d_array).tobytes())
        data = work.get(key)
    if data is None:
        data = hermite_abs_batch(bounds.lam_min, bounds.lam_max,
                                 bounds.lam_int_max, bounds.a_max, d_array)
        if work is not None:
            work[key] = data
    nodes, dd, fb = data
    out = _newton_horner_matrix(nodes, dd, A_t)
    if np.any(fb):
        idx = np.argwhere(fb).ravel()
        c2 = _low_order_coeffs("p2", bounds.lam_min[idx], bounds.lam_max[idx])
        out[idx] = _horner_matrix(c2, A_t[idx])
    return out


def apply_abs(approx: AbsApproximant, A, bounds, d_array=None, work=None,
              row_scale=None):
    """Dispatch to the variant; returns (M, A_plus, A_minus).

    A_minus is defined as A - A_plus, so recombining the split differs
    from A only by the final addition's rounding.  `d_array` overrides
    the per-interface diffusion for the dynamic Hermite variant
    (positivity controller hook); `work` is an optional caller-owned
    cache for node data reused across evaluations with frozen bounds.
    """
    A = np.asarray(A, dtype=float)
    single = A.ndim == 2
    if single:
        A = A[None]
    nb = A.shape[0]
    v = approx.variant
    if v == "exact":
        M = abs_exact(A)
    else:
        a_max = np.atleast_1d(np.asarray(bounds.a_max, dtype=float))
        At = A / a_max[:, None, None]
        if v in ("p0", "p1", "p2"):
            coeffs = _low_order_coeffs(v, np.atleast_1d(bounds.lam_min),
                                       np.atleast_1d(bounds.lam_max))
            M = _horner_matrix(coeffs, At) * a_max[:, None, None]
        elif v in ("p2p", "phdf"):
            M = _horner_matrix_even(approx._spec.coeffs[::2], At) * a_max[:, None, None]
        elif v == "phdd":
            if d_array is None:
                d_array = np.full(nb, approx.d)
            M = _phdd_matrix(At, bounds, np.asarray(d_array, dtype=float),
                             work=work) * a_max[:, None, None]
        elif v == "tanh":
            if approx.tau is not None:
                tau = np.full(nb, approx.tau)
            else:
                lam_small = np.atleast_1d(np.asarray(bounds.lam_small, dtype=float))
                tau = np.clip(lam_small / a_max / 10.0, 1e-8, 1.0)
            M = tanh_matrix(A, a_max, tau, row_scale=row_scale)
        else:   # pragma: no cover
            raise ValueError(v)
    A_plus = 0.5 * (A + M)
    A_minus = A - A_plus
    if single:
        return M[0], A_plus[0], A_minus[0]
    return M, A_plus, A_minus
