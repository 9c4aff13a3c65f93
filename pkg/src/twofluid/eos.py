"""Phase equations of state rho_k(p, h_k) and saturation property tables.

Three analytic EOS kinds cover the test matrix: an ideal gas for
air/steam-like vapor, a stiffened gas generalization, and a pressure-
linearized liquid with constant sound speed.  All three expose the same
interface:

    density(p, h)           mass density [kg/m^3]
    sound_speed(p, h)       isentropic sound speed, 1/c^2 = (d rho/d p)_s
    enthalpy_from_pg(p, g)  closed-form h solving h = g + p/rho(p, h)
    density_pg(p, g), drho_dp_pg(p, g), drho_dg(p, g)
                            density and its partials along fixed g,
                            where g = E - u^2/2 is what the conserved
                            variables actually determine

Every instance declares a (p, h) validity box.  Queries outside the box
raise OutOfValidityBox instead of extrapolating: the positivity
controller treats EOS failures as per-cell problems, so silent
extrapolation would mask exactly the events it needs to see.

All operations accept scalars or numpy arrays and are pure.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import OutOfValidityBox


@dataclass(frozen=True)
class ValidityBox:
    p_min: float = 1e2
    p_max: float = 1e9
    h_min: float = 1e2
    h_max: float = 1e9

    def contains(self, p, h):
        p = np.asarray(p, dtype=float)
        h = np.asarray(h, dtype=float)
        return (
            (p >= self.p_min) & (p <= self.p_max)
            & (h >= self.h_min) & (h <= self.h_max)
        )

    def check(self, p, h, what="EOS query"):
        ok = self.contains(p, h)
        if not np.all(ok):
            bad = np.argwhere(~np.atleast_1d(ok)).ravel()[:5]
            raise OutOfValidityBox(
                f"{what} outside validity box p=[{self.p_min:g},{self.p_max:g}] "
                f"h=[{self.h_min:g},{self.h_max:g}] at indices {bad.tolist()}"
            )


class PhaseEos:
    """Common behaviour for the three EOS kinds."""

    phase: str
    box: ValidityBox

    # -- (p, h) interface ------------------------------------------------

    def density(self, p, h, check=True):
        if check:
            self.box.check(p, h, f"{type(self).__name__} density")
        return self._rho(np.asarray(p, dtype=float), np.asarray(h, dtype=float))

    def sound_speed(self, p, h, check=True):
        if check:
            self.box.check(p, h, f"{type(self).__name__} sound_speed")
        return self._c(np.asarray(p, dtype=float), np.asarray(h, dtype=float))

    # -- (p, g) interface used by the conserved-variable closure ---------

    def enthalpy_from_pg(self, p, g):
        raise NotImplementedError

    def density_pg(self, p, g):
        return self._rho(np.asarray(p, dtype=float), self.enthalpy_from_pg(p, g))

    def drho_dp_pg(self, p, g):
        """d rho / d p at fixed g = h - p/rho."""
        raise NotImplementedError

    def drho_dg(self, p, g):
        """d rho / d g at fixed p."""
        raise NotImplementedError


@dataclass(frozen=True)
class IdealGas(PhaseEos):
    """rho = gamma p / ((gamma-1) h), h the specific enthalpy."""

    gamma: float
    phase: str = "vapor"
    box: ValidityBox = field(default_factory=ValidityBox)

    def _rho(self, p, h):
        return self.gamma * p / ((self.gamma - 1.0) * h)

    def _c(self, p, h):
        # (d rho/d p)_s = rho/(gamma p) => c^2 = gamma p/rho = (gamma-1) h
        return np.sqrt((self.gamma - 1.0) * h)

    def enthalpy_from_pg(self, p, g):
        # h = g + p/rho and p/rho = (gamma-1)h/gamma  =>  h = gamma g
        return self.gamma * np.asarray(g, dtype=float)

    def density_pg(self, p, g):
        return np.asarray(p, dtype=float) / ((self.gamma - 1.0) * np.asarray(g, dtype=float))

    def drho_dp_pg(self, p, g):
        return 1.0 / ((self.gamma - 1.0) * np.asarray(g, dtype=float))

    def drho_dg(self, p, g):
        g = np.asarray(g, dtype=float)
        return -np.asarray(p, dtype=float) / ((self.gamma - 1.0) * g * g)


@dataclass(frozen=True)
class StiffenedGas(PhaseEos):
    """rho = gamma (p + p_inf) / ((gamma-1)(h - q)); p_inf = q = 0 is IdealGas."""

    gamma: float
    p_inf: float = 0.0
    q: float = 0.0
    phase: str = "vapor"
    box: ValidityBox = field(default_factory=ValidityBox)

    def _rho(self, p, h):
        return self.gamma * (p + self.p_inf) / ((self.gamma - 1.0) * (h - self.q))

    def _c(self, p, h):
        # same reduction as the ideal gas: c^2 = (gamma-1)(h - q)
        return np.sqrt((self.gamma - 1.0) * (h - self.q))

    def _beta(self, p):
        # p/rho = beta (h - q) with beta = p(gamma-1)/(gamma(p+p_inf)) < 1
        return p * (self.gamma - 1.0) / (self.gamma * (p + self.p_inf))

    def enthalpy_from_pg(self, p, g):
        p = np.asarray(p, dtype=float)
        g = np.asarray(g, dtype=float)
        beta = self._beta(p)
        return self.q + (g - self.q) / (1.0 - beta)

    def drho_dp_pg(self, p, g):
        p = np.asarray(p, dtype=float)
        g = np.asarray(g, dtype=float)
        h = self.enthalpy_from_pg(p, g)
        rho = self._rho(p, h)
        beta = self._beta(p)
        dbeta = (self.gamma - 1.0) * self.p_inf / (self.gamma * (p + self.p_inf) ** 2)
        dh_dp = (g - self.q) * dbeta / (1.0 - beta) ** 2
        return rho / (p + self.p_inf) - rho / (h - self.q) * dh_dp

    def drho_dg(self, p, g):
        p = np.asarray(p, dtype=float)
        h = self.enthalpy_from_pg(p, g)
        rho = self._rho(p, h)
        beta = self._beta(p)
        return -rho / (h - self.q) / (1.0 - beta)


@dataclass(frozen=True)
class LinearizedLiquid(PhaseEos):
    """rho = rho_ref + (p - p_ref)/c_ref^2, independent of h.

    cp only maps enthalpy offsets to temperature offsets for reporting;
    it never enters the dynamics.
    """

    rho_ref: float
    c_ref: float
    p_ref: float
    h_ref: float
    cp: float = 4186.0
    phase: str = "liquid"
    box: ValidityBox = field(default_factory=ValidityBox)

    def _rho(self, p, h):
        return self.rho_ref + (p - self.p_ref) / self.c_ref**2 + 0.0 * np.asarray(h, dtype=float)

    def _c(self, p, h):
        return self.c_ref + 0.0 * np.asarray(p, dtype=float)

    def enthalpy_from_pg(self, p, g):
        p = np.asarray(p, dtype=float)
        return np.asarray(g, dtype=float) + p / self._rho(p, 0.0)

    def drho_dp_pg(self, p, g):
        return np.broadcast_to(1.0 / self.c_ref**2, np.broadcast_shapes(np.shape(p), np.shape(g))).copy()

    def drho_dg(self, p, g):
        return np.zeros(np.broadcast_shapes(np.shape(p), np.shape(g)))


class SaturationTable:
    """Piecewise-linear saturation properties h_v, h_l, rho_v, rho_l of p.

    The maps are case data, not derived from the phase EOS.  Construction
    validates strict monotonicity of every column and a positive latent
    heat L = h_v_sat - h_l_sat at every knot.
    """

    def __init__(self, p, h_v, h_l, rho_v, rho_l):
        self.p = np.asarray(p, dtype=float)
        self.h_v = np.asarray(h_v, dtype=float)
        self.h_l = np.asarray(h_l, dtype=float)
        self.rho_v = np.asarray(rho_v, dtype=float)
        self.rho_l = np.asarray(rho_l, dtype=float)
        if self.p.ndim != 1 or self.p.size < 2:
            raise ValueError("saturation table needs at least two pressure knots")
        if np.any(np.diff(self.p) <= 0):
            raise ValueError("saturation pressure knots must be strictly increasing")
        for name in ("h_v", "h_l", "rho_v", "rho_l"):
            col = getattr(self, name)
            if col.shape != self.p.shape:
                raise ValueError(f"saturation column {name} has wrong length")
            d = np.diff(col)
            if not (np.all(d > 0) or np.all(d < 0)):
                raise ValueError(f"saturation column {name} is not monotone in p")
        if np.any(self.h_v <= self.h_l):
            raise ValueError("latent heat h_v_sat - h_l_sat must be positive at every knot")

    def lookup(self, p):
        """Return (h_v_sat, h_l_sat, rho_v_sat, rho_l_sat) at pressure p."""
        p = np.asarray(p, dtype=float)
        if np.any(p < self.p[0]) or np.any(p > self.p[-1]):
            raise OutOfValidityBox(
                f"saturation query p outside table range [{self.p[0]:g}, {self.p[-1]:g}]"
            )
        return (
            np.interp(p, self.p, self.h_v),
            np.interp(p, self.p, self.h_l),
            np.interp(p, self.p, self.rho_v),
            np.interp(p, self.p, self.rho_l),
        )

    def latent_heat(self, p):
        h_v, h_l, _, _ = self.lookup(p)
        return h_v - h_l

    def specific_volume_jump(self, p):
        """v_lv = 1/rho_v_sat - 1/rho_l_sat, the boil-up volume per kg."""
        _, _, rho_v, rho_l = self.lookup(p)
        return 1.0 / rho_v - 1.0 / rho_l


def saturation(tbl: SaturationTable, p):
    """Functional alias for SaturationTable.lookup."""
    return tbl.lookup(p)
