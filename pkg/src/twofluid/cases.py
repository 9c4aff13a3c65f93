"""Test-case definitions and their closed-form oracles.

The oracles are independent of the solver: the faucet profile is pure
kinematics plus flow-rate conservation, the channel heating rate and
boiling onset come from an algebraic steady energy balance.  They are
the reference the finite-volume results are checked against.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, replace
from typing import Optional

import numpy as np

from .eos import (IdealGas, LinearizedLiquid, SaturationTable, StiffenedGas,
                  ValidityBox)
from .errors import ConfigError, SaturatedInlet, UnknownCase
from .model import SourceConfig, conserved_from_primitives
from .runio import cases_dir, parse_config, require
from .solver import BoundarySpec, Mesh1D, Problem

CASE_NAMES = ("ransom", "channel_saturated", "channel_subcooled")


@dataclass
class CaseSpec:
    name: str
    mesh: Mesh1D
    bc: BoundarySpec
    eos_v: object
    eos_l: object
    src: SourceConfig
    sat: Optional[SaturationTable]
    t_end: float
    cfl: float
    mode: str                      # 'explicit' | 'implicit'
    heating_n_pch: float = 0.0
    heating_u0: float = 0.0

    def problem(self) -> Problem:
        return Problem(mesh=self.mesh, bc=self.bc, eos_v=self.eos_v,
                       eos_l=self.eos_l, src=self.src, sat=self.sat)

    def initial_state(self):
        """Uniform inlet state at the outlet pressure everywhere."""
        n = self.mesh.n_cells
        bc = self.bc
        return conserved_from_primitives(
            np.full(n, bc.inlet_alpha_v), np.full(n, bc.outlet_p),
            np.full(n, bc.inlet_u_v), np.full(n, bc.inlet_u_l),
            np.full(n, bc.inlet_h_v), np.full(n, bc.inlet_h_l),
            self.eos_v, self.eos_l)

    def with_inlet_alpha(self, alpha):
        return replace(self, bc=replace(self.bc, inlet_alpha_v=float(alpha)))


def _build_eos(cfg, side, path):
    kind = require(cfg, f"eos.{side}.kind", path)
    box_vals = require(cfg, f"eos.{side}.box", path)
    box = ValidityBox(*box_vals)
    phase = "vapor" if side == "vapor" else "liquid"
    if kind == "ideal_gas":
        return IdealGas(gamma=require(cfg, f"eos.{side}.gamma", path),
                        phase=phase, box=box)
    if kind == "stiffened_gas":
        return StiffenedGas(gamma=require(cfg, f"eos.{side}.gamma", path),
                            p_inf=cfg.get(f"eos.{side}.p_inf", 0.0),
                            q=cfg.get(f"eos.{side}.q", 0.0),
                            phase=phase, box=box)
    if kind == "linearized_liquid":
        return LinearizedLiquid(
            rho_ref=require(cfg, f"eos.{side}.rho_ref", path),
            c_ref=require(cfg, f"eos.{side}.c_ref", path),
            p_ref=require(cfg, f"eos.{side}.p_ref", path),
            h_ref=require(cfg, f"eos.{side}.h_ref", path),
            cp=cfg.get(f"eos.{side}.cp", 4186.0),
            phase=phase, box=box)
    raise ConfigError(f"{path}: unknown EOS kind {kind!r} for {side}")


def case_from_config(path) -> CaseSpec:
    cfg = parse_config(path)
    name = require(cfg, "case.name", path)
    mesh = Mesh1D(n_cells=int(require(cfg, "mesh.cells", path)),
                  length=require(cfg, "mesh.length", path))
    bc = BoundarySpec(
        inlet_alpha_v=require(cfg, "boundary.inlet.alpha_v", path),
        inlet_u_v=require(cfg, "boundary.inlet.u_v", path),
        inlet_u_l=require(cfg, "boundary.inlet.u_l", path),
        inlet_h_v=require(cfg, "boundary.inlet.h_v", path),
        inlet_h_l=require(cfg, "boundary.inlet.h_l", path),
        outlet_p=require(cfg, "boundary.outlet.p", path))
    eos_v = _build_eos(cfg, "vapor", path)
    eos_l = _build_eos(cfg, "liquid", path)

    sat = None
    if "saturation.p" in cfg:
        try:
            sat = SaturationTable(cfg["saturation.p"], cfg["saturation.h_v"],
                                  cfg["saturation.h_l"], cfg["saturation.rho_v"],
                                  cfg["saturation.rho_l"])
        except (ValueError, KeyError) as exc:
            raise ConfigError(f"{path}: bad saturation table: {exc}") from exc

    src = SourceConfig(
        delta=cfg.get("source.delta", 1.1),
        kappa=cfg.get("source.kappa", 1e-4),
        drag_cd=cfg.get("source.drag_cd", 0.44),
        drag_ri=cfg.get("source.drag_ri", 5e-4),
        wall_f=cfg.get("source.wall_f", 0.017),
        wall_dh=cfg.get("source.wall_dh", 0.628),
        gravity=cfg.get("source.gravity", 0.0),
        enable_drag=cfg.get("source.enable_drag", False),
        enable_wall_friction=cfg.get("source.enable_wall_friction", False),
        enable_gravity=cfg.get("source.enable_gravity", False),
        enable_heating=cfg.get("source.enable_heating", False))

    spec = CaseSpec(name=name, mesh=mesh, bc=bc, eos_v=eos_v, eos_l=eos_l,
                    src=src, sat=sat,
                    t_end=require(cfg, "time.t_end", path),
                    cfl=require(cfg, "time.cfl", path),
                    mode=require(cfg, "time.mode", path),
                    heating_n_pch=cfg.get("heating.n_pch", 0.0),
                    heating_u0=cfg.get("heating.u0", 0.0))
    if src.enable_heating:
        if sat is None:
            raise ConfigError(f"{path}: heating enabled without a saturation table")
        q = channel_heating_rate(spec)
        spec.src = replace(src, heat_q=q)
    return spec


def load_case(name, alpha_inlet=None) -> CaseSpec:
    """Pinned case by name ('ransom', 'channel_saturated', 'channel_subcooled')
    or from an explicit config path."""
    if os.path.sep in str(name) or str(name).endswith(".cfg"):
        path = str(name)
    else:
        if name not in CASE_NAMES:
            raise UnknownCase(f"unknown case {name!r}; choose from {CASE_NAMES}")
        path = os.path.join(cases_dir(), f"{name}.cfg")
    spec = case_from_config(path)
    if alpha_inlet is not None:
        spec = spec.with_inlet_alpha(alpha_inlet)
    return spec


@dataclass
class OracleResult:
    """Closed-form reference data; never touches solver code."""

    y: np.ndarray = None
    alpha_v: np.ndarray = None
    y_front: float = None
    y_boil: float = None


def ransom_oracle(t, y=None, u0=10.0, alpha0=0.2, g=9.81, length=12.0):
    """Faucet profile at time t.

    Behind the front y_f = u0 t + g t^2 / 2 the liquid is in steady free
    fall, u_l = sqrt(u0^2 + 2 g y), and flow-rate conservation gives
    alpha_l = (1 - alpha0) u0 / u_l; ahead of it the initial uniform
    fraction persists.
    """
    if y is None:
        y = np.linspace(0.0, length, 241)
    y = np.asarray(y, dtype=float)
    y_front = u0 * t + 0.5 * g * t * t
    u_l = np.sqrt(u0**2 + 2.0 * np.maximum(g * y, 0.0))
    alpha_v = 1.0 - (1.0 - alpha0) * u0 / u_l
    alpha_v = np.where(y <= y_front, alpha_v, alpha0)
    return OracleResult(y=y, alpha_v=alpha_v, y_front=y_front)


def channel_heating_rate(case: CaseSpec):
    """Volumetric heat concentration q = N_pch u0 L / (L_h v_lv)."""
    if case.sat is None:
        raise ConfigError("heating rate needs a saturation table")
    p_op = case.bc.outlet_p
    lat = float(case.sat.latent_heat(p_op))
    v_lv = float(case.sat.specific_volume_jump(p_op))
    return case.heating_n_pch * case.heating_u0 * lat / (case.mesh.length * v_lv)


def boiling_onset_oracle(case: CaseSpec):
    """Steady 1-D energy balance onset y_boil = dh * (rho_l u0) / q."""
    p_op = case.bc.outlet_p
    _, h_l_sat, _, _ = case.sat.lookup(p_op)
    dh = float(h_l_sat) - case.bc.inlet_h_l
    if dh <= 0:
        raise SaturatedInlet("inlet liquid already at or above saturation")
    rho_in = float(case.eos_l.density(p_op, case.bc.inlet_h_l))
    q = case.src.heat_q if case.src.heat_q > 0 else channel_heating_rate(case)
    y = dh * rho_in * case.bc.inlet_u_l / q
    return OracleResult(y_boil=y)


def collapse_state_factory(case: CaseSpec, u_r0=0.5, alpha_ref=0.1):
    """Single-state builder for the eigenvector-collapse sweep.

    The relative velocity decays like sqrt(alpha/alpha_ref), matching
    the first-order eigenvector perturbation scaling.
    """
    from .eigen import approx_eigenvalues
    from .model import jacobian

    prob = case.problem()

    def factory(alpha):
        u_r = u_r0 * np.sqrt(alpha / alpha_ref)
        st = conserved_from_primitives(
            alpha, case.bc.outlet_p, case.bc.inlet_u_l + u_r,
            case.bc.inlet_u_l, case.bc.inlet_h_v, case.bc.inlet_h_l,
            case.eos_v, case.eos_l)
        amat = jacobian(st, prob.src, prob.eos_v, prob.eos_l)
        bounds = approx_eigenvalues(st, prob.eos_v, prob.eos_l, prob.src)
        return st, amat, bounds

    return factory
