"""Exception types shared across the solver stack.

The positivity controller distinguishes "state computation problems"
(EOS range, pressure iteration) from hard algorithmic failures, so the
hierarchy below is part of the control flow, not just diagnostics.
"""


class TwoFluidError(Exception):
    """Base class for all solver errors."""


class OutOfValidityBox(TwoFluidError):
    """EOS or saturation query outside the declared (p, h) validity range."""


class NegativeMass(TwoFluidError):
    """A partial mass alpha_k*rho_k went negative."""


class PressureNewtonDiverged(TwoFluidError):
    """The pressure closure iteration failed to converge.

    Carries the offending cell indices in ``cells`` when available.
    """

    def __init__(self, msg, cells=None):
        super().__init__(msg)
        self.cells = list(cells) if cells is not None else []


class NonHyperbolic(TwoFluidError):
    """Void-wave radicand negative: interfacial pressure below Bestion bound."""


class EigSolverFailure(TwoFluidError):
    """LAPACK eigendecomposition did not converge."""


class DefectiveMatrix(TwoFluidError):
    """Eigenvector matrix too ill-conditioned for an eigendecomposition route."""


class DegenerateSpectrum(TwoFluidError):
    """lambda_max - lambda_min below resolution; interpolation nodes collapse."""


class IllConditionedSystem(TwoFluidError):
    """Linear system for polynomial coefficients solved with poor residual."""


class NodeCoalescence(TwoFluidError):
    """Intermediate eigenvalue too small to serve as a Hermite node."""


class NewtonStalled(TwoFluidError):
    """Inner Newton iteration (matrix ODE step) exceeded its iteration cap."""


class NewtonDiverged(TwoFluidError):
    """Outer implicit Newton exceeded its iteration cap."""


class PositivityViolation(TwoFluidError):
    """A state left the positivity set; ``cells`` lists (index, field)."""

    def __init__(self, msg, cells=None):
        super().__init__(msg)
        self.cells = list(cells) if cells is not None else []


class DegenerateField(TwoFluidError):
    """All wave-speed bounds vanished; no CFL time step exists."""


class Aborted(TwoFluidError):
    """Time step shrank to dt_min without recovering."""


class UnknownCase(TwoFluidError):
    """Requested test case name is not registered."""


class SaturatedInlet(TwoFluidError):
    """Boiling-onset oracle queried with an inlet already at saturation."""


class ConfigError(TwoFluidError):
    """Run-configuration file could not be parsed or validated."""
