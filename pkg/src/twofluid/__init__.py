"""Six-equation two-fluid finite-volume solver with pluggable
matrix-absolute-value upwinding and adaptive positivity control."""

from .eos import IdealGas, LinearizedLiquid, SaturationTable, StiffenedGas
from .model import SourceConfig, StateArray, conserved_from_primitives

__all__ = [
    "IdealGas",
    "StiffenedGas",
    "LinearizedLiquid",
    "SaturationTable",
    "SourceConfig",
    "StateArray",
    "conserved_from_primitives",
]
