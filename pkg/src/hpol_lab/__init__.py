"""Numerical laboratory for polynomial entropy and weak KAM objects on the two-torus."""

from hpol_lab.torus import (
    DomainError,
    NumericError,
    TonelliModel,
    flat,
    revolution,
    pinched,
    custom,
    model_from_params,
    intersection_number,
)

__version__ = "0.1.0"

__all__ = [
    "DomainError",
    "NumericError",
    "TonelliModel",
    "flat",
    "revolution",
    "pinched",
    "custom",
    "model_from_params",
    "intersection_number",
]
