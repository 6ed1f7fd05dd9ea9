"""Smooth and hysteretic regularizations of a grazing-sliding bifurcation in planar Filippov systems."""

from .dynsys import (
    PiecewiseSystem,
    SmoothField,
    TransitionFunction,
    default_phi,
    from_json,
    make_example_family,
    make_relay_system,
    polynomial_phi,
)
from .errors import GrazslideError, NumericalError, ValidationError

__version__ = "0.1.0"

__all__ = [
    "PiecewiseSystem",
    "SmoothField",
    "TransitionFunction",
    "default_phi",
    "from_json",
    "make_example_family",
    "make_relay_system",
    "polynomial_phi",
    "GrazslideError",
    "NumericalError",
    "ValidationError",
]
