"""Stability, contraction and control of discrete-time affine behaviors.

Behaviors are given by offset kernel representations ``R(sigma) w = c``
with ``R`` a real polynomial matrix (:mod:`.polymat`).
"""

__version__ = "0.1.0"

from .behavior import OffsetKernelRep, TrajectorySegment
from .config import Tolerances, get_tolerances, set_tolerances, tolerances
from .errors import (
    AffineBehaviorError,
    ConditioningError,
    DimensionError,
    EmptyBehaviorError,
    InputError,
    NotAutonomousError,
    NotContractiveError,
    NotImplementableError,
    PreconditionError,
    SynthesisError,
)
from .polymat import Poly, PolyMatrix

__all__ = [
    "AffineBehaviorError",
    "ConditioningError",
    "DimensionError",
    "EmptyBehaviorError",
    "InputError",
    "NotAutonomousError",
    "NotContractiveError",
    "NotImplementableError",
    "OffsetKernelRep",
    "Poly",
    "PolyMatrix",
    "PreconditionError",
    "SynthesisError",
    "Tolerances",
    "TrajectorySegment",
    "get_tolerances",
    "set_tolerances",
    "tolerances",
]
