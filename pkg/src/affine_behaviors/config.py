"""Numerical tolerances shared by every module.

The active set can be swapped process-wide with :func:`set_tolerances` or
temporarily with the :func:`tolerances` context manager (the CLI does this
for its ``--coef-tol``/``--rank-tol``/``--schur-margin`` flags).
"""

from __future__ import annotations

import contextlib
import dataclasses
from dataclasses import dataclass


@dataclass(frozen=True)
class Tolerances:
    coef_zero: float = 1e-9
    rank_rel: float = 1e-8
    schur_margin: float = 1e-9
    residual: float = 1e-8
    eig_rel: float = 1e-8
    max_degree: int = 64


_active = Tolerances()


def get_tolerances() -> Tolerances:
    return _active


def set_tolerances(**changes) -> Tolerances:
    global _active
    _active = dataclasses.replace(_active, **changes)
    return _active


@contextlib.contextmanager
def tolerances(**changes):
    global _active
    saved = _active
    _active = dataclasses.replace(_active, **changes)
    try:
        yield _active
    finally:
        _active = saved
