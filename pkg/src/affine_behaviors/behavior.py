"""Offset kernel representations ``B = {w : R(sigma) w = c}``.

Unimodular row operations act on the offset through ``U(1)``: constants are
fixed by the shift, so ``U(sigma) c = U(1) c``.  Every structural operation
below (minimization, row reduction, projection) relies on that.

Variables are split as ``(w, c)``: the first ``q`` columns of ``R`` are the
to-be-controlled variables, the last ``k`` the control variables.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np
from scipy.linalg import null_space

from . import polymat
from .config import get_tolerances
from .errors import DimensionError, EmptyBehaviorError, WindowRangeError
from .polymat import PolyMatrix


@dataclass(frozen=True, eq=False)
class OffsetKernelRep:
    R: PolyMatrix
    c: np.ndarray
    q: int
    k: int = 0
    minimal: bool = False
    _memo: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        c = np.array(self.c, dtype=float).reshape(-1)
        c.flags.writeable = False
        object.__setattr__(self, "c", c)
        if len(c) != self.R.rows:
            raise DimensionError(f"offset has length {len(c)}, R has {self.R.rows} rows")
        if self.q < 0 or self.k < 0 or self.q + self.k != self.R.cols:
            raise DimensionError(f"variable split ({self.q}, {self.k}) does not match {self.R.cols} columns")

    @classmethod
    def from_entries(cls, entries, c=None, q=None, k=0, cols=None):
        """Convenience constructor from nested coefficient lists (ascending degree)."""
        R = PolyMatrix.from_entries(entries, cols=cols)
        c = np.zeros(R.rows) if c is None else c
        q = R.cols - k if q is None else q
        return cls(R, c, q, k)

    @property
    def q_total(self) -> int:
        return self.q + self.k

    @property
    def rows(self) -> int:
        return self.R.rows

    @property
    def R_w(self) -> PolyMatrix:
        return self.R[:, : self.q]

    @property
    def R_c(self) -> PolyMatrix:
        return self.R[:, self.q :]

    def is_linear(self) -> bool:
        return not np.any(self.c)

    def with_offset(self, c):
        return OffsetKernelRep(self.R, c, self.q, self.k, self.minimal)

    def with_split(self, q, k=0):
        return OffsetKernelRep(self.R, self.c, q, k, self.minimal)

    def __repr__(self):
        return f"OffsetKernelRep(R={self.R.to_nested()}, c={[float(x) for x in self.c]}, q={self.q}, k={self.k})"


@dataclass(frozen=True)
class TrajectorySegment:
    start_time: int
    samples: np.ndarray

    def __post_init__(self):
        s = np.array(self.samples, dtype=float)
        if s.ndim == 1:
            s = s[:, None]
        if s.ndim != 2 or s.shape[0] == 0:
            raise DimensionError("trajectory segment needs at least one sample of uniform dimension")
        object.__setattr__(self, "samples", s)

    @property
    def dim(self) -> int:
        return self.samples.shape[1]

    def __len__(self):
        return self.samples.shape[0]

    @property
    def end_time(self) -> int:
        return self.start_time + len(self) - 1

    def window(self, t, length) -> np.ndarray:
        """Stacked vector ``w_[t, t+length-1]``."""
        i = t - self.start_time
        if i < 0 or i + length > len(self):
            raise WindowRangeError(f"window [{t}, {t + length - 1}] outside segment [{self.start_time}, {self.end_time}]")
        return self.samples[i : i + length].reshape(-1)


class IoCardinality(NamedTuple):
    m: int
    p: int


class ConstantTrajectory(NamedTuple):
    value: np.ndarray
    unique: bool


class WindowSpace(NamedTuple):
    basis: np.ndarray
    particular: np.ndarray


def _offset_tol(*arrays) -> float:
    scale = max([1.0] + [float(np.max(np.abs(a))) for a in arrays if np.size(a)])
    return get_tolerances().residual * scale


def _transform_offset(U: PolyMatrix, c: np.ndarray) -> np.ndarray:
    if U.rows == 0:
        return np.zeros(0)
    return np.real(U.eval(1.0)) @ c


def is_empty(B: OffsetKernelRep) -> bool:
    """Whether the compressed zero rows demand a nonzero constant."""
    U, _, z = polymat.row_compress(B.R)
    if z == 0:
        return False
    ct = _transform_offset(U, B.c)
    return bool(np.any(np.abs(ct[B.R.rows - z :]) > _offset_tol(B.c, np.real(U.eval(1.0)))))


def _require_nonempty(B):
    if is_empty(B):
        raise EmptyBehaviorError("behavior is empty: the offset is inconsistent with R")


def minimize(B: OffsetKernelRep) -> OffsetKernelRep:
    """Equivalent representation with ``R`` of full row rank over R[xi]."""
    if B.minimal:
        return B
    memo = B._memo.get("minimize")
    if memo is not None:
        return memo
    U, Rh, z = polymat.row_compress(B.R)
    ct = _transform_offset(U, B.c)
    r = B.R.rows - z
    if z and np.any(np.abs(ct[r:]) > _offset_tol(B.c, np.real(U.eval(1.0)))):
        raise EmptyBehaviorError("behavior is empty: the offset is inconsistent with R")
    out = OffsetKernelRep(Rh, ct[:r], B.q, B.k, minimal=True)
    B._memo["minimize"] = out
    return out


def row_proper(B: OffsetKernelRep) -> OffsetKernelRep:
    """Minimal representation whose leading row coefficient matrix has full row rank."""
    memo = B._memo.get("row_proper")
    if memo is not None:
        return memo
    Bm = minimize(B)
    if Bm.R.rows == 0:
        out = Bm
    else:
        U, Rr = polymat.row_reduce(Bm.R)
        out = OffsetKernelRep(Rr, _transform_offset(U, Bm.c), B.q, B.k, minimal=True)
    out._memo["row_proper"] = out
    B._memo["row_proper"] = out
    return out


def difference_behavior(B: OffsetKernelRep) -> OffsetKernelRep:
    _require_nonempty(B)
    return OffsetKernelRep(B.R, np.zeros(B.R.rows), B.q, B.k, B.minimal)


def io_cardinality(B: OffsetKernelRep) -> IoCardinality:
    Bm = minimize(B)
    p = Bm.R.rows
    return IoCardinality(B.q_total - p, p)


def is_autonomous(B: OffsetKernelRep) -> bool:
    return io_cardinality(B).m == 0


def constant_trajectory(B: OffsetKernelRep, tol=None) -> ConstantTrajectory | None:
    """Constant ``wbar`` with ``R(1) wbar = c``: minimum-norm least squares, or ``None``."""
    Bm = minimize(B)
    n = B.q_total
    if Bm.R.rows == 0:
        return ConstantTrajectory(np.zeros(n), n == 0)
    R1 = np.real(Bm.R.eval(1.0))
    wbar, *_ = np.linalg.lstsq(R1, Bm.c, rcond=None)
    tol = _offset_tol(Bm.c, R1) if tol is None else tol
    if np.max(np.abs(R1 @ wbar - Bm.c), initial=0.0) > tol:
        return None
    unique = np.linalg.matrix_rank(R1, tol=get_tolerances().rank_rel * max(1.0, np.abs(R1).max())) == n
    return ConstantTrajectory(wbar, bool(unique))


def toeplitz(R: PolyMatrix, N: int) -> tuple[np.ndarray, np.ndarray]:
    """Banded matrix stacking every shift of each row that fits in ``N`` samples.

    Returns ``(T, row_index)`` where ``row_index[i]`` names the row of ``R``
    a Toeplitz row came from (used to stack offsets).
    """
    q = R.cols
    degs = R.row_degrees()
    blocks = []
    idx = []
    for i, d in enumerate(degs):
        d = max(d, 0)
        for s in range(N - d):
            row = np.zeros(q * N)
            for j in range(d + 1):
                row[(s + j) * q : (s + j + 1) * q] = R.coef[i, :, j] if j < R.coef.shape[2] else 0.0
            blocks.append(row)
            idx.append(i)
    T = np.array(blocks).reshape(len(blocks), q * N)
    return T, np.array(idx, dtype=int)


def window_space(B: OffsetKernelRep, N: int) -> WindowSpace:
    """Windows of length ``N`` as ``particular + span(basis)``.

    Built from the row-proper minimal representation, for which the
    Toeplitz null space coincides with the set of (forward-extendable)
    trajectory windows.
    """
    if N < 0:
        raise DimensionError("window length must be nonnegative")
    Bp = row_proper(B)
    n = B.q_total * N
    T, idx = toeplitz(Bp.R, N)
    if T.shape[0] == 0:
        return WindowSpace(np.eye(n), np.zeros(n))
    rhs = Bp.c[idx]
    basis = null_space(T, rcond=get_tolerances().rank_rel)
    part, *_ = np.linalg.lstsq(T, rhs, rcond=None)
    if np.max(np.abs(T @ part - rhs)) > _offset_tol(rhs, T):
        raise EmptyBehaviorError("inconsistent window offsets: behavior is empty")
    return WindowSpace(basis, part)


def lag(B: OffsetKernelRep) -> int:
    Bp = row_proper(B)
    if Bp.R.rows == 0:
        return 0
    return max(0, max(Bp.R.row_degrees()))


def includes(B1: OffsetKernelRep, B2: OffsetKernelRep) -> bool:
    """Whether ``B2`` is a subset of ``B1``.

    ``B2 ⊆ B1`` iff ``R1 = X R2`` for a polynomial ``X`` and ``c1 = X(1) c2``.
    """
    if B1.q_total != B2.q_total:
        raise DimensionError(f"variable counts differ: {B1.q_total} vs {B2.q_total}")
    M1, M2 = minimize(B1), minimize(B2)
    X = polymat.solve_left_multiple(M2.R, M1.R)
    if X is None:
        return False
    if X.cols == 0:
        return True
    pred = np.real(X.eval(1.0)) @ M2.c
    return bool(np.max(np.abs(pred - M1.c), initial=0.0) <= _offset_tol(M1.c, pred))


def equals(B1: OffsetKernelRep, B2: OffsetKernelRep) -> bool:
    return includes(B1, B2) and includes(B2, B1)


def _compress_control(Bm: OffsetKernelRep):
    """``U R_c = [R12; 0]``; returns ``(U R_w, U(1) c, rows of R12)``."""
    U, R12, z = polymat.row_compress(Bm.R_c)
    return U @ Bm.R_w, _transform_offset(U, Bm.c), R12, Bm.R.rows - z


def project_w(B: OffsetKernelRep) -> OffsetKernelRep:
    """Eliminate the control variables: the representation of ``pi_w(B)``.

    With ``U R_c = [R12; 0]`` (``R12`` full row rank, hence surjective) the
    projection is represented by the rows of ``U R_w`` facing the zero block.
    """
    Bm = minimize(B)
    if B.k == 0 or B.q == 0:
        return Bm
    URw, eta, _, r = _compress_control(Bm)
    return OffsetKernelRep(URw[r:, :], eta[r:], B.q, 0, minimal=True)


def interconnect_join(B: OffsetKernelRep, C: OffsetKernelRep) -> OffsetKernelRep:
    """``B ⋈ C``: stack ``[R_w R_c; 0 C_R]`` with offset ``[c_B; c_C]`` (not minimized)."""
    if C.q_total != B.k:
        raise DimensionError(f"controller acts on {C.q_total} variables, plant has k={B.k}")
    top = B.R
    bottom = PolyMatrix.hstack([PolyMatrix.zeros(C.R.rows, B.q), C.R])
    R = PolyMatrix.vstack([top, bottom])
    return OffsetKernelRep(R, np.concatenate([B.c, C.c]), B.q, B.k)


def interconnect_project(B: OffsetKernelRep, C: OffsetKernelRep) -> OffsetKernelRep:
    """``B || C``; for ``q = 0`` (full interconnection) this is ``B ∩ C``."""
    J = interconnect_join(B, C)
    if is_empty(J):
        raise EmptyBehaviorError("incompatible interconnection: B ⋈ C is empty")
    Jm = minimize(J)
    if B.q == 0:
        return Jm.with_split(Jm.q_total, 0)
    return project_w(Jm)
