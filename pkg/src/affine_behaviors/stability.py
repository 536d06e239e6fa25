"""Stability verdicts from kernel representations.

Everything reduces to where polynomial matrices lose rank: the roots of
``det R`` for autonomous behaviors, roots of Smith invariant factors for
stabilizability and detectability.  Roots within the Schur margin of the
unit circle count as unstable.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from . import behavior as bh
from . import polymat
from .config import get_tolerances
from .errors import NotAutonomousError, PreconditionError
from .polymat import PolyMatrix


@dataclass(frozen=True, eq=False)
class StabilityReport:
    contractive: bool
    offset_stable: bool
    wbar: np.ndarray | None
    det_roots: np.ndarray
    margin: float

    def __bool__(self):
        return self.contractive


class OffsetStabilizability(NamedTuple):
    stabilizable: bool
    wbar: np.ndarray | None


@dataclass(frozen=True)
class DetectabilityReport:
    detectable: bool
    offset_stabilizable: bool
    consistent: bool
    checks: dict = field(default_factory=dict)
    diagnostics: list = field(default_factory=list)


def _inside(roots) -> bool:
    roots = np.asarray(roots)
    return bool(roots.size == 0 or np.all(np.abs(roots) < 1.0 - get_tolerances().schur_margin))


def is_contractive(B: bh.OffsetKernelRep) -> StabilityReport:
    Bm = bh.minimize(B)
    if Bm.R.rows != B.q_total:
        raise NotAutonomousError(
            "behavior has free variables; use is_detectable / is_offset_stabilizable instead"
        )
    test = polymat.is_schur(Bm.R)
    roots = np.asarray(test.roots)
    margin = 1.0 - test.max_modulus
    wbar = None
    if test.is_schur:
        wbar = bh.constant_trajectory(Bm).value
    return StabilityReport(test.is_schur, test.is_schur, wbar, roots, margin)


def unstable_rank_drops(R: PolyMatrix, target_rank: int) -> tuple[bool, list]:
    """Whether ``rank R(lambda) == target_rank`` for every ``|lambda| >= 1``.

    Returns the verdict and the roots of the relevant invariant factors.
    """
    if target_rank == 0:
        return True, []
    if R.rows == 0 or R.cols == 0:
        return False, []
    sm = polymat.smith_form(R)
    if sm.rank < target_rank:
        return False, []
    roots = []
    for f in sm.invariant_factors[:target_rank]:
        roots.extend(f.roots().tolist())
    return _inside(roots), roots


def is_zero_stabilizable(Blin: bh.OffsetKernelRep) -> bool:
    """``rank R(lambda) = p`` for all ``|lambda| >= 1`` (minimal ``R``)."""
    Bm = bh.minimize(bh.difference_behavior(Blin))
    ok, _ = unstable_rank_drops(Bm.R, Bm.R.rows)
    return ok


def is_offset_stabilizable(B: bh.OffsetKernelRep) -> OffsetStabilizability:
    Bm = bh.minimize(B)
    if not is_zero_stabilizable(Bm):
        return OffsetStabilizability(False, None)
    if Bm.R.rows == 0:
        return OffsetStabilizability(True, np.zeros(B.q_total))
    R1 = np.real(Bm.R.eval(1.0))
    return OffsetStabilizability(True, np.linalg.pinv(R1) @ Bm.c)


def is_detectable(B: bh.OffsetKernelRep) -> bool:
    """``(w1, c), (w2, c)`` in ``B`` forces ``w1 - w2 -> 0``.

    The differences with ``c = 0`` form ``ker R_w``; this is stable iff
    ``R_w(lambda)`` has full column rank on ``|lambda| >= 1``.
    """
    if B.k == 0:
        raise PreconditionError("no control variables: use is_contractive for autonomous behaviors")
    Bm = bh.minimize(B)
    ok, _ = unstable_rank_drops(Bm.R_w, B.q)
    return ok


def detectability_stabilizability_report(B: bh.OffsetKernelRep) -> DetectabilityReport:
    """Rank tests on ``U R = [[R11, R12], [R21, 0]]`` next to the direct tests.

    ``literal_*`` are the block statements "rank R12 = k" and "rank R21
    constant" on ``|lambda| >= 1``; ``blockwise_detectable`` is the column
    rank of ``[R11; R21]``, which is what detectability amounts to.  The
    report is ``consistent`` when the blockwise statements agree with the
    direct tests; a disagreement of the literal R12 statement is listed in
    ``diagnostics`` without affecting that flag.
    """
    if B.k == 0:
        raise PreconditionError("no control variables: use is_contractive for autonomous behaviors")
    Bm = bh.minimize(B)
    U, R12, z = polymat.row_compress(Bm.R_c)
    r = Bm.R.rows - z
    URw = U @ Bm.R_w
    R11, R21 = URw[:r, :], URw[r:, :]
    lit_det, _ = unstable_rank_drops(R12, B.k) if r >= B.k else (False, [])
    lit_stab, _ = unstable_rank_drops(R21, R21.rows)
    blk_det, _ = unstable_rank_drops(PolyMatrix.vstack([R11, R21]), B.q)
    direct_det = is_detectable(Bm)
    direct_stab = is_offset_stabilizable(bh.project_w(Bm)).stabilizable
    checks = {
        "literal_R12_rank_k": lit_det,
        "literal_R21_constant_rank": lit_stab,
        "blockwise_detectable": blk_det,
        "direct_detectable": direct_det,
        "direct_offset_stabilizable": direct_stab,
    }
    notes = []
    if lit_det != direct_det:
        notes.append(
            f"rank R12(lambda) = k on |lambda| >= 1 is {lit_det} but the direct detectability test gives {direct_det}"
        )
    if lit_stab != direct_stab:
        notes.append(f"constant rank of R21 is {lit_stab} but the direct stabilizability test gives {direct_stab}")
    consistent = blk_det == direct_det and lit_stab == direct_stab
    return DetectabilityReport(direct_det, direct_stab, consistent, checks, notes)
