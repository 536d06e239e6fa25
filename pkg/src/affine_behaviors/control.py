"""Implementability, controller extraction and stabilizing synthesis.

Plants are offset kernel reps over ``(w, c)``; controllers act on the ``k``
control variables only.  Synthesis works on the difference behavior and
puts the offset back at the end, so a linear controller is returned
unless an equilibrium is requested.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import behavior as bh
from . import polymat
from . import qdf
from . import realization as rz
from . import stability as st
from .config import get_tolerances
from .errors import (
    AffineBehaviorError,
    DimensionError,
    EmptyBehaviorError,
    NotImplementableError,
    SynthesisError,
)
from .polymat import PolyMatrix

PROJECTION_FAILED = "R ⊄ π_w(B)"
DIFFERENCE_FAILED = "dif(B)‖0 ⊄ dif(R)"


@dataclass(frozen=True, eq=False)
class ControllerRep:
    rep: bh.OffsetKernelRep

    @property
    def linear(self) -> bool:
        return not np.any(self.rep.c)

    @property
    def R(self) -> PolyMatrix:
        return self.rep.R

    @property
    def c(self) -> np.ndarray:
        return self.rep.c


@dataclass(frozen=True)
class ImplementabilityVerdict:
    implementable: bool
    reason: str
    failed: str | None = None

    def __bool__(self):
        return self.implementable


@dataclass(frozen=True, eq=False)
class SynthesisResult:
    controller: ControllerRep
    closed_loop: bh.OffsetKernelRep
    regular: bool
    certificate: qdf.ContractionCertificate
    achieved_wbar: np.ndarray
    diagnostics: dict = field(default_factory=dict)


def _free_kernel(Bm: bh.OffsetKernelRep) -> bh.OffsetKernelRep:
    """Minimal rep of ``{w : (w, 0) in dif(B)} = ker R_w``."""
    return bh.minimize(bh.OffsetKernelRep(Bm.R_w, np.zeros(Bm.R.rows), Bm.q))


def is_implementable(B: bh.OffsetKernelRep, Rref: bh.OffsetKernelRep) -> ImplementabilityVerdict:
    """``Rref = B‖C`` for some linear controller ``C``?

    Holds iff ``Rref ⊆ π_w(B)`` and ``ker R_w ⊆ dif(Rref)``.
    """
    if Rref.q_total != B.q:
        raise DimensionError(f"reference has {Rref.q_total} variables, plant has q={B.q}")
    Bm = bh.minimize(B)
    Rm = bh.minimize(Rref)
    if not bh.includes(bh.project_w(Bm), Rm):
        return ImplementabilityVerdict(False, f"{PROJECTION_FAILED}: reference leaves the plant's projection", PROJECTION_FAILED)
    X = polymat.solve_left_multiple(_free_kernel(Bm).R, Rm.R)
    if X is None:
        return ImplementabilityVerdict(
            False, f"{DIFFERENCE_FAILED}: zero control admits trajectories outside the reference", DIFFERENCE_FAILED
        )
    return ImplementabilityVerdict(True, "both inclusions hold")


def _reduce_modulo(A: PolyMatrix, K: PolyMatrix):
    """``(Z, A - Z K)`` with each row of ``A - Z K`` of lowest degree.

    ``K`` must have full row rank.  It is row reduced first; a row's top
    coefficient is cancelled while it lies in the span of the leading
    coefficients of the rows of ``K`` that fit (predictable-degree property).
    """
    Z0 = PolyMatrix.zeros(A.rows, K.rows)
    if A.rows == 0 or K.rows == 0:
        return Z0, A
    V, Kr = polymat.row_reduce(K)
    kdeg = Kr.row_degrees()
    klead = Kr.leading_row_coefficients()
    tol = get_tolerances().coef_zero
    n = A.coef.shape[2]
    quot = np.zeros((A.rows, K.rows, max(n, 1)))
    for i in range(A.rows):
        x = np.array(A.coef[i], dtype=float)
        scale = max(1.0, np.abs(x).max())
        for d in range(x.shape[1] - 1, -1, -1):
            top = x[:, d]
            if np.abs(top).max() <= tol * scale:
                x[:, d] = 0.0
                continue
            fit = [j for j in range(Kr.rows) if kdeg[j] <= d]
            if not fit:
                break
            a, *_ = np.linalg.lstsq(klead[fit].T, top, rcond=None)
            if np.abs(klead[fit].T @ a - top).max() > tol * scale:
                break
            for aj, j in zip(a, fit):
                s = d - kdeg[j]
                x[:, s : s + kdeg[j] + 1] -= aj * Kr.coef[j, :, : kdeg[j] + 1]
                quot[i, j, s] += aj
            x[:, d] = 0.0
    Z = PolyMatrix(quot) @ V
    return Z, A - Z @ K


def synthesize_controller(B: bh.OffsetKernelRep, Rref: bh.OffsetKernelRep) -> ControllerRep:
    """``C = ker_{X(1) eta - zeta} (X R_c)`` with ``X R_w = R_ref``."""
    verdict = is_implementable(B, Rref)
    if not verdict:
        raise NotImplementableError(f"reference is not implementable: {verdict.reason}", verdict.failed)
    Bm = bh.minimize(B)
    Rm = bh.minimize(Rref)
    U, R1h, z = polymat.row_compress(Bm.R_w)
    r = Bm.R.rows - z
    if r == 0:
        X = PolyMatrix.zeros(Rm.R.rows, Bm.R.rows)
    else:
        Y = polymat.solve_left_multiple(R1h, Rm.R)
        if Y is None:
            raise NotImplementableError(f"reference is not implementable: {DIFFERENCE_FAILED}", DIFFERENCE_FAILED)
        X = Y @ U[:r, :]
        if z:
            # X is fixed up to the left kernel rows U[r:] of R_w; pick the
            # representative giving the lowest-degree controller
            Zq, _ = _reduce_modulo(X @ Bm.R_c, U[r:, :] @ Bm.R_c)
            X = X - Zq @ U[r:, :]
    X1 = np.real(X.eval(1.0)) if X.rows and X.cols else np.zeros((X.rows, X.cols))
    rep = bh.OffsetKernelRep(X @ Bm.R_c, X1 @ Bm.c - Rm.c, B.k)
    ctrl = ControllerRep(bh.minimize(rep))
    closed = bh.interconnect_project(Bm, ctrl.rep)
    if not bh.equals(closed, Rm):
        raise SynthesisError("extracted controller does not reproduce the reference", "closed loop equality")
    return ctrl


def is_regular(B: bh.OffsetKernelRep, C: ControllerRep | bh.OffsetKernelRep) -> bool:
    """``m(B ⋈ C) = m(B) - p(C)``."""
    Crep = C.rep if isinstance(C, ControllerRep) else C
    J = bh.interconnect_join(B, Crep)
    if bh.is_empty(J):
        raise EmptyBehaviorError("regularity needs a nonempty interconnection B ⋈ C")
    return bh.io_cardinality(J).m == bh.io_cardinality(B).m - bh.io_cardinality(Crep).p


def _rank_tol(M) -> float:
    return get_tolerances().rank_rel * max(1.0, np.abs(M).max() if M.size else 0.0)


def deadbeat_gain(A, B) -> np.ndarray:
    """``K`` placing every controllable eigenvalue of ``A - B K`` at zero.

    Split the state along ``range(B)``: with ``x = Q [x1; x2]``, ``B ~ [B1; 0]``
    and ``B1`` of full row rank, a deadbeat gain ``F`` for the subsystem
    ``(A22, A21)`` (``x1`` acting as its input) yields
    ``K = B1^+ [A11 + F A21, A12 + F A22]``, which zeroes ``x1 + F x2`` in
    one step.  Uncontrollable modes stay where they are.
    """
    A = np.asarray(A, dtype=float)
    B = np.asarray(B, dtype=float)
    n, m = B.shape
    if n == 0 or m == 0:
        return np.zeros((m, n))
    Uq, s, _ = np.linalg.svd(B)
    r = int(np.sum(s > _rank_tol(B)))
    if r == 0:
        return np.zeros((m, n))
    Q = Uq
    At = Q.T @ A @ Q
    Bt = Q.T @ B
    B1 = Bt[:r]
    A11, A12 = At[:r, :r], At[:r, r:]
    A21, A22 = At[r:, :r], At[r:, r:]
    F = deadbeat_gain(A22, A21) if n > r else np.zeros((r, 0))
    Kt = np.linalg.pinv(B1) @ np.hstack([A11 + F @ A21, A12 + F @ A22])
    return Kt @ Q.T


def _target_control(Bm, wbar):
    """Minimum-norm ``cbar`` with ``(wbar, cbar)`` a constant trajectory."""
    R1 = np.real(Bm.R.eval(1.0))
    rhs = Bm.c - R1[:, : Bm.q] @ wbar
    Rc = R1[:, Bm.q :]
    cbar, *_ = np.linalg.lstsq(Rc, rhs, rcond=None)
    res = np.max(np.abs(Rc @ cbar - rhs), initial=0.0)
    if res > get_tolerances().residual * max(1.0, np.abs(rhs).max(initial=0.0)):
        raise SynthesisError(
            f"no constant trajectory of the plant has w = {wbar.tolist()} (residual {res:.3g})",
            "target equilibrium",
        )
    return cbar


def _observer_based_controller(Bdif: bh.OffsetKernelRep):
    """Deadbeat observer plus deadbeat state feedback, as a kernel rep over ``c``."""
    q, k = Bdif.q, Bdif.k
    try:
        real = rz.realize_io(Bdif, allowed_inputs=range(q, q + k))
    except AffineBehaviorError as exc:
        raise SynthesisError(
            f"no input/output partition with inputs among the control variables: {exc}", "io partition"
        ) from exc
    meas = [i for i, j in enumerate(real.outputs) if j >= q]
    Cm = real.C[meas]
    Dm = real.D[meas]
    K = deadbeat_gain(real.A, real.B)
    G = -deadbeat_gain(real.A.T, Cm.T).T
    rho_fb = rz.spectral_radius(real.A - real.B @ K)
    rho_obs = rz.spectral_radius(real.A + G @ Cm)
    diag = {"n": real.n, "feedback_radius": rho_fb, "observer_radius": rho_obs}
    margin = 1.0 - get_tolerances().schur_margin
    if rho_fb >= margin:
        raise SynthesisError(f"state feedback cannot stabilize (radius {rho_fb:.6g})", "stabilizable", diag)
    if rho_obs >= margin:
        raise SynthesisError(f"observer cannot be made stable (radius {rho_obs:.6g})", "detectable", diag)
    Ac = real.A - real.B @ K + G @ Cm - G @ Dm @ K
    # controller variables are the k control columns; its inputs are the measured
    # plant outputs, its outputs the plant inputs
    c_in = tuple(real.outputs[i] - q for i in meas)
    c_out = tuple(j - q for j in real.inputs)
    ctrl_real = rz.IoRealization(Ac, -G, -K, np.zeros((len(c_out), len(c_in))), c_in, c_out)
    return rz.ss_to_kernel(ctrl_real), diag


def synthesize_stabilizing_controller(B: bh.OffsetKernelRep, target_wbar=None) -> SynthesisResult:
    """Regular controller making the closed loop contractive.

    Without a target the controller is linear.  With a target ``wbar`` the
    controller offset is ``C(1) cbar`` for the minimum-norm ``cbar`` with
    ``(wbar, cbar)`` constant in ``B``, which places the equilibrium.
    """
    if B.k == 0:
        raise SynthesisError("plant has no control variables", "control variables")
    Bm = bh.minimize(B)
    if not st.is_detectable(Bm):
        raise SynthesisError("plant is not detectable", "detectable")
    if not st.is_offset_stabilizable(bh.project_w(Bm)).stabilizable:
        raise SynthesisError("projection onto w is not offset stabilizable", "offset stabilizable")
    cbar = None
    if target_wbar is not None:
        target_wbar = np.asarray(target_wbar, dtype=float).reshape(-1)
        if len(target_wbar) != B.q:
            raise DimensionError(f"target has length {len(target_wbar)}, expected {B.q}")
        cbar = _target_control(Bm, target_wbar)

    Bdif = bh.difference_behavior(Bm)
    if bh.io_cardinality(Bm).m == 0:
        Clin = bh.OffsetKernelRep(PolyMatrix.zeros(0, B.k), np.zeros(0), B.k)
        diag = {"n": 0}
    else:
        Clin, diag = _observer_based_controller(Bdif)
    zeta = np.zeros(Clin.R.rows)
    if cbar is not None and Clin.R.rows:
        zeta = np.real(Clin.R.eval(1.0)) @ cbar
    ctrl = ControllerRep(bh.OffsetKernelRep(Clin.R, zeta, B.k, minimal=Clin.minimal))

    regular = is_regular(Bm, ctrl)
    if not regular:
        raise SynthesisError("synthesized interconnection is not regular", "regular", diag)
    closed = bh.interconnect_project(Bm, ctrl.rep)
    report = st.is_contractive(closed)
    if not report.contractive:
        raise SynthesisError(
            f"closed loop is not contractive (max root modulus {1 - report.margin:.6g})", "contractive", diag
        )
    cert = qdf.synthesize_contraction_form(closed)
    wbar = report.wbar
    if target_wbar is not None and np.max(np.abs(wbar - target_wbar)) > 1e-8 * max(1.0, np.abs(target_wbar).max()):
        raise SynthesisError(f"closed loop settles at {wbar.tolist()}, not the target", "equilibrium", diag)
    diag.update({"cbar": cbar, "det_roots": report.det_roots})
    return SynthesisResult(ctrl, closed, regular, cert, wbar, diag)
