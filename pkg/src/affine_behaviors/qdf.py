"""Quadratic difference forms and contraction certificates.

A form ``Phi`` of window length ``W`` acts on ``w_[t, t+W-1]``.  Checks on a
behavior are done on window coordinates: windows of length ``N`` are
``particular + V z`` with ``V`` from :func:`behavior.window_space`, so a
form restricted to the behavior is the small matrix ``V^T Phi V``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import behavior as bh
from . import polymat
from . import realization as rz
from .config import get_tolerances
from .errors import (
    ConditioningError,
    DimensionError,
    InputError,
    NotAutonomousError,
    NotContractiveError,
)
from .polymat import PolyMatrix


@dataclass(frozen=True, eq=False)
class Qdf:
    phi: np.ndarray
    q: int
    W: int

    def __post_init__(self):
        phi = np.array(self.phi, dtype=float)
        if phi.ndim != 2 or phi.shape != (self.q * self.W, self.q * self.W):
            raise DimensionError(f"phi has shape {phi.shape}, expected {self.q * self.W} square")
        if phi.size and np.max(np.abs(phi - phi.T)) > 1e-12 * max(1.0, np.abs(phi).max()):
            raise InputError("phi is not symmetric")
        phi = 0.5 * (phi + phi.T)
        phi.flags.writeable = False
        object.__setattr__(self, "phi", phi)

    @classmethod
    def from_matrix(cls, phi, q=1):
        phi = np.atleast_2d(np.asarray(phi, dtype=float))
        if phi.shape[0] % q:
            raise DimensionError(f"phi size {phi.shape[0]} is not a multiple of q={q}")
        return cls(phi, q, phi.shape[0] // q)

    @property
    def degree(self) -> int:
        return self.W - 1

    def __call__(self, window):
        v = np.asarray(window, dtype=float).reshape(-1)
        return float(v @ self.phi @ v)


@dataclass(frozen=True)
class Verdict:
    passed: bool
    checks: dict
    diagnostics: dict = field(default_factory=dict)

    def __bool__(self):
        return self.passed

    @property
    def failed(self) -> list:
        return [k for k, v in self.checks.items() if not v]


@dataclass(frozen=True, eq=False)
class ContractionCertificate:
    phi: Qdf
    wbar: np.ndarray
    psi: np.ndarray
    diagnostics: dict = field(default_factory=dict)


def evaluate(form: Qdf, w: bh.TrajectorySegment, t: int) -> float:
    if w.dim != form.q:
        raise DimensionError(f"signal has {w.dim} variables, form expects {form.q}")
    return form(w.window(t, form.W))


def increment(form: Qdf) -> Qdf:
    """The form of ``Q(w)(t+1) - Q(w)(t)``, one block longer."""
    q, n = form.q, form.q * form.W
    out = np.zeros((n + q, n + q))
    out[q:, q:] += form.phi
    out[:n, :n] -= form.phi
    return Qdf(out, q, form.W + 1)


def degree_reduce(form: Qdf, return_shift=False):
    """Strip all-zero boundary blocks.

    With ``return_shift`` also returns ``s`` such that the reduced form
    evaluated at ``t + s`` equals the original at ``t``.
    """
    q = form.q
    blocks = [
        not np.any(form.phi[i * q : (i + 1) * q, :]) for i in range(form.W)
    ]
    lo = 0
    while lo < form.W and blocks[lo]:
        lo += 1
    hi = form.W
    while hi > lo and blocks[hi - 1]:
        hi -= 1
    if lo == hi:
        out, lo = Qdf(np.zeros((q, q)), q, 1), 0
    else:
        out = Qdf(form.phi[lo * q : hi * q, lo * q : hi * q], q, hi - lo)
    return (out, lo) if return_shift else out


def stacked_constant(wbar, n) -> np.ndarray:
    return np.tile(np.asarray(wbar, dtype=float).reshape(-1), n)


def build_psi(form: Qdf, wbar) -> np.ndarray:
    """``[[dPhi, -dPhi ws], [-ws^T dPhi, ws^T dPhi ws]]`` with ``ws`` = wbar stacked.

    ``[v; 1]^T Psi [v; 1]`` is the increment form evaluated at ``v - ws``.
    """
    wbar = np.asarray(wbar, dtype=float).reshape(-1)
    if len(wbar) != form.q:
        raise DimensionError(f"wbar has length {len(wbar)}, expected {form.q}")
    d = increment(form).phi
    ws = stacked_constant(wbar, form.W + 1)
    b = -d @ ws
    n = d.shape[0]
    psi = np.zeros((n + 1, n + 1))
    psi[:n, :n] = d
    psi[:n, n] = b
    psi[n, :n] = b
    psi[n, n] = ws @ d @ ws
    return psi


def _eig_tol(mat, *scales) -> float:
    s = max([np.abs(np.linalg.eigvalsh(mat)).max() if mat.size else 0.0] + [float(x) for x in scales])
    return get_tolerances().eig_rel * max(s, 1e-300)


def _restrict(mat, V):
    M = V.T @ mat @ V
    return 0.5 * (M + M.T)


def _window_poly_rows(vectors, q) -> PolyMatrix:
    """Each column ``n`` of ``vectors`` (length ``q*N``) as the row ``sum_j n_j xi^j``."""
    k = vectors.shape[1]
    if k == 0:
        return PolyMatrix.zeros(0, q)
    N = vectors.shape[0] // q
    coef = vectors.T.reshape(k, N, q).transpose(0, 2, 1)
    return PolyMatrix(coef)


def _trivial_kernel(R: PolyMatrix, N: PolyMatrix) -> tuple[bool, list]:
    """Whether ``ker [R; N](sigma) = {0}`` on two-sided sequences, for square nonsingular ``R``.

    The stacked matrix can only lose column rank where ``R`` does, i.e. at
    roots of ``det R``; it is checked there pointwise.  Roots at the origin
    are skipped: ``sigma`` is invertible, so a factor ``xi^j`` constrains
    nothing.
    """
    q = R.cols
    if q == 0:
        return True, []
    roots = polymat.det(R).roots()
    stacked = PolyMatrix.vstack([R, N]) if N.rows else R
    rank_rel = get_tolerances().rank_rel
    drops = []
    for lam in roots:
        if abs(lam) <= 1e-9:
            continue
        sv = np.linalg.svd(stacked.eval(lam), compute_uv=False)
        if sv.size < q or sv[q - 1] <= rank_rel * max(1.0, sv[0]):
            drops.append(complex(lam))
    return not drops, drops


def _zero_locus_trivial(Rdif: PolyMatrix, V, M, tol, q):
    """Trajectories of ``ker Rdif`` whose every window lies in ``V ker(M)`` form ``{0}``?

    ``M`` is the restricted (semidefinite) form; its range directions, mapped
    back to window space, give the extra kernel rows ``N(xi)``.
    """
    vals, vecs = np.linalg.eigh(M) if M.size else (np.zeros(0), np.zeros((0, 0)))
    rng = vecs[:, np.abs(vals) > tol] if M.size else np.zeros((0, 0))
    N = _window_poly_rows(V @ rng, q) if rng.size else PolyMatrix.zeros(0, q)
    ok, drops = _trivial_kernel(Rdif, N)
    return ok, {"kernel_rows_added": N.rows, "locus_roots": drops}


def _require_autonomous(B):
    Bm = bh.minimize(B)
    if Bm.R.rows != B.q_total:
        raise NotAutonomousError("quadratic-form certificates need an autonomous behavior")
    return Bm


def _check_dims(B, form):
    if form.q != B.q_total:
        raise DimensionError(f"form acts on {form.q} variables, behavior has {B.q_total}")


def _decrease_checks(Bdif, form, checks, diag):
    """(b) increment NSD on windows of dif(B), (c) zero-increment locus trivial."""
    q = form.q
    d = increment(form).phi
    V = bh.window_space(Bdif, form.W + 1).basis
    M = _restrict(d, V)
    tol = _eig_tol(M, np.abs(d).max() if d.size else 0.0)
    ev = np.linalg.eigvalsh(M) if M.size else np.zeros(0)
    diag["increment_eigs"] = ev.tolist()
    checks["increment_nsd"] = bool(ev.size == 0 or ev.max() <= tol)
    ok, info = _zero_locus_trivial(bh.minimize(Bdif).R, V, M, tol, q)
    checks["strict"] = bool(ok)
    diag.update(info)


def verify_contraction_form(B: bh.OffsetKernelRep, form: Qdf) -> Verdict:
    """PSD form whose increment is NSD on differences and vanishes only at zero."""
    _check_dims(B, form)
    Bm = _require_autonomous(B)
    Bdif = bh.difference_behavior(Bm)
    checks, diag = {}, {}
    ev = np.linalg.eigvalsh(form.phi)
    diag["phi_eigs"] = ev.tolist()
    checks["phi_psd"] = bool(ev.min() >= -_eig_tol(form.phi))
    _decrease_checks(Bdif, form, checks, diag)
    return Verdict(all(checks.values()), checks, diag)


def verify_lyapunov(Blin: bh.OffsetKernelRep, form: Qdf) -> Verdict:
    """Nonnegative on trajectories, nonincreasing, and strictly so off zero."""
    _check_dims(Blin, form)
    if not Blin.is_linear():
        raise InputError("Lyapunov check needs a linear behavior (zero offset)")
    Bm = _require_autonomous(Blin)
    checks, diag = {}, {}
    V = bh.window_space(Bm, form.W).basis
    M = _restrict(form.phi, V)
    ev = np.linalg.eigvalsh(M) if M.size else np.zeros(0)
    diag["restricted_phi_eigs"] = ev.tolist()
    checks["restricted_nonneg"] = bool(ev.size == 0 or ev.min() >= -_eig_tol(M, np.abs(form.phi).max()))
    _decrease_checks(Bm, form, checks, diag)
    return Verdict(all(checks.values()), checks, diag)


def verify_psi_certificate(B: bh.OffsetKernelRep, psi, form: Qdf) -> Verdict:
    """``[v; 1]^T Psi [v; 1] <= 0`` on all windows ``v`` of ``B``, with equality
    along exactly one trajectory, the constant one."""
    _check_dims(B, form)
    psi = np.asarray(psi, dtype=float)
    d = increment(form).phi
    n = d.shape[0]
    if psi.shape != (n + 1, n + 1):
        raise DimensionError(f"psi has shape {psi.shape}, expected {(n + 1, n + 1)}")
    if np.max(np.abs(psi[:n, :n] - d)) > 1e-9 * max(1.0, np.abs(d).max()):
        raise InputError("leading block of psi differs from the increment of phi")
    psi = 0.5 * (psi + psi.T)
    Bm = _require_autonomous(B)
    checks, diag = {}, {}
    ev_phi = np.linalg.eigvalsh(form.phi)
    checks["phi_psd"] = bool(ev_phi.min() >= -_eig_tol(form.phi))

    ws = bh.window_space(Bm, form.W + 1)
    V, p = ws.basis, ws.particular
    P11, p12, p22 = psi[:n, :n], psi[:n, n], psi[n, n]
    H = _restrict(P11, V)
    g = V.T @ (P11 @ p + p12)
    h = float(p @ P11 @ p + 2 * p12 @ p + p22)
    scale = max(np.abs(psi).max(), 1.0)
    tol = _eig_tol(H, np.abs(P11).max())
    ev = np.linalg.eigvalsh(H) if H.size else np.zeros(0)
    diag["restricted_eigs"] = ev.tolist()
    checks["homogeneous_nsd"] = bool(ev.size == 0 or ev.max() <= tol)
    Hp = np.linalg.pinv(H, rcond=1e-10) if H.size else H
    z0 = -Hp @ g if H.size else np.zeros(0)
    lin_res = np.linalg.norm(H @ z0 + g) if H.size else 0.0
    checks["linear_in_range"] = bool(lin_res <= 1e-8 * scale * max(1.0, np.linalg.norm(p)))
    peak = h - float(g @ Hp @ g) if H.size else h
    diag["maximum"] = peak
    tol_val = 1e-8 * scale * max(1.0, float(p @ p))
    checks["maximum_nonpositive"] = bool(peak <= tol_val)

    const = bh.constant_trajectory(Bm)
    if const is None:
        checks["equality_at_wbar"] = False
        checks["equality_unique"] = False
        return Verdict(False, checks, diag)
    vbar = stacked_constant(const.value, form.W + 1)
    val = float(np.r_[vbar, 1.0] @ psi @ np.r_[vbar, 1.0])
    diag["value_at_wbar"] = val
    checks["equality_at_wbar"] = bool(abs(val) <= tol_val)
    # equality windows: p + V(z0 + ker H); trajectories staying there differ from
    # wbar by elements of dif(B) with windows in V ker H
    ok, info = _zero_locus_trivial(Bm.R, V, H, tol, form.q)
    checks["equality_unique"] = bool(ok)
    diag.update(info)
    return Verdict(all(checks.values()), checks, diag)


def synthesize_contraction_form(B: bh.OffsetKernelRep, Q=None) -> ContractionCertificate:
    """Certificate from the Stein equation of a realization of ``dif(B)``.

    ``Phi = S^T P S`` with ``S`` mapping a window of length ``lag`` to the
    state, so ``Q_Phi(w1 - w2)(t) = x^T P x`` for the difference state and
    its increment is ``-x^T Q x``.
    """
    Bm = _require_autonomous(B)
    test = polymat.is_schur(Bm.R)
    if not test.is_schur:
        raise NotContractiveError(
            f"behavior is not contractive: det R has roots of modulus up to {test.max_modulus:.6g}",
            roots=test.roots,
        )
    q = B.q_total
    real = rz.realize_autonomous(bh.difference_behavior(Bm))
    L = max(bh.lag(Bm), 1)
    P = rz.lyapunov_solve(real.A, Q)
    S = rz.state_from_window(real, L) if real.n else np.zeros((0, q * L))
    phi = S.T @ P @ S
    form = Qdf(0.5 * (phi + phi.T), q, L)
    const = bh.constant_trajectory(Bm)
    wbar = const.value
    psi = build_psi(form, wbar)
    v1 = verify_contraction_form(Bm, form)
    v2 = verify_psi_certificate(Bm, psi, form)
    v3 = verify_lyapunov(bh.difference_behavior(Bm), form)
    if not (v1 and v2 and v3):
        raise ConditioningError(
            f"synthesized certificate failed verification: {v1.failed + v2.failed + v3.failed}"
        )
    diag = {
        "P": P,
        "det_roots": test.roots,
        "contraction_form": v1,
        "psi_certificate": v2,
        "lyapunov": v3,
    }
    return ContractionCertificate(form, wbar, psi, diag)
