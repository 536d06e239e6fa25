"""State-space realizations of kernel representations.

Autonomous behaviors get a shift-register realization whose state is a
selection of window samples; behaviors with inputs get an observer form
read off a row-proper kernel representation.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from . import behavior as bh
from .config import get_tolerances
from .errors import (
    ConditioningError,
    DimensionError,
    NotAutonomousError,
    PreconditionError,
    WindowTooShortError,
)
from .polymat import PolyMatrix


def _ro(a):
    a = np.array(a, dtype=float)
    a.flags.writeable = False
    return a


@dataclass(frozen=True, eq=False)
class AutonomousRealization:
    """``x(t+1) = A x(t) + E``, ``w(t) = C x(t) + F``."""

    A: np.ndarray
    C: np.ndarray
    E: np.ndarray
    F: np.ndarray

    def __post_init__(self):
        for name in ("A", "C", "E", "F"):
            object.__setattr__(self, name, _ro(getattr(self, name)))

    @property
    def n(self) -> int:
        return self.A.shape[0]

    @property
    def q(self) -> int:
        return self.C.shape[0]

    def simulate(self, x0, steps):
        x = np.array(x0, dtype=float).reshape(self.n)
        out = np.empty((steps, self.q))
        for t in range(steps):
            out[t] = self.C @ x + self.F
            x = self.A @ x + self.E
        return out


@dataclass(frozen=True, eq=False)
class IoRealization:
    """``x(t+1) = A x + B u + E``, ``y = C x + D u + F``.

    ``inputs``/``outputs`` are the column indices of ``u``/``y`` among the
    behavior's variables.
    """

    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    D: np.ndarray
    inputs: tuple
    outputs: tuple
    E: np.ndarray | None = None
    F: np.ndarray | None = None

    def __post_init__(self):
        n = np.shape(self.A)[0] if np.ndim(self.A) == 2 else 0
        m, p = len(self.inputs), len(self.outputs)
        A = np.array(self.A, dtype=float).reshape(n, n)
        B = np.array(self.B, dtype=float).reshape(n, m)
        C = np.array(self.C, dtype=float).reshape(p, n)
        D = np.array(self.D, dtype=float).reshape(p, m)
        E = np.zeros(n) if self.E is None else np.array(self.E, dtype=float).reshape(n)
        F = np.zeros(p) if self.F is None else np.array(self.F, dtype=float).reshape(p)
        for name, val in zip("ABCDEF", (A, B, C, D, E, F)):
            object.__setattr__(self, name, _ro(val))
        object.__setattr__(self, "inputs", tuple(int(i) for i in self.inputs))
        object.__setattr__(self, "outputs", tuple(int(i) for i in self.outputs))
        if sorted(self.inputs + self.outputs) != list(range(m + p)):
            raise DimensionError("inputs and outputs must partition the variable indices")

    @property
    def n(self) -> int:
        return self.A.shape[0]

    @property
    def m(self) -> int:
        return len(self.inputs)

    @property
    def p(self) -> int:
        return len(self.outputs)

    def simulate(self, x0, u):
        """Returns the full variable trajectory (original column order)."""
        u = np.array(u, dtype=float).reshape(-1, self.m)
        x = np.array(x0, dtype=float).reshape(self.n)
        w = np.empty((u.shape[0], self.m + self.p))
        for t, ut in enumerate(u):
            w[t, list(self.inputs)] = ut
            w[t, list(self.outputs)] = self.C @ x + self.D @ ut + self.F
            x = self.A @ x + self.B @ ut + self.E
        return w


def realize_autonomous(B: bh.OffsetKernelRep) -> AutonomousRealization:
    """Shift-register realization of an autonomous behavior.

    The window of length ``lag`` is an affine function of ``n = deg det R``
    of its samples; those samples (chosen greedily, lowest index first) form
    the state.  For a scalar monic ``R`` this is the companion form with
    ``C = e_1``.  Nonzero offsets end up in ``E`` and ``F``.
    """
    Bp = bh.row_proper(B)
    q = B.q_total
    if Bp.R.rows != q:
        raise NotAutonomousError(f"behavior has {q - Bp.R.rows} free variables")
    L = bh.lag(Bp)
    if L == 0:
        ws = bh.window_space(Bp, 1)
        return AutonomousRealization(np.zeros((0, 0)), np.zeros((q, 0)), np.zeros(0), ws.particular)
    ws = bh.window_space(Bp, L)
    V, p = ws.basis, ws.particular
    n = V.shape[1]
    degs = Bp.R.row_degrees()
    if n != sum(degs):
        raise ConditioningError(f"window space has dimension {n}, expected {sum(degs)}")

    sel = []
    rank_tol = get_tolerances().rank_rel
    for i in range(q * L):
        trial = V[sel + [i]]
        if np.linalg.matrix_rank(trial, tol=rank_tol) == len(sel) + 1:
            sel.append(i)
            if len(sel) == n:
                break
    Vs = V @ np.linalg.inv(V[sel])
    ps = p - Vs @ p[sel]

    # next window: drop w(t), append w(t+L) from the rows shifted so their
    # leading coefficient lands on w(t+L)
    M = np.zeros((q * L, q * L))
    mv = np.zeros(q * L)
    M[: q * (L - 1), q:] = np.eye(q * (L - 1))
    lead = Bp.R.leading_row_coefficients()
    G = np.zeros((q, q * L))
    for i, d in enumerate(degs):
        s = L - d
        for j in range(d):
            G[i, (s + j) * q : (s + j + 1) * q] = Bp.R.coef[i, :, j]
    Linv = np.linalg.inv(lead)
    M[q * (L - 1) :, :] = -Linv @ G
    mv[q * (L - 1) :] = Linv @ Bp.c
    A = (M @ Vs)[sel]
    E = (M @ ps + mv)[sel]
    return AutonomousRealization(A, Vs[:q], E, ps[:q])



def observability_matrix(A, C, L) -> np.ndarray:
    A = np.asarray(A, dtype=float)
    C = np.asarray(C, dtype=float)
    blocks = []
    M = C
    for _ in range(L):
        blocks.append(M)
        M = M @ A
    if not blocks:
        return np.zeros((0, A.shape[0]))
    return np.vstack(blocks)


def state_from_window(real: AutonomousRealization, L: int) -> np.ndarray:
    """``S`` with ``S O_L = I``: recovers ``x(t)`` from ``w_[t, t+L-1]`` (linear part)."""
    O = observability_matrix(real.A, real.C, L)
    n = real.n
    if n == 0:
        return np.zeros((0, real.q * L))
    scale = max(1.0, np.abs(O).max()) if O.size else 1.0
    if O.shape[0] < n or np.linalg.matrix_rank(O, tol=get_tolerances().rank_rel * scale) < n:
        raise WindowTooShortError(f"observability matrix over {L} steps does not have rank {n}")
    return np.linalg.pinv(O)


def spectral_radius(A) -> float:
    A = np.asarray(A, dtype=float)
    if A.size == 0:
        return 0.0
    return float(np.max(np.abs(np.linalg.eigvals(A))))


def lyapunov_solve(A, Q=None) -> np.ndarray:
    """``P`` with ``A^T P A - P = -Q`` from the Kronecker-vectorized system."""
    A = np.asarray(A, dtype=float)
    n = A.shape[0]
    Q = np.eye(n) if Q is None else np.asarray(Q, dtype=float)
    if Q.shape != (n, n):
        raise DimensionError(f"Q has shape {Q.shape}, expected {(n, n)}")
    if n == 0:
        return np.zeros((0, 0))
    rho = spectral_radius(A)
    if rho >= 1.0 - get_tolerances().schur_margin:
        raise PreconditionError(f"A is not Schur (spectral radius {rho:.6g}); Stein equation has no PD solution")
    K = np.kron(A.T, A.T) - np.eye(n * n)
    P = np.linalg.solve(K, -Q.reshape(-1)).reshape(n, n)
    P = 0.5 * (P + P.T)
    res = np.linalg.norm(A.T @ P @ A - P + Q)
    if res > 1e-9 * max(1.0, np.linalg.norm(P)):
        raise ConditioningError(f"Stein equation residual {res:.3g}")
    return P


def _choose_outputs(lead, allowed_inputs=None):
    p, q = lead.shape
    allowed = set(range(q)) if allowed_inputs is None else set(allowed_inputs)
    best, best_score, tried = None, -1.0, []
    scale = max(1.0, np.abs(lead).max())
    # inputs enumerated lexicographically, so strict improvement keeps the lowest on ties
    for inputs in itertools.combinations(range(q), q - p):
        if not set(inputs) <= allowed:
            continue
        outputs = tuple(j for j in range(q) if j not in inputs)
        tried.append(inputs)
        score = np.linalg.svd(lead[:, outputs], compute_uv=False).min() if p else 1.0
        if score > get_tolerances().rank_rel * scale and score > best_score * (1 + 1e-9):
            best, best_score = (inputs, outputs), score
    if best is None:
        raise PreconditionError(f"no input partition with a proper transfer found; tried inputs {tried}")
    return best


def realize_io(B: bh.OffsetKernelRep, allowed_inputs=None) -> IoRealization:
    """Observer-form realization of a behavior with free variables.

    Row ``i`` of the row-proper rep, ``sum_j r_ij w(t+j) = c_i`` of degree
    ``d_i``, contributes states ``x_i1..x_id`` with

        x_i1(t+1) = c_i - r_i0 w(t),   x_ij(t+1) = x_i,j-1(t) - r_i,j-1 w(t),

    and ``lead_i w(t) = x_id(t)``.  The outputs are the columns of the
    leading coefficient matrix forming its best-conditioned square block.
    """
    Bp = bh.row_proper(B)
    q, p = B.q_total, Bp.R.rows
    if p == q:
        raise PreconditionError("behavior is autonomous: no inputs to realize")
    degs = Bp.R.row_degrees()
    lead = Bp.R.leading_row_coefficients() if p else np.zeros((0, q))
    inputs, outputs = _choose_outputs(lead, allowed_inputs)

    n = sum(degs)
    A0 = np.zeros((n, n))
    G = np.zeros((n, q))
    e = np.zeros(n)
    H = np.zeros((p, n))
    h = np.zeros(p)
    pos = 0
    for i, d in enumerate(degs):
        if d == 0:
            h[i] = Bp.c[i]
            continue
        for j in range(d):
            G[pos + j] = Bp.R.coef[i, :, j]
            if j > 0:
                A0[pos + j, pos + j - 1] = 1.0
        e[pos] = Bp.c[i]
        H[i, pos + d - 1] = 1.0
        pos += d
    # lead_Y y + lead_U u = H x + h
    LYi = np.linalg.inv(lead[:, outputs]) if p else np.zeros((0, 0))
    LU = lead[:, inputs]
    C = LYi @ H
    D = -LYi @ LU
    F = LYi @ h
    GY, GU = G[:, outputs], G[:, inputs]
    A = A0 - GY @ C
    Bm = -GU - GY @ D
    E = e - GY @ F
    return IoRealization(A, Bm, C, D, inputs, outputs, E, F)


def ss_to_kernel(real: IoRealization) -> bh.OffsetKernelRep:
    """Kernel representation of the i/o behavior, state eliminated.

    Builds the latent-variable rep ``[0 | xi I - A] ... `` with the state
    as an auxiliary block and projects it away.
    """
    n, m, p = real.n, real.m, real.p
    q = m + p
    coef = np.zeros((n + p, q + n, 2))
    ins, outs = list(real.inputs), list(real.outputs)
    coef[:n, ins, 0] = -real.B
    coef[:n, q:, 0] = -real.A
    coef[:n, q:, 1] = np.eye(n)
    coef[n:, ins, 0] = -real.D
    coef[n:, outs, 0] = np.eye(p)
    coef[n:, q:, 0] = -real.C
    rep = bh.OffsetKernelRep(PolyMatrix(coef), np.concatenate([real.E, real.F]), q, n)
    if n == 0:
        return bh.minimize(rep.with_split(q, 0))
    return bh.project_w(rep)
