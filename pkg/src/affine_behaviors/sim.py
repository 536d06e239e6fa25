"""Forward simulation of kernel representations and contraction experiments.

The recursion runs on the row-proper form: each row ``i`` (degree ``d_i``)
is shifted so its leading coefficient hits ``w(t+L)``, and the stacked
leading coefficient matrix is inverted.  Residuals are checked against the
representation the caller passed in, not the transformed one.
"""

from __future__ import annotations

import csv
import os
from dataclasses import dataclass, field

import numpy as np

from . import behavior as bh
from . import polymat
from .config import get_tolerances
from .errors import (
    ConditioningError,
    DimensionError,
    InputError,
    NotAutonomousError,
    PreconditionError,
)
from .polymat import PolyMatrix

DEFAULT_SEED = 20240611


def default_seed() -> int:
    env = os.environ.get("AB_SEED")
    if env is None or env.strip() == "":
        return DEFAULT_SEED
    try:
        return int(env)
    except ValueError as exc:
        raise InputError(f"AB_SEED must be an integer, got {env!r}") from exc


@dataclass(frozen=True, eq=False)
class SimRun:
    trajectories: list
    residuals: np.ndarray
    converged: bool
    limit: np.ndarray | None = None


@dataclass(frozen=True, eq=False)
class ContractionExperiment:
    contractive: bool
    final_gap: float
    worst_pair: int
    gap_history: np.ndarray
    limits: np.ndarray = field(default=None)

    def __bool__(self):
        return self.contractive


def _recursion_data(Rr: PolyMatrix):
    """Lower-coefficient block ``G`` (acting on the current window) and leading matrix."""
    q = Rr.cols
    degs = Rr.row_degrees()
    L = max(degs) if degs else 0
    lead = Rr.leading_row_coefficients()
    scale = max(1.0, np.abs(lead).max()) if lead.size else 1.0
    if lead.size == 0 or np.linalg.matrix_rank(lead, tol=get_tolerances().rank_rel * scale) < q:
        raise PreconditionError("not forward-solvable in this form: leading row coefficients are singular")
    G = np.zeros((q, q * L))
    for i, d in enumerate(degs):
        s = L - d
        for j in range(d):
            G[i, (s + j) * q : (s + j + 1) * q] = Rr.coef[i, :, j]
    return L, degs, np.linalg.inv(lead), G


def residuals(R: PolyMatrix, c, samples) -> np.ndarray:
    """``max_i |(R(sigma) w)_i(t) - c_i|`` for every ``t`` where all shifts are available."""
    w = np.asarray(samples, dtype=float)
    d = max(R.degree, 0)
    n = w.shape[0] - d
    if n <= 0 or R.rows == 0:
        return np.zeros(max(n, 0))
    acc = np.zeros((n, R.rows))
    for j in range(d + 1):
        if j < R.coef.shape[2]:
            acc += w[j : j + n] @ R.coef[:, :, j].T
    return np.max(np.abs(acc - np.asarray(c)), axis=1)


def _check_residuals(R, c, samples, res):
    if res.size == 0:
        return
    w = np.asarray(samples)
    scale = max(1.0, float(np.abs(w).max())) * max(1.0, R.max_abs()) * max(1, R.degree + 1)
    if res.max() > get_tolerances().residual * scale:
        raise ConditioningError(f"simulated trajectory violates the representation (residual {res.max():.3g})")


def random_window(B: bh.OffsetKernelRep, rng, length=None) -> np.ndarray:
    """Uniform draw in ``[-1, 1]^(q L)`` projected onto the admissible windows."""
    L = bh.lag(B) if length is None else length
    q = B.q_total
    u = rng.uniform(-1.0, 1.0, size=q * L)
    if L == 0:
        return np.zeros((0, q))
    ws = bh.window_space(B, L)
    v = ws.particular + ws.basis @ (ws.basis.T @ (u - ws.particular))
    return v.reshape(L, q)


def _as_init(init, L, q):
    if isinstance(init, bh.TrajectorySegment):
        start, s = init.start_time, init.samples
    else:
        start, s = 0, np.asarray(init, dtype=float)
    if L == 0 and s.size == 0:
        return start, np.zeros((0, q))
    s = np.asarray(s, dtype=float).reshape(-1)
    if s.size != L * q:
        raise DimensionError(f"initial window needs {L} samples of {q} variables ({L * q} numbers), got {s.size}")
    return start, s.reshape(L, q)


def _converged(samples, L, tol):
    tail = samples[-(max(L, 1) + 1) :]
    if tail.shape[0] < 2 or not np.all(np.isfinite(tail)):
        return False, None
    if np.max(np.abs(tail - tail[-1])) <= tol:
        return True, tail[-1].copy()
    return False, None


def simulate(B: bh.OffsetKernelRep, init=None, T: int = 100, seed=None, tol=1e-6) -> SimRun:
    """Run ``T`` steps forward from an initial window of length ``lag(B)``.

    The returned trajectory has ``lag + T`` samples (the initial window
    first).  ``init=None`` draws a random admissible window.
    """
    Bp = bh.row_proper(B)
    q = B.q_total
    if Bp.R.rows != q:
        raise NotAutonomousError("simulation needs an autonomous behavior (use simulate_forced)")
    L, degs, Linv, G = _recursion_data(Bp.R)
    if init is None:
        rng = np.random.default_rng(default_seed() if seed is None else seed)
        start, w0 = 0, random_window(Bp, rng, L)
    else:
        start, w0 = _as_init(init, L, q)
        if L:
            ws = bh.window_space(Bp, L)
            v = w0.reshape(-1)
            dev = v - ws.particular
            off = dev - ws.basis @ (ws.basis.T @ dev)
            if np.max(np.abs(off), initial=0.0) > 1e-8 * max(1.0, np.abs(v).max()):
                raise InputError("initial window is not a window of the behavior")
    if T < 0:
        raise InputError("number of steps must be nonnegative")
    w = np.empty((L + T, q))
    w[:L] = w0
    rhs0 = Linv @ Bp.c
    M = Linv @ G
    with np.errstate(over="ignore", invalid="ignore"):
        for t in range(T):
            w[L + t] = rhs0 - M @ w[t : t + L].reshape(-1)
    res = residuals(B.R, B.c, w)
    finite = np.all(np.isfinite(w))
    if finite:
        _check_residuals(B.R, B.c, w, res)
    conv, limit = _converged(w, L, tol)
    return SimRun([bh.TrajectorySegment(start, w)], res, conv, limit)


def simulate_forced(B: bh.OffsetKernelRep, control_signal, init=None, T=None, tol=1e-6) -> SimRun:
    """Feed a given control signal into ``B`` and run the resulting ``w`` recursion.

    ``control_signal`` starts at the same time as ``init``.  The returned
    trajectory holds ``(w, c)`` samples over the simulated horizon.
    """
    if B.k == 0:
        raise InputError("plant has no control variables to substitute")
    sig = control_signal if isinstance(control_signal, bh.TrajectorySegment) else bh.TrajectorySegment(0, control_signal)
    if sig.dim != B.k:
        raise DimensionError(f"control signal has {sig.dim} variables, plant has k={B.k}")
    Bm = bh.minimize(B)
    U, Rh, z = polymat.row_compress(Bm.R_w)
    r = Bm.R.rows - z
    if r != B.q:
        raise PreconditionError("substituting the control signal leaves free w variables (non-autonomous)")
    eta = (np.real(U.eval(1.0)) @ Bm.c) if Bm.R.rows else np.zeros(0)
    URc = U @ Bm.R_c
    Vr, Rr = polymat.row_reduce(Rh)
    V1 = np.real(Vr.eval(1.0))
    Fc = Vr @ URc[:r, :]
    eta_top = V1 @ eta[:r]
    L, degs, Linv, G = _recursion_data(Rr)
    q = B.q
    start, w0 = _as_init(np.zeros(0) if init is None else init, L, q)
    if init is None:
        start = sig.start_time
    if sig.start_time != start:
        raise InputError("control signal must start with the initial window")
    c = sig.samples
    dF = max(Fc.degree, 0)
    # row i at time tau = t + L - d_i needs c up to tau + dF, and every
    # simulated w sample is paired with a control sample
    max_steps = min(len(c) - L, len(c) - dF - L + min(degs))
    if T is None:
        T = max_steps
    if T < 1 or T > max_steps:
        raise DimensionError(f"control signal of length {len(c)} supports at most {max_steps} steps, requested {T}")
    w = np.empty((L + T, q))
    w[:L] = w0
    M = Linv @ G
    Fcoef = Fc.coef
    for t in range(T):
        forcing = np.zeros(q)
        for i, d in enumerate(degs):
            tau = t + L - d
            for j in range(Fcoef.shape[2]):
                forcing[i] += Fcoef[i, :, j] @ c[tau + j]
        w[L + t] = Linv @ (eta_top - forcing) - M @ w[t : t + L].reshape(-1)
    full = np.hstack([w, c[: L + T]])
    res = residuals(B.R, B.c, full)
    if np.all(np.isfinite(full)):
        try:
            _check_residuals(B.R, B.c, full, res)
        except ConditioningError as exc:
            raise InputError(f"control signal is not compatible with the plant: {exc}") from exc
    conv, limit = _converged(w, L, tol)
    return SimRun([bh.TrajectorySegment(start, full)], res, conv, limit)


def empirical_contraction(B, pairs=20, T=300, tol=1e-6, seed=None) -> ContractionExperiment:
    """Simulate random pairs and compare their gap after ``T`` steps."""
    Bp = bh.row_proper(B)
    if Bp.R.rows != B.q_total:
        raise NotAutonomousError("empirical contraction needs an autonomous behavior")
    rng = np.random.default_rng(default_seed() if seed is None else seed)
    L = bh.lag(Bp)
    history = np.zeros((pairs, L + T))
    limits = []
    with np.errstate(over="ignore", invalid="ignore"):
        for k in range(pairs):
            a = simulate(Bp, random_window(Bp, rng, L), T).trajectories[0].samples
            b = simulate(Bp, random_window(Bp, rng, L), T).trajectories[0].samples
            gap = np.max(np.abs(a - b), axis=1)
            history[k] = np.where(np.isfinite(gap), gap, np.inf)
            limits.append(a[-1])
    final = history[:, -1]
    worst = int(np.argmax(final)) if pairs else -1
    gap_max = float(final.max()) if pairs else 0.0
    return ContractionExperiment(
        bool(gap_max < tol), gap_max, worst, history.max(axis=0) if pairs else history, np.array(limits)
    )


def _fmt(x) -> str:
    return format(float(x), ".17g")


def write_csv(out, runs, long_format=False, names=None):
    """Write trajectories as CSV (``t,var_0,...``; long format prepends ``traj_id``).

    ``out`` is a path or a text stream; in wide (non-long) format with
    several trajectories and a path, one file per trajectory is written as
    ``stem_<i>.csv``.  Returns the list of written paths (empty for streams).
    """
    segs = []
    for r in runs if isinstance(runs, (list, tuple)) else [runs]:
        segs.extend(r.trajectories if isinstance(r, SimRun) else [r])
    if not segs:
        raise InputError("no trajectories to write")
    dim = segs[0].dim
    header = ["t"] + (list(names) if names else [f"var_{i}" for i in range(dim)])

    def rows(seg, tid=None):
        for i, s in enumerate(seg.samples):
            prefix = [str(tid)] if tid is not None else []
            yield prefix + [str(seg.start_time + i)] + [_fmt(x) for x in s]

    if hasattr(out, "write"):
        wr = csv.writer(out, lineterminator="\n")
        if long_format:
            wr.writerow(["traj_id"] + header)
            for tid, seg in enumerate(segs):
                wr.writerows(rows(seg, tid))
        else:
            for seg in segs:
                wr.writerow(header)
                wr.writerows(rows(seg))
        return []
    path = os.fspath(out)
    if long_format or len(segs) == 1:
        with open(path, "w", newline="") as fh:
            write_csv(fh, segs, long_format, names)
        return [path]
    stem, ext = os.path.splitext(path)
    written = []
    for i, seg in enumerate(segs):
        p = f"{stem}_{i}{ext or '.csv'}"
        with open(p, "w", newline="") as fh:
            write_csv(fh, [seg], False, names)
        written.append(p)
    return written
