"""Polynomial matrices over R[xi] with double-precision coefficients.

Coefficients are stored ascending by degree: ``coeffs[i]`` multiplies
``xi**i``.  A :class:`PolyMatrix` keeps a dense ``(rows, cols, ncoef)``
array; all elimination routines (Smith form, row compression, row
reduction) run on plain nested lists of 1-D arrays and rebuild the matrix
at the end.

Floating point elimination decides "is this remainder zero?" with the
``coef_zero`` tolerance scaled by the magnitude of the operands, so the
routines are reliable for desk-scale degrees and moderate coefficients,
not for badly scaled input.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import null_space

from .config import get_tolerances
from .errors import (
    ConditioningError,
    DimensionError,
    PreconditionError,
    SingularMatrixPolynomialError,
)

_EMPTY = np.zeros(0)


def _trim(c, tol=0.0):
    c = np.asarray(c, dtype=float)
    if c.ndim == 0:
        c = c.reshape(1)
    if tol > 0.0:
        c = np.where(np.abs(c) <= tol, 0.0, c)
    nz = np.flatnonzero(c)
    if nz.size == 0:
        return _EMPTY
    return c[: nz[-1] + 1]


def _maxabs(c):
    return float(np.max(np.abs(c))) if len(c) else 0.0


def _deg(c):
    return len(c) - 1


def _pmul(a, b):
    if not len(a) or not len(b):
        return _EMPTY
    return np.convolve(a, b)


def _padd(a, b, sign=1.0):
    n = max(len(a), len(b))
    out = np.zeros(n)
    out[: len(a)] += a
    out[: len(b)] += sign * np.asarray(b)
    return out


def _axpy(x, p, y, tol):
    """``x - p*y`` with cancellation noise removed."""
    prod = _pmul(p, y)
    out = _padd(x, prod, -1.0)
    scale = max(1.0, _maxabs(x), _maxabs(prod))
    return _trim(out, tol * scale)


def _divmod(a, b, tol):
    """Euclidean division of coefficient arrays; ``b`` must be nonzero."""
    db = _deg(b)
    da = _deg(a)
    if da < db:
        return _EMPTY, a
    lc = b[-1]
    r = np.array(a, dtype=float)
    quo = np.zeros(da - db + 1)
    for k in range(da - db, -1, -1):
        quo[k] = r[k + db] / lc
        r[k : k + db + 1] -= quo[k] * b
        r[k + db] = 0.0
    scale = max(1.0, _maxabs(a))
    return _trim(quo), _trim(r[:db] if db > 0 else _EMPTY, tol * scale)


def _peval(c, lam):
    out = 0.0 * lam
    for coef in c[::-1]:
        out = out * lam + coef
    return out


class Poly:
    """Real polynomial; the zero polynomial has empty coefficients and degree -1."""

    __slots__ = ("coeffs",)

    def __init__(self, coeffs=()):
        c = np.array(_trim(coeffs), dtype=float)
        c.flags.writeable = False
        self.coeffs = c

    @property
    def degree(self) -> int:
        return len(self.coeffs) - 1

    def is_zero(self) -> bool:
        return len(self.coeffs) == 0

    def __call__(self, lam):
        return _peval(self.coeffs, lam)

    def __add__(self, other):
        return Poly(_padd(self.coeffs, _as_poly(other).coeffs))

    __radd__ = __add__

    def __sub__(self, other):
        return Poly(_padd(self.coeffs, _as_poly(other).coeffs, -1.0))

    def __rsub__(self, other):
        return _as_poly(other) - self

    def __neg__(self):
        return Poly(-self.coeffs)

    def __mul__(self, other):
        return Poly(_pmul(self.coeffs, _as_poly(other).coeffs))

    __rmul__ = __mul__

    def __divmod__(self, other):
        other = _as_poly(other)
        if other.is_zero():
            raise ZeroDivisionError("polynomial division by zero")
        q, r = _divmod(self.coeffs, other.coeffs, get_tolerances().coef_zero)
        return Poly(q), Poly(r)

    def __eq__(self, other):
        try:
            other = _as_poly(other)
        except TypeError:
            return NotImplemented
        return np.array_equal(self.coeffs, other.coeffs)

    def __hash__(self):
        return hash(tuple(self.coeffs))

    def allclose(self, other, atol=1e-9) -> bool:
        other = _as_poly(other)
        n = max(len(self.coeffs), len(other.coeffs))
        a = np.zeros(n)
        b = np.zeros(n)
        a[: len(self.coeffs)] = self.coeffs
        b[: len(other.coeffs)] = other.coeffs
        return bool(np.all(np.abs(a - b) <= atol))

    def monic(self):
        if self.is_zero():
            return self
        return Poly(self.coeffs / self.coeffs[-1])

    def roots(self) -> np.ndarray:
        return poly_roots(self.coeffs)

    def __repr__(self):
        return f"Poly({list(self.coeffs)})"


def _as_poly(x):
    if isinstance(x, Poly):
        return x
    if np.isscalar(x):
        return Poly([float(x)])
    return Poly(x)


def poly_roots(coeffs) -> np.ndarray:
    """Roots as eigenvalues of the companion matrix of the monic polynomial."""
    c = _trim(coeffs)
    n = len(c) - 1
    if n < 1:
        return np.zeros(0, dtype=complex)
    a = c[:-1] / c[-1]
    comp = np.zeros((n, n))
    comp[1:, :-1] = np.eye(n - 1)
    comp[:, -1] = -a
    return np.linalg.eigvals(comp).astype(complex)


class PolyMatrix:
    """Matrix with entries in R[xi], stored as a ``(rows, cols, ncoef)`` array."""

    __slots__ = ("coef",)

    def __init__(self, coef):
        a = np.array(coef, dtype=float)
        if a.ndim == 2:
            a = a[:, :, None]
        if a.ndim != 3:
            raise DimensionError("coefficient array must be 2-D or 3-D")
        if a.shape[2] == 0:
            a = np.zeros(a.shape[:2] + (1,))
        nz = [k for k in range(a.shape[2]) if np.any(a[:, :, k] != 0.0)]
        n = nz[-1] + 1 if nz else 1
        a = a[:, :, :n].copy()
        a.flags.writeable = False
        self.coef = a

    # -- construction ---------------------------------------------------
    @classmethod
    def from_entries(cls, entries, cols=None):
        """Build from a nested list of entries (coefficient lists, Polys or scalars)."""
        rows = len(entries)
        if rows == 0:
            return cls.zeros(0, cols or 0)
        ncols = len(entries[0])
        polys = []
        for row in entries:
            if len(row) != ncols:
                raise DimensionError("ragged polynomial matrix rows")
            polys.append([_as_poly(e) for e in row])
        n = max([1] + [len(p.coeffs) for r in polys for p in r])
        a = np.zeros((rows, ncols, n))
        for i, r in enumerate(polys):
            for j, p in enumerate(r):
                a[i, j, : len(p.coeffs)] = p.coeffs
        return cls(a)

    @classmethod
    def zeros(cls, rows, cols):
        return cls(np.zeros((rows, cols, 1)))

    @classmethod
    def identity(cls, n):
        return cls(np.eye(n)[:, :, None])

    @classmethod
    def constant(cls, m):
        m = np.atleast_2d(np.asarray(m, dtype=float))
        return cls(m[:, :, None])

    @classmethod
    def shift(cls, n, k=1):
        """``xi**k * I_n``."""
        a = np.zeros((n, n, k + 1))
        a[:, :, k] = np.eye(n)
        return cls(a)

    # -- shape ------------------------------------------------------------
    @property
    def shape(self):
        return self.coef.shape[:2]

    @property
    def rows(self) -> int:
        return self.coef.shape[0]

    @property
    def cols(self) -> int:
        return self.coef.shape[1]

    @property
    def degree(self) -> int:
        if not np.any(self.coef):
            return -1
        return self.coef.shape[2] - 1

    def coeff(self, k) -> np.ndarray:
        if k < self.coef.shape[2]:
            return np.array(self.coef[:, :, k])
        return np.zeros(self.shape)

    def entry(self, i, j) -> Poly:
        return Poly(self.coef[i, j])

    def __getitem__(self, key):
        if isinstance(key, tuple) and len(key) == 2 and all(
            isinstance(k, (int, np.integer)) for k in key
        ):
            return self.entry(*key)
        if not isinstance(key, tuple):
            key = (key, slice(None))
        r, c = key
        if isinstance(r, (int, np.integer)):
            r = [r]
        if isinstance(c, (int, np.integer)):
            c = [c]
        sub = self.coef[r][:, c]
        return PolyMatrix(sub)

    def row_degrees(self) -> list[int]:
        out = []
        for i in range(self.rows):
            nz = [k for k in range(self.coef.shape[2]) if np.any(self.coef[i, :, k] != 0.0)]
            out.append(nz[-1] if nz else -1)
        return out

    def leading_row_coefficients(self) -> np.ndarray:
        degs = self.row_degrees()
        out = np.zeros(self.shape)
        for i, d in enumerate(degs):
            if d >= 0:
                out[i] = self.coef[i, :, d]
        return out

    def max_abs(self) -> float:
        return float(np.max(np.abs(self.coef))) if self.coef.size else 0.0

    # -- arithmetic -------------------------------------------------------
    def eval(self, lam) -> np.ndarray:
        """Entrywise evaluation at a (complex) scalar."""
        out = np.zeros(self.shape, dtype=complex if np.iscomplexobj(lam) else float)
        for k in range(self.coef.shape[2] - 1, -1, -1):
            out = out * lam + self.coef[:, :, k]
        return out

    def __call__(self, lam):
        return self.eval(lam)

    def _padded(self, n):
        a = np.zeros(self.shape + (n,))
        a[:, :, : self.coef.shape[2]] = self.coef
        return a

    def __add__(self, other):
        other = _as_pm(other)
        if other.shape != self.shape:
            raise DimensionError(f"shape mismatch {self.shape} vs {other.shape}")
        n = max(self.coef.shape[2], other.coef.shape[2])
        return PolyMatrix(self._padded(n) + other._padded(n))

    def __sub__(self, other):
        return self + (-_as_pm(other))

    def __neg__(self):
        return PolyMatrix(-self.coef)

    def scale(self, s):
        return PolyMatrix(self.coef * s)

    def __matmul__(self, other):
        other = _as_pm(other)
        if self.cols != other.rows:
            raise DimensionError(f"cannot multiply {self.shape} by {other.shape}")
        na, nb = self.coef.shape[2], other.coef.shape[2]
        out = np.zeros((self.rows, other.cols, na + nb - 1))
        for i in range(na):
            ai = self.coef[:, :, i]
            if not np.any(ai):
                continue
            for j in range(nb):
                out[:, :, i + j] += ai @ other.coef[:, :, j]
        return PolyMatrix(out)

    def __rmatmul__(self, other):
        return _as_pm(other) @ self

    @property
    def T(self):
        return PolyMatrix(np.transpose(self.coef, (1, 0, 2)))

    @staticmethod
    def hstack(mats):
        mats = [_as_pm(m) for m in mats]
        n = max(m.coef.shape[2] for m in mats)
        return PolyMatrix(np.concatenate([m._padded(n) for m in mats], axis=1))

    @staticmethod
    def vstack(mats):
        mats = [_as_pm(m) for m in mats]
        n = max(m.coef.shape[2] for m in mats)
        return PolyMatrix(np.concatenate([m._padded(n) for m in mats], axis=0))

    def allclose(self, other, atol=1e-9) -> bool:
        other = _as_pm(other)
        if other.shape != self.shape:
            return False
        n = max(self.coef.shape[2], other.coef.shape[2])
        return bool(np.all(np.abs(self._padded(n) - other._padded(n)) <= atol))

    def residual(self, other) -> float:
        other = _as_pm(other)
        n = max(self.coef.shape[2], other.coef.shape[2])
        diff = self._padded(n) - other._padded(n)
        return float(np.max(np.abs(diff))) if diff.size else 0.0

    def clean(self, tol=None):
        """Zero out coefficients below ``tol`` times the largest coefficient."""
        tol = get_tolerances().coef_zero if tol is None else tol
        s = max(1.0, self.max_abs())
        return PolyMatrix(np.where(np.abs(self.coef) <= tol * s, 0.0, self.coef))

    def to_nested(self) -> list:
        return [[list(map(float, _trim(self.coef[i, j]))) for j in range(self.cols)] for i in range(self.rows)]

    def __repr__(self):
        return f"PolyMatrix({self.to_nested()})"

    def __eq__(self, other):
        if not isinstance(other, PolyMatrix):
            return NotImplemented
        return self.shape == other.shape and self.allclose(other, atol=0.0)

    __hash__ = None


def _as_pm(x):
    if isinstance(x, PolyMatrix):
        return x
    return PolyMatrix.constant(x)


# ---------------------------------------------------------------------------
# Elimination on nested lists of coefficient arrays.


def _grid(a: PolyMatrix):
    return [[_trim(a.coef[i, j]) for j in range(a.cols)] for i in range(a.rows)]


def _ungrid(g, rows, cols):
    n = max([1] + [len(e) for r in g for e in r])
    out = np.zeros((rows, cols, n))
    for i, r in enumerate(g):
        for j, e in enumerate(r):
            out[i, j, : len(e)] = e
    return PolyMatrix(out)


def _eye_grid(n):
    return [[np.ones(1) if i == j else _EMPTY for j in range(n)] for i in range(n)]


def _row_sub(g, i, k, p, tol):
    """row_i -= p * row_k"""
    gi, gk = g[i], g[k]
    for j in range(len(gi)):
        if len(gk[j]):
            gi[j] = _axpy(gi[j], p, gk[j], tol)


def _col_sub(g, j, k, p, tol):
    """col_j -= p * col_k"""
    for row in g:
        if len(row[k]):
            row[j] = _axpy(row[j], p, row[k], tol)


def _row_scale(g, i, s):
    g[i] = [e * s for e in g[i]]


def _swap_rows(g, i, k):
    g[i], g[k] = g[k], g[i]


def _swap_cols(g, i, k):
    for row in g:
        row[i], row[k] = row[k], row[i]


def _check_degree(*grids):
    cap = get_tolerances().max_degree
    for g in grids:
        for row in g:
            for e in row:
                if len(e) - 1 > cap:
                    raise ConditioningError(
                        f"polynomial degree exceeded cap {cap} during elimination; "
                        "input is likely ill-conditioned"
                    )


@dataclass(frozen=True)
class SmithDecomposition:
    U: PolyMatrix
    D: PolyMatrix
    V: PolyMatrix
    invariant_factors: list = field(default_factory=list)
    residual: float = 0.0

    @property
    def rank(self) -> int:
        return len(self.invariant_factors)


def smith_form(a: PolyMatrix) -> SmithDecomposition:
    """Unimodular ``U``, ``V`` with ``U @ A @ V = D`` diagonal, monic, divisibility-chained.

    Pivots on the minimum-degree nonzero entry of the trailing block (ties
    to the smallest ``(row, col)``), clears its row and column by Euclidean
    division, and enforces divisibility by folding an offending row into the
    pivot row.
    """
    tol = get_tolerances().coef_zero
    p, q = a.shape
    D = _grid(a)
    U = _eye_grid(p)
    V = _eye_grid(q)
    factors = []
    for k in range(min(p, q)):
        pivot_found = False
        while True:
            best = None
            for i in range(k, p):
                for j in range(k, q):
                    e = D[i][j]
                    if len(e) and (best is None or len(e) < best[0]):
                        best = (len(e), i, j)
            if best is None:
                break
            pivot_found = True
            _, i, j = best
            _swap_rows(D, k, i)
            _swap_rows(U, k, i)
            _swap_cols(D, k, j)
            _swap_cols(V, k, j)
            piv = D[k][k]
            dirty = False
            for i in range(k + 1, p):
                if len(D[i][k]):
                    quo, rem = _divmod(D[i][k], piv, tol)
                    _row_sub(D, i, k, quo, tol)
                    _row_sub(U, i, k, quo, tol)
                    D[i][k] = rem
                    dirty = dirty or bool(len(rem))
            for j in range(k + 1, q):
                if len(D[k][j]):
                    quo, rem = _divmod(D[k][j], piv, tol)
                    _col_sub(D, j, k, quo, tol)
                    _col_sub(V, j, k, quo, tol)
                    D[k][j] = rem
                    dirty = dirty or bool(len(rem))
            _check_degree(D, U, V)
            if dirty:
                continue
            bad = None
            for i in range(k + 1, p):
                for j in range(k + 1, q):
                    if len(D[i][j]) and len(_divmod(D[i][j], piv, tol)[1]):
                        bad = i
                        break
                if bad is not None:
                    break
            if bad is None:
                break
            # row_k += row_bad brings a non-multiple into the pivot row
            _row_sub(D, k, bad, np.array([-1.0]), tol)
            _row_sub(U, k, bad, np.array([-1.0]), tol)
        if not pivot_found:
            break
        lc = D[k][k][-1]
        _row_scale(D, k, 1.0 / lc)
        _row_scale(U, k, 1.0 / lc)
        factors.append(Poly(D[k][k]))
    Um, Dm, Vm = _ungrid(U, p, p), _ungrid(D, p, q), _ungrid(V, q, q)
    res = (Um @ a @ Vm).residual(Dm)
    return SmithDecomposition(Um, Dm, Vm, factors, res)


def rank_at(a: PolyMatrix, lam) -> int:
    """Numerical rank of ``A(lam)`` (singular values relative to the largest)."""
    if 0 in a.shape:
        return 0
    s = np.linalg.svd(a.eval(complex(lam)), compute_uv=False)
    if s[0] <= get_tolerances().coef_zero:
        return 0
    return int(np.sum(s > get_tolerances().rank_rel * s[0]))


def rank_generic(a: PolyMatrix, smith: SmithDecomposition | None = None) -> int:
    """Rank over R(xi): count of nonzero invariant factors, cross-checked pointwise."""
    if 0 in a.shape:
        return 0
    smith = smith_form(a) if smith is None else smith
    r = smith.rank
    roots = np.concatenate([f.roots() for f in smith.invariant_factors] + [np.zeros(0)])
    rng = np.random.default_rng(20240611)
    checks = []
    while len(checks) < 3:
        lam = rng.uniform(0.6, 1.6) * np.exp(2j * np.pi * rng.uniform())
        if roots.size and np.min(np.abs(roots - lam)) < 1e-2:
            continue
        checks.append(rank_at(a, lam))
    if max(checks) != r:
        raise ConditioningError(
            f"Smith form reports rank {r} but pointwise evaluation gives {max(checks)}"
        )
    return r


def row_compress(a: PolyMatrix):
    """Unimodular ``U`` with ``U @ A = [A_hat; 0]``, ``A_hat`` full row rank.

    Returns ``(U, A_hat, zero_rows)``.  Row operations only: a polynomial
    row echelon form built column by column with minimum-degree pivoting.
    """
    tol = get_tolerances().coef_zero
    p, q = a.shape
    D = _grid(a)
    U = _eye_grid(p)
    r = 0
    for j in range(q):
        if r >= p:
            break
        while True:
            best = None
            for i in range(r, p):
                e = D[i][j]
                if len(e) and (best is None or len(e) < best[0]):
                    best = (len(e), i)
            if best is None:
                break
            _, i = best
            _swap_rows(D, r, i)
            _swap_rows(U, r, i)
            piv = D[r][j]
            done = True
            for i in range(r + 1, p):
                if len(D[i][j]):
                    quo, rem = _divmod(D[i][j], piv, tol)
                    _row_sub(D, i, r, quo, tol)
                    _row_sub(U, i, r, quo, tol)
                    D[i][j] = rem
                    done = done and not len(rem)
            _check_degree(D, U)
            if done:
                r += 1
                break
    # rows >= r are zero up to noise
    for i in range(r, p):
        D[i] = [_EMPTY] * q
    Um = _ungrid(U, p, p)
    Dm = _ungrid(D, p, q)
    return Um, Dm[:r, :] if r else PolyMatrix.zeros(0, q), p - r


def row_reduce(a: PolyMatrix):
    """Row-proper (row-reduced) form of a full-row-rank matrix.

    Returns ``(U, A_r)`` with ``U`` unimodular, ``U @ A = A_r`` and the
    leading row coefficient matrix of ``A_r`` of full row rank.  Each step
    cancels the top coefficient of the highest-degree row participating in
    a left null vector of the leading coefficient matrix (ties to the lowest
    row index).
    """
    tol = get_tolerances()
    p, q = a.shape
    D = _grid(a)
    U = _eye_grid(p)
    for _ in range(10_000):
        cur = _ungrid(D, p, q)
        degs = cur.row_degrees()
        if any(d < 0 for d in degs):
            raise PreconditionError("row_reduce requires a matrix without zero rows")
        lead = cur.leading_row_coefficients()
        if p == 0:
            break
        nsb = null_space(lead.T, rcond=tol.rank_rel)
        if nsb.shape[1] == 0:
            break
        alpha = nsb[:, 0]
        support = [i for i in range(p) if abs(alpha[i]) > tol.rank_rel * np.max(np.abs(alpha))]
        r = max(support, key=lambda i: (degs[i], -i))
        dr = degs[r]
        new_d = [np.array(e) for e in D[r]]
        new_u = [np.array(e) for e in U[r]]
        for i in support:
            if i == r:
                continue
            coef = np.zeros(dr - degs[i] + 1)
            coef[-1] = alpha[i] / alpha[r]
            for j in range(q):
                if len(D[i][j]):
                    new_d[j] = _axpy(new_d[j], -coef, D[i][j], tol.coef_zero)
            for j in range(p):
                if len(U[i][j]):
                    new_u[j] = _axpy(new_u[j], -coef, U[i][j], tol.coef_zero)
        # the top coefficient cancels by construction
        for j in range(q):
            e = new_d[j]
            if len(e) - 1 >= dr:
                e = np.array(e)
                e[dr:] = 0.0
                new_d[j] = _trim(e)
        D[r] = new_d
        U[r] = new_u
        _check_degree(D, U)
    else:  # pragma: no cover
        raise ConditioningError("row reduction did not terminate")
    return _ungrid(U, p, p), _ungrid(D, p, q)


def det(a: PolyMatrix) -> Poly:
    """Determinant by evaluation at roots of unity and FFT interpolation."""
    p, q = a.shape
    if p != q:
        raise DimensionError(f"determinant of non-square {p}x{q} matrix")
    if p == 0:
        return Poly([1.0])
    degs = a.row_degrees()
    if any(d < 0 for d in degs):
        return Poly()
    n = sum(degs) + 1
    pts = np.exp(2j * np.pi * np.arange(n) / n)
    vals = np.array([np.linalg.det(a.eval(z)) for z in pts])
    coeffs = np.real(np.fft.fft(vals)) / n
    return Poly(_trim(coeffs, get_tolerances().coef_zero * _maxabs(coeffs)))


@dataclass(frozen=True)
class SchurTest:
    is_schur: bool
    roots: np.ndarray
    determinant: Poly

    def __bool__(self):
        return self.is_schur

    @property
    def max_modulus(self) -> float:
        return float(np.max(np.abs(self.roots))) if self.roots.size else 0.0


def is_schur(a: PolyMatrix) -> SchurTest:
    """All roots of ``det A`` strictly inside the unit disk (by the Schur margin)."""
    if a.rows != a.cols:
        raise DimensionError("Schur test needs a square matrix")
    d = det(a)
    if d.is_zero():
        raise SingularMatrixPolynomialError("singular matrix polynomial: det is identically zero")
    roots = d.roots()
    margin = get_tolerances().schur_margin
    ok = bool(np.all(np.abs(roots) < 1.0 - margin))
    return SchurTest(ok, roots, d)


def solve_left_multiple(a: PolyMatrix, b: PolyMatrix) -> PolyMatrix | None:
    """Polynomial ``X`` with ``X @ A = B``, or ``None`` when none exists.

    ``A`` must have full row rank.  With ``U A V = [diag(d) 0]`` the equation
    becomes ``Y [diag(d) 0] = B V`` for ``Y = X U^{-1}``: the trailing
    columns of ``B V`` must vanish and column ``i`` must be divisible by
    ``d_i``; then ``X = Y U``.
    """
    if a.cols != b.cols:
        raise DimensionError(f"column mismatch: A has {a.cols}, B has {b.cols}")
    tol = get_tolerances().coef_zero
    p = a.rows
    if p == 0:
        if b.degree < 0 or b.clean().degree < 0:
            return PolyMatrix.zeros(b.rows, 0)
        return None
    sm = smith_form(a)
    if rank_generic(a, sm) != p:
        raise PreconditionError("solve_left_multiple requires A of full row rank")
    bv = b @ sm.V
    scale = max(1.0, bv.max_abs())
    bvg = _grid(bv)
    Y = [[_EMPTY] * p for _ in range(b.rows)]
    for i in range(b.rows):
        for j in range(bv.cols):
            e = _trim(bvg[i][j], tol * scale)
            if j >= p:
                if len(e):
                    return None
                continue
            quo, rem = _divmod(e, sm.invariant_factors[j].coeffs, tol)
            if len(_trim(rem, tol * scale)):
                return None
            Y[i][j] = quo
    x = _ungrid(Y, b.rows, p) @ sm.U
    return x
