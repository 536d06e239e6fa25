import numpy as np
import pytest

from affine_behaviors.behavior import OffsetKernelRep
from affine_behaviors.polymat import PolyMatrix

ACCEPTANCE_RESULTS = {}


def rep(entries, c=None, q=None, k=0):
    return OffsetKernelRep.from_entries(entries, c=c, q=q, k=k)


def poly_from_roots(roots, lead=1.0):
    return np.real(np.poly(roots)[::-1]) * lead


def random_roots(rng, deg, contractive):
    """Real/complex-pair roots; contractive ones have modulus <= 0.9, otherwise one root has modulus >= 1.05."""
    roots = []
    while len(roots) < deg:
        if deg - len(roots) >= 2 and rng.random() < 0.5:
            r = rng.uniform(0.1, 0.9)
            th = rng.uniform(0.2, np.pi - 0.2)
            roots += [r * np.exp(1j * th), r * np.exp(-1j * th)]
        else:
            roots.append(rng.uniform(-0.9, 0.9))
    if not contractive:
        i = rng.integers(deg)
        if np.iscomplex(roots[i]):
            # pairs are stored as (z, conj z); rescale both to keep coefficients real
            j = i + 1 if roots[i].imag > 0 else i - 1
            s = rng.uniform(1.05, 1.6) / abs(roots[i])
            roots[i] *= s
            roots[j] *= s
        else:
            roots[i] = rng.choice([-1, 1]) * rng.uniform(1.05, 1.6)
    return np.array(roots)


def random_autonomous(rng, contractive, q=None):
    """Random autonomous affine rep with lag <= 3 and known det roots.

    q = 1: a scalar polynomial of degree 1..3.  q = 2: R = M diag(p1, p2) [[1, a xi], [0, 1]]
    with p1 of degree <= 2, so det R = det(M) p1 p2.
    """
    q = int(rng.integers(1, 3)) if q is None else q
    if q == 1:
        deg = int(rng.integers(1, 4))
        roots = random_roots(rng, deg, contractive)
        coeffs = poly_from_roots(roots, rng.uniform(0.5, 3.0) * rng.choice([-1, 1]))
        B = OffsetKernelRep(PolyMatrix.from_entries([[coeffs]]), rng.uniform(-3, 3, 1), 1)
        return B, roots
    d1 = int(rng.integers(1, 3))
    d2 = int(rng.integers(1, 3))
    bad = -1 if contractive else int(rng.integers(2))
    r1 = random_roots(rng, d1, bad != 0)
    r2 = random_roots(rng, d2, bad != 1)
    p1, p2 = poly_from_roots(r1), poly_from_roots(r2)
    a = rng.uniform(-1, 1)
    D = PolyMatrix.from_entries([[p1, a * np.r_[0.0, p1]], [[0.0], p2]])
    M = rng.uniform(-1, 1, (2, 2)) + 2 * np.eye(2)
    R = PolyMatrix.constant(M) @ D
    return OffsetKernelRep(R, rng.uniform(-3, 3, 2), 2), np.concatenate([r1, r2])


def random_state_space_plant(rng, n=None, with_offset=True):
    """Plant over (x | u, y): x(t+1) = A x + b u + e, y = C x + f."""
    n = int(rng.integers(1, 3)) if n is None else n
    A = rng.uniform(-1.2, 1.2, (n, n))
    b = rng.uniform(-1, 1, (n, 1))
    C = rng.uniform(-1, 1, (1, n))
    coef = np.zeros((n + 1, n + 2, 2))
    coef[:n, :n, 0] = -A
    coef[:n, :n, 1] = np.eye(n)
    coef[:n, n, 0] = -b[:, 0]
    coef[n, :n, 0] = -C[0]
    coef[n, n + 1, 0] = 1.0
    off = rng.uniform(-1, 1, n + 1) if with_offset else np.zeros(n + 1)
    return OffsetKernelRep(PolyMatrix(coef), off, n, 2)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def example():
    return rep([[[9, 18, 10]]], c=[20])


@pytest.fixture
def integrator():
    return rep([[[-1, 1], [-1], [0]], [[1], [0], [-1]]], q=1, k=2)


@pytest.fixture
def drift():
    return rep([[[-1, 1], [-1]]], q=1, k=1)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE_RESULTS):
        ok, title, detail = ACCEPTANCE_RESULTS[n]
        status = "PASS" if ok else "FAIL"
        terminalreporter.write_line(f"criterion {n}: {status} - {title}{' (' + detail + ')' if detail else ''}")
