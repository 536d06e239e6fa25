import numpy as np
import pytest
from conftest import random_autonomous, random_state_space_plant, rep

from affine_behaviors import behavior as bh
from affine_behaviors import sim, stability
from affine_behaviors.behavior import OffsetKernelRep
from affine_behaviors.errors import NotAutonomousError, PreconditionError
from affine_behaviors.polymat import PolyMatrix


def test_is_contractive_example(example):
    r = stability.is_contractive(example)
    assert r.contractive and r.offset_stable
    assert abs(r.wbar[0] - 20 / 37) < 1e-12
    np.testing.assert_allclose(np.sort_complex(r.det_roots), [-0.9 - 0.3j, -0.9 + 0.3j], atol=1e-12)
    assert r.margin == pytest.approx(1 - np.sqrt(0.9))


def test_is_contractive_marginal():
    r = stability.is_contractive(rep([[[-1, 1]]]))
    assert not r.contractive and not r.offset_stable and r.wbar is None


def test_is_contractive_first_order():
    r = stability.is_contractive(rep([[[-1, 2]]], c=[1]))
    assert r.contractive and r.wbar[0] == pytest.approx(1.0)


def test_is_contractive_non_autonomous(drift):
    with pytest.raises(NotAutonomousError, match="is_detectable"):
        stability.is_contractive(drift.with_split(2, 0))


def test_is_zero_stabilizable_examples():
    assert stability.is_zero_stabilizable(rep([[[-1, 1], [-1]]], q=2))
    assert not stability.is_zero_stabilizable(rep([[[-1, 1]]]))
    assert stability.is_zero_stabilizable(rep([[[-0.5, 1]]]))


def test_is_offset_stabilizable_examples(example):
    ok, wbar = stability.is_offset_stabilizable(rep([[[-1, 1], [-1]]], c=[5], q=2))
    assert ok
    np.testing.assert_allclose(wbar, [0.0, -5.0], atol=1e-12)
    assert not stability.is_offset_stabilizable(rep([[[-1, 1]]])).stabilizable
    assert stability.is_offset_stabilizable(example).stabilizable


def test_offset_stabilizable_constant_is_trajectory():
    rng = np.random.default_rng(31)
    for _ in range(10):
        B = random_state_space_plant(rng)
        full = B.with_split(B.q_total, 0)
        ok, wbar = stability.is_offset_stabilizable(full)
        if not ok:
            continue
        assert np.max(np.abs(np.real(full.R.eval(1.0)) @ wbar - full.c)) < 1e-9
        assert np.max(sim.residuals(full.R, full.c, np.tile(wbar, (4, 1)))) < 1e-9


def test_is_detectable_examples(integrator, drift):
    assert stability.is_detectable(integrator)
    assert not stability.is_detectable(drift)
    assert stability.is_detectable(rep([[[1], [0]]], c=[3], q=1, k=1))


def test_is_detectable_requires_controls(example):
    with pytest.raises(PreconditionError):
        stability.is_detectable(example)


def test_report_examples(integrator, drift):
    r = stability.detectability_stabilizability_report(integrator)
    assert r.detectable and r.offset_stabilizable and r.consistent
    r = stability.detectability_stabilizability_report(drift)
    assert not r.detectable and r.consistent
    dead = rep([[[-0.5, 1], [0]]], c=[1], q=1, k=1)
    r = stability.detectability_stabilizability_report(dead)
    assert r.detectable and r.offset_stabilizable


def test_stability_characterizations_agree():
    rng = np.random.default_rng(32)
    for i in range(50):
        B, roots = random_autonomous(rng, i % 2 == 0)
        c = stability.is_contractive(B).contractive
        assert c == (i % 2 == 0)
        assert c == stability.is_zero_stabilizable(bh.difference_behavior(B))
        assert c == sim.empirical_contraction(B, pairs=5, T=300, seed=i).contractive


def _plant_xu(A, b):
    n = A.shape[0]
    coef = np.zeros((n, n + 1, 2))
    coef[:, :n, 0] = -A
    coef[:, :n, 1] = np.eye(n)
    coef[:, n, 0] = -b
    return OffsetKernelRep(PolyMatrix(coef), np.ones(n), n, 1)


def _random_matrix_with_radius(rng, n, stable):
    A = rng.normal(size=(n, n))
    rho = np.max(np.abs(np.linalg.eigvals(A)))
    return A * (rng.uniform(0.2, 0.9) if stable else rng.uniform(1.05, 1.4)) / rho


def test_detectability_simulation_oracle():
    rng = np.random.default_rng(33)
    for i in range(20):
        n = int(rng.integers(1, 4))
        A = _random_matrix_with_radius(rng, n, i % 2 == 0)
        B = _plant_xu(A, rng.normal(size=n))
        u = rng.uniform(-1, 1, (310, 1))
        runs = [sim.simulate_forced(B, u, rng.uniform(-1, 1, n), 300).trajectories[0].samples for _ in range(2)]
        gap = np.max(np.abs(runs[0][-1, :n] - runs[1][-1, :n]))
        assert stability.is_detectable(B) == (gap < 1e-6)


def _plant_xuy(A, b, C):
    n = A.shape[0]
    coef = np.zeros((n + 1, n + 2, 2))
    coef[:n, :n, 0] = -A
    coef[:n, :n, 1] = np.eye(n)
    coef[:n, n, 0] = -b
    coef[n, :n, 0] = -C
    coef[n, n + 1, 0] = 1.0
    return OffsetKernelRep(PolyMatrix(coef), np.zeros(n + 1), n, 2)


def test_detectability_pbh_oracle():
    # detectable iff [A - lambda I; C] has full column rank at every |lambda| >= 1
    rng = np.random.default_rng(34)
    seen = set()
    for _ in range(40):
        n = 2
        T = rng.normal(size=(n, n))
        lams = np.array([rng.uniform(0.1, 0.9), rng.choice([-1, 1]) * rng.uniform(0.2, 1.5)])
        A = T @ np.diag(lams) @ np.linalg.inv(T)
        C = rng.normal(size=n)
        if rng.random() < 0.5:
            # hide the second mode from the output
            C = np.array([1.0, 0.0]) @ np.linalg.inv(T)
        oracle = all(
            np.linalg.matrix_rank(np.vstack([A - lam * np.eye(n), C]), tol=1e-9) == n for lam in lams if abs(lam) >= 1
        )
        assert stability.is_detectable(_plant_xuy(A, rng.normal(size=n), C)) == oracle
        seen.add(oracle)
    assert seen == {True, False}
