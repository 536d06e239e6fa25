import numpy as np
import pytest
from conftest import random_state_space_plant, rep

from affine_behaviors import behavior as bh
from affine_behaviors import control, qdf, sim, stability
from affine_behaviors.behavior import OffsetKernelRep
from affine_behaviors.errors import EmptyBehaviorError, NotImplementableError, SynthesisError
from affine_behaviors.polymat import PolyMatrix

HALF = rep([[[-0.5, 1]]], c=[1])


def free(k):
    return OffsetKernelRep(PolyMatrix.zeros(0, k), np.zeros(0), k)


def random_controller(rng, k=2):
    return OffsetKernelRep(PolyMatrix(rng.uniform(-1, 1, (1, k, 2))), rng.uniform(-1, 1, 1), k)


def full_state_plant(n, m, rng):
    # x(t+1) = A x + B u over (| x, u): every variable is a control variable
    A = rng.uniform(-1, 1, (n, n))
    Bm = rng.uniform(-1, 1, (n, m))
    coef = np.zeros((n, n + m, 2))
    coef[:, :n, 0] = -A
    coef[:, :n, 1] = np.eye(n)
    coef[:, n:, 0] = -Bm
    return OffsetKernelRep(PolyMatrix(coef), np.zeros(n), 0, n + m)


# -- implementability -------------------------------------------------------


def test_is_implementable_examples(integrator, drift):
    assert control.is_implementable(integrator, HALF)
    v = control.is_implementable(drift, rep([[[-0.5, 1]]]))
    assert not v and v.failed == control.DIFFERENCE_FAILED
    assert control.is_implementable(integrator, bh.project_w(integrator))


def test_is_implementable_projection_failure():
    # the control column is dead, so the projection is w(t+1) = w(t)/2 + 1
    B = rep([[[-0.5, 1], [0]]], c=[1], q=1, k=1)
    v = control.is_implementable(B, rep([[[-0.25, 1]]]))
    assert not v and v.failed == control.PROJECTION_FAILED


def test_synthesize_controller_integrator(integrator):
    ctrl = control.synthesize_controller(integrator, HALF)
    assert bh.equals(ctrl.rep, rep([[[1], [0.5]]], c=[1], q=2))
    assert bh.equals(bh.interconnect_project(integrator, ctrl.rep), HALF)
    assert control.is_regular(integrator, ctrl)


def test_synthesize_controller_free(integrator):
    ctrl = control.synthesize_controller(integrator, bh.project_w(integrator))
    assert ctrl.R.rows == 0


def test_synthesize_controller_constant_control():
    B = rep([[[-0.5, 1], [-1]]], q=1, k=1)
    c0 = 3.0
    Rref = bh.interconnect_project(B, rep([[[1]]], c=[c0]))
    ctrl = control.synthesize_controller(B, Rref)
    assert bh.equals(ctrl.rep, rep([[[1]]], c=[c0]))


def test_synthesize_controller_not_implementable(drift):
    with pytest.raises(NotImplementableError) as exc:
        control.synthesize_controller(drift, rep([[[-0.5, 1]]]))
    assert exc.value.failed == control.DIFFERENCE_FAILED


def test_round_trip_random():
    rng = np.random.default_rng(41)
    done = 0
    while done < 15:
        B = random_state_space_plant(rng)
        C = random_controller(rng)
        if bh.is_empty(bh.interconnect_join(B, C)):
            continue
        Rref = bh.interconnect_project(B, C)
        assert control.is_implementable(B, Rref)
        ctrl = control.synthesize_controller(B, Rref)
        closed = bh.interconnect_project(B, ctrl.rep)
        assert bh.includes(closed, Rref) and bh.includes(Rref, closed)
        done += 1


# -- regularity -------------------------------------------------------------


def test_is_regular_full_interconnection():
    rng = np.random.default_rng(42)
    n, m = 2, 1
    B = full_state_plant(n, m, rng)
    zero = OffsetKernelRep(PolyMatrix.constant(np.eye(n + m)), np.zeros(n + m), n + m)
    assert bh.io_cardinality(B).m == m
    assert bh.io_cardinality(zero).p == n + m
    assert not control.is_regular(B, zero)


def test_is_regular_examples(integrator):
    assert control.is_regular(integrator, rep([[[1], [0.5]]], c=[1], q=2))
    assert control.is_regular(integrator, free(2))


def test_is_regular_empty_join(integrator):
    C = rep([[[1], [0]], [[1], [0]]], c=[0, 1], q=2)
    with pytest.raises(EmptyBehaviorError):
        control.is_regular(integrator, C)


# -- deadbeat gains ---------------------------------------------------------


def test_deadbeat_gain_nilpotent():
    rng = np.random.default_rng(43)
    for _ in range(20):
        n, m = int(rng.integers(1, 5)), int(rng.integers(1, 3))
        A = rng.normal(size=(n, n))
        Bm = rng.normal(size=(n, m))
        K = control.deadbeat_gain(A, Bm)
        Acl = A - Bm @ K
        assert np.abs(np.linalg.matrix_power(Acl, n)).max() < 1e-8 * max(1.0, np.abs(A).max()) ** n


# -- stabilizing synthesis --------------------------------------------------


def test_stabilize_integrator_linear(integrator):
    res = control.synthesize_stabilizing_controller(integrator)
    assert res.controller.linear and not np.any(res.controller.c)
    assert res.regular
    assert stability.is_contractive(res.closed_loop).contractive
    np.testing.assert_allclose(res.achieved_wbar, [0.0], atol=1e-12)
    assert qdf.verify_contraction_form(res.closed_loop, res.certificate.phi).passed


def test_stabilize_integrator_target(integrator):
    res = control.synthesize_stabilizing_controller(integrator, [2.0])
    assert not res.controller.linear
    assert res.achieved_wbar[0] == pytest.approx(2.0, abs=1e-8)
    run = sim.simulate(res.closed_loop, None, 100, seed=1)
    assert abs(run.trajectories[0].samples[-1, 0] - 2.0) < 1e-6


def test_stabilize_drift_not_detectable(drift):
    with pytest.raises(SynthesisError, match="not detectable") as exc:
        control.synthesize_stabilizing_controller(drift)
    assert exc.value.condition == "detectable"


def _equilibrium(B, rng):
    n = B.q
    A = -B.R.coef[:n, :n, 0]
    b = -B.R.coef[:n, n, 0]
    ubar = rng.uniform(-1, 1)
    return np.linalg.solve(np.eye(n) - A, b * ubar + B.c[:n])


def test_stabilize_random_plants():
    rng = np.random.default_rng(44)
    for _ in range(10):
        B = random_state_space_plant(rng)
        res = control.synthesize_stabilizing_controller(B)
        C = res.controller
        assert C.linear
        # regular arithmetic: m(join) + p(C) = m(B)
        J = bh.interconnect_join(B, C.rep)
        assert bh.io_cardinality(J).m + bh.io_cardinality(C.rep).p == bh.io_cardinality(B).m
        assert stability.is_contractive(res.closed_loop).contractive
        # dif of the closed loop is the loop of dif(B) with the linear part of C
        lin = bh.interconnect_project(bh.difference_behavior(B), C.rep)
        assert bh.equals(lin, bh.difference_behavior(res.closed_loop))
        target = _equilibrium(B, rng)
        res2 = control.synthesize_stabilizing_controller(B, target)
        np.testing.assert_allclose(res2.achieved_wbar, target, atol=1e-8)
        L = bh.lag(res2.closed_loop)
        for s in range(3):
            w = sim.simulate(res2.closed_loop, None, 500, seed=s).trajectories[0].samples
            assert np.abs(w[L:][-1] - target).max() < 1e-6
