import io

import numpy as np
import pytest
from conftest import random_autonomous, rep

from affine_behaviors import behavior as bh
from affine_behaviors import qdf, sim
from affine_behaviors import realization as rz
from affine_behaviors.behavior import TrajectorySegment
from affine_behaviors.errors import DimensionError, InputError, NotAutonomousError

WBAR = 20 / 37


def example_oracle(steps):
    # 10 w(t+2) + 18 w(t+1) + 9 w(t) = 20 from w(0) = w(1) = 0
    w = [0.0, 0.0]
    for _ in range(steps):
        w.append((20 - 18 * w[-1] - 9 * w[-2]) / 10)
    return np.array(w)


def test_simulate_example_matches_recursion(example):
    run = sim.simulate(example, [0.0, 0.0], 100)
    w = run.trajectories[0].samples[:, 0]
    assert len(w) == 102
    np.testing.assert_allclose(w, example_oracle(100), atol=1e-12)
    assert run.residuals.max() < 1e-12


def test_simulate_example_convergence_horizon(example):
    # the measured error from rest is about 1.4e-2 after 100 steps and 2.9e-7 after 300
    assert abs(example_oracle(100)[-1] - WBAR) > 1e-3
    run = sim.simulate(example, [0.0, 0.0], 100)
    assert not run.converged
    run = sim.simulate(example, [0.0, 0.0], 300)
    assert run.converged
    assert abs(run.limit[0] - WBAR) < 1e-6


def test_simulate_deadbeat():
    run = sim.simulate(rep([[[0, 1]]]), [5.0], 3)
    np.testing.assert_array_equal(run.trajectories[0].samples[:, 0], [5.0, 0.0, 0.0, 0.0])


def test_simulate_integrator_constant():
    run = sim.simulate(rep([[[-1, 1]]]), [3.0], 20)
    np.testing.assert_array_equal(run.trajectories[0].samples[:, 0], 3.0)
    assert run.converged and run.limit[0] == 3.0
    assert not sim.empirical_contraction(rep([[[-1, 1]]]), pairs=5, T=50).contractive


def test_simulate_rejects_bad_init(example):
    with pytest.raises(DimensionError):
        sim.simulate(example, [0.0], 10)
    with pytest.raises(InputError):
        sim.simulate(rep([[[0, 1], [0]], [[0], [1]]], q=2), [[1.0, 1.0]], 3)


def test_simulate_non_autonomous(drift):
    with pytest.raises(NotAutonomousError):
        sim.simulate(drift.with_split(2, 0))


def test_simulate_segment_start_time(example):
    run = sim.simulate(example, TrajectorySegment(7, [[0.0], [0.0]]), 5)
    assert run.trajectories[0].start_time == 7


def test_simulate_seed_reproducible(example, monkeypatch):
    a = sim.simulate(example, None, 10, seed=3).trajectories[0].samples
    b = sim.simulate(example, None, 10, seed=3).trajectories[0].samples
    np.testing.assert_array_equal(a, b)
    monkeypatch.setenv("AB_SEED", "3")
    np.testing.assert_array_equal(sim.simulate(example, None, 10).trajectories[0].samples, a)
    monkeypatch.setenv("AB_SEED", "x")
    with pytest.raises(InputError):
        sim.default_seed()


def test_simulate_agrees_with_state_recursion():
    rng = np.random.default_rng(51)
    for i in range(10):
        B, _ = random_autonomous(rng, i % 2 == 0)
        r = rz.realize_autonomous(B)
        x0 = rng.uniform(-1, 1, r.n)
        ws = r.simulate(x0, 30)
        L = bh.lag(B)
        wk = sim.simulate(B, ws[:L], 30 - L).trajectories[0].samples
        np.testing.assert_allclose(wk, ws, atol=1e-8 * max(1.0, np.abs(ws).max()))


def test_simulate_forced_integrator(integrator):
    u = np.zeros((20, 1))
    y = np.ones((20, 1))
    # y pins w, so no initial window is needed
    run = sim.simulate_forced(integrator, np.hstack([u, y]))
    np.testing.assert_allclose(run.trajectories[0].samples[:, 0], 1.0)


def test_simulate_forced_matches_closed_loop(integrator):
    closed = bh.interconnect_project(integrator, rep([[[1], [0.5]]], c=[1], q=2))
    w = sim.simulate(closed, [0.3], 30).trajectories[0].samples[:, 0]
    c = np.column_stack([1 - 0.5 * w, w])
    run = sim.simulate_forced(integrator, c)
    np.testing.assert_allclose(run.trajectories[0].samples[:, 0], w[: len(run.trajectories[0])], atol=1e-12)


def test_simulate_forced_inconsistent(integrator):
    c = np.column_stack([np.zeros(10), np.arange(10.0)])
    with pytest.raises(InputError):
        sim.simulate_forced(integrator, c)


def test_simulate_forced_length(drift):
    u = np.zeros((5, 1))
    with pytest.raises(DimensionError):
        sim.simulate_forced(drift, u, [0.0], T=50)


def test_empirical_contraction_examples(example):
    e = sim.empirical_contraction(example, pairs=20, T=300, tol=1e-6)
    assert e.contractive
    np.testing.assert_allclose(e.limits, WBAR, atol=1e-6)
    assert not sim.empirical_contraction(rep([[[-1, 1]]]), pairs=5).contractive
    e = sim.empirical_contraction(rep([[[-1, 2]]], c=[1]), pairs=5)
    assert e.contractive
    np.testing.assert_allclose(e.limits, 1.0, atol=1e-6)


def test_certificate_decreases_along_pairs(example):
    cert = qdf.synthesize_contraction_form(example)
    for s in range(5):
        a = sim.simulate(example, None, 60, seed=2 * s).trajectories[0].samples
        b = sim.simulate(example, None, 60, seed=2 * s + 1).trajectories[0].samples
        d = TrajectorySegment(0, a - b)
        vals = [qdf.evaluate(cert.phi, d, t) for t in range(len(d) - 1)]
        assert np.all(np.diff(vals) <= 1e-9)


# -- CSV --------------------------------------------------------------------


def test_write_csv_wide(example):
    run = sim.simulate(example, [0.0, 0.0], 2)
    buf = io.StringIO()
    sim.write_csv(buf, run)
    lines = buf.getvalue().splitlines()
    assert lines[0] == "t,var_0"
    assert lines[1] == "0,0"
    assert lines[3] == "2,2"
    assert len(lines) == 5


def test_write_csv_long_and_files(example, tmp_path):
    runs = [sim.simulate(example, [0.0, 0.0], 2), sim.simulate(example, [1.0, 1.0], 2)]
    buf = io.StringIO()
    sim.write_csv(buf, runs, long_format=True)
    lines = buf.getvalue().splitlines()
    assert lines[0] == "traj_id,t,var_0"
    assert lines[6].startswith("1,1,")
    paths = sim.write_csv(tmp_path / "run.csv", runs)
    assert [p.rsplit("/", 1)[-1] for p in paths] == ["run_0.csv", "run_1.csv"]
    data = np.loadtxt(paths[1], delimiter=",", skiprows=1)
    np.testing.assert_allclose(data[:, 1], runs[1].trajectories[0].samples[:, 0])


def test_write_csv_round_trips_floats(tmp_path):
    seg = TrajectorySegment(0, [[0.1], [1 / 3], [2e-17]])
    p = sim.write_csv(tmp_path / "x.csv", seg)[0]
    data = np.loadtxt(p, delimiter=",", skiprows=1)
    np.testing.assert_array_equal(data[:, 1], [0.1, 1 / 3, 2e-17])
