import warnings

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from sklearn.base import clone

from ltpid.harmonic import sliding_phasors
from ltpid.identify import (HarmonicLTPIdentifier, IdentifiedModel, NotInformativeError, RegressionData, assemble,
                            error_bound_constant, informativity, pinv_solve, pivoted_order, solve, sweep_p,
                            theta_blocks)
from ltpid.periodic import PeriodicMatrix, random_spec
from ltpid.simulate import SamplingGrid, add_state_noise, piecewise_periodic_input, simulate, simulate_many
from ltpid.validation import stack_phasors

from conftest import constant


def strip_data(n, m, p, L, seed, period=1.0):
    """Regression data that satisfy X1 = Theta [X0; U0] exactly, built in phasor space."""
    rng = np.random.default_rng(seed)
    A = random_spec(n, n, p, int(rng.integers(2 ** 32)), period=period)
    B = random_spec(n, m, p, int(rng.integers(2 ** 32)), period=period) if m else None
    theta = stack_phasors(A, B, p)

    def block(c):
        half = rng.standard_normal((p + 1, c, L)) + 1j * rng.standard_normal((p + 1, c, L))
        half[0] = half[0].real
        full = np.concatenate([half[:0:-1].conj(), half])  # k = -p..p
        return full.reshape(-1, L)

    X0 = block(n)
    U0 = block(m) if m else np.zeros((0, L), dtype=complex)
    X1 = theta @ np.vstack([X0, U0])
    assert np.abs(X1.imag).max() < 1e-10 * np.abs(X1).max()
    return RegressionData(X1.real, X0, U0, p, period, [(0, j) for j in range(L)]), A, B, theta


def small_trajectories(count=12, n=2, m=1, degree=2, N=32, seed=0, noise=0.0):
    A = random_spec(n, n, degree, seed, scale=2.0)
    B = random_spec(n, m, degree, seed + 1, scale=2.0) if m else None
    grid = SamplingGrid(1.0, N, 2 * N + 1, substeps=4)
    rng = np.random.default_rng(seed)
    inputs = [piecewise_periodic_input(m, degree, 1.0, 4, 2.0, int(s), segment_periods=0.5) if m else None
              for s in rng.integers(0, 2 ** 32, count)]
    x0s = [rng.uniform(-1, 1, n) for _ in range(count)]
    trajs = simulate_many(A, B, inputs, x0s, grid)
    if noise:
        trajs = [add_state_noise(tr, noise, seed + j) for j, tr in enumerate(trajs)]
    return trajs, A, B


@pytest.mark.parametrize("n,m,p", [(3, 2, 2), (2, 0, 3), (1, 1, 0)])
def test_exact_strip_fixture(n, m, p):
    data, A, B, theta = strip_data(n, m, p, (n + m) * (2 * p + 1) + 5, seed=n * 10 + m)
    model = solve(data)
    assert np.linalg.norm(stack_phasors(model.A, model.B, p) - theta, 2) <= 1e-10 * np.linalg.norm(theta, 2)
    assert model.hermitian_defect <= 1e-10 * np.linalg.norm(theta, 2)
    assert (model.B is None) == (m == 0)


def test_theta_block_order():
    data, A, B, theta = strip_data(2, 1, 2, 40, seed=1)
    rawA, rawB = theta_blocks(theta, 2, 1, 2)
    for k in range(-2, 3):
        np.testing.assert_allclose(rawA[k], A[k])
        np.testing.assert_allclose(rawB[k], B[k])


def test_square_solve_equals_inverse():
    data, *_ = strip_data(2, 1, 1, 9, seed=4)
    theta, s, r = pinv_solve(data.X1, data.regressor)
    direct = data.X1 @ np.linalg.inv(data.regressor)
    assert np.abs(theta - direct).max() <= 1e-10 * np.abs(direct).max()


def test_assemble_single_frame_shapes():
    trajs, *_ = small_trajectories(count=1, N=16)
    fr = sliding_phasors(trajs[0], 2)
    data = assemble([fr])
    one = data.subset([0])
    assert one.X1.shape == (2, 1)
    assert one.X0.shape == (2 * 5, 1)
    assert one.U0.shape == (1 * 5, 1)


def test_assemble_autonomous():
    trajs, *_ = small_trajectories(count=2, m=0, N=16)
    data = assemble([sliding_phasors(tr, 2) for tr in trajs])
    assert data.U0.shape[0] == 0
    assert data.m == 0


def test_assemble_bookkeeping():
    trajs, *_ = small_trajectories(count=2, N=16)
    frames = [sliding_phasors(tr, 2) for tr in trajs]
    data = assemble(frames)
    assert data.n_columns == len(frames[0]) + len(frames[1])
    for j, (tid, idx) in enumerate(data.source):
        fr = frames[tid]
        row = int(np.flatnonzero(fr.index == idx)[0])
        np.testing.assert_allclose(data.X1[:, j], fr.xdot0[row] / fr.window_norm[row])
        np.testing.assert_allclose(data.X0[:, j], fr.x_phasors[row].ravel() / fr.window_norm[row])
    strided = assemble(frames, stride=3)
    assert strided.n_columns == 2 * len(range(0, len(frames[0]), 3))


def test_assemble_rejects_mixed_orders():
    trajs, *_ = small_trajectories(count=2, N=16)
    with pytest.raises(ValueError):
        assemble([sliding_phasors(trajs[0], 2), sliding_phasors(trajs[1], 3)])
    with pytest.raises(ValueError):
        assemble([sliding_phasors(trajs[0], 2)], stride=0)


def test_informativity_thresholds():
    data, *_ = strip_data(2, 1, 2, 40, seed=2)
    req = data.required_rank
    assert not informativity(data.subset(np.arange(req - 1))).informative
    assert informativity(data.subset(np.arange(req))).informative
    twice = RegressionData(np.hstack([data.X1] * 2), np.hstack([data.X0] * 2), np.hstack([data.U0] * 2),
                           data.p, data.period)
    assert informativity(twice).rank == informativity(data).rank


def test_not_informative_error_message():
    data, *_ = strip_data(2, 1, 2, 40, seed=2)
    with pytest.raises(NotInformativeError, match=r"deficit 1.*L = 15") as err:
        solve(data.subset(np.arange(14)))
    assert err.value.required == 15


def test_scalar_constant_system():
    a = -0.8
    grid = SamplingGrid(1.0, 512, 2 * 512 + 1, substeps=2)
    tr = simulate(constant(a), None, None, [1.0], grid)
    model = solve(assemble(sliding_phasors(tr, 0)))
    assert model.A[0][0, 0] == pytest.approx(a, abs=1e-6)


@pytest.mark.parametrize("rule,tol", [("simpson", 1e-4), ("boole", 1e-4), ("trapezoid", 1e-3)])
def test_first_harmonic_scalar_system(rule, tol):
    A = PeriodicMatrix(1.0, {0: np.array([[-1.0]]), 1: np.array([[0.3]]), -1: np.array([[0.3]])})
    B = constant(1.0)
    grid = SamplingGrid(1.0, 64, 3 * 64 + 1, substeps=8)
    # one smooth periodic input per trajectory; three of them span the input harmonics
    trajs = [simulate(A, B, piecewise_periodic_input(1, 1, 1.0, 1, 3.0, seed=s), [x0], grid)
             for s, x0 in ((1, 1.0), (2, -0.5), (3, 0.2), (4, 0.0))]
    model = HarmonicLTPIdentifier(p=1, quadrature=rule).fit(trajs).model_
    assert model.A[0][0, 0] == pytest.approx(-1.0, rel=tol)
    assert abs(model.A[1][0, 0] - 0.3) <= tol * 0.3


def test_hermitian_defect_small_on_noiseless():
    trajs, *_ = small_trajectories()
    model = HarmonicLTPIdentifier(p=2).fit(trajs).model_
    assert model.hermitian_defect <= 1e-8 * np.linalg.norm(model.theta, 2)


def test_residual_optimality():
    trajs, *_ = small_trajectories(noise=0.05)
    data = assemble([sliding_phasors(tr, 2) for tr in trajs])
    model = solve(data)
    Z = data.regressor
    base = np.sum(np.abs(data.X1 - model.theta @ Z) ** 2)
    delta = 1e-3 * np.linalg.norm(model.theta, 2)
    rng = np.random.default_rng(0)
    for _ in range(10):
        i, j = rng.integers(model.theta.shape[0]), rng.integers(model.theta.shape[1])
        for step in (delta, -delta, 1j * delta):
            th = model.theta.copy()
            th[i, j] += step
            assert np.sum(np.abs(data.X1 - th @ Z) ** 2) >= base


def test_error_bound_constant_identity_and_scaling():
    r = 9
    eye = RegressionData(np.zeros((2, r)), np.eye(r)[:6].astype(complex), np.eye(r)[6:].astype(complex), 1, 1.0)
    assert error_bound_constant(eye, np.arange(r)) == pytest.approx(r)
    half = RegressionData(eye.X1, 0.5 * eye.X0, 0.5 * eye.U0, 1, 1.0)
    assert error_bound_constant(half, np.arange(r)) == pytest.approx(2 * r)


def test_error_bound_constant_singular():
    data, *_ = strip_data(2, 1, 1, 30, seed=3)
    cols = np.array([0] * 9)
    with pytest.raises(ValueError, match="reselect|choose another"):
        error_bound_constant(data, cols)
    with pytest.raises(ValueError):
        error_bound_constant(data, np.arange(5))
    assert error_bound_constant(data) > 0


def test_pivoted_order_rounds():
    data, *_ = strip_data(2, 1, 1, 60, seed=5)
    picked = pivoted_order(data.regressor, 20)
    assert len(picked) == 20 == len(set(picked.tolist()))
    assert informativity(data.subset(pivoted_order(data.regressor, 9))).informative
    with pytest.raises(ValueError):
        pivoted_order(data.regressor, 61)


def test_ill_conditioned_warning():
    X0 = np.diag([1.0, 1.0, 1e-13]).astype(complex)
    bad = RegressionData(np.array([[1.0, 2.0, 3.0]]), X0, np.zeros((0, 3), dtype=complex), 1, 1.0)
    with pytest.warns(RuntimeWarning, match="condition number"):
        model = solve(bad)
    assert model.ill_conditioned
    assert model.diagnostics()["ill_conditioned"]


def test_model_json_round_trip(tmp_path):
    data, *_ = strip_data(2, 1, 1, 20, seed=7)
    model = solve(data).with_error_bound(12.5)
    path = tmp_path / "model.json"
    model.to_json(path)
    back = IdentifiedModel.from_json(path)
    assert back.error_bound_M == 12.5
    assert back.numerical_rank == model.numerical_rank
    for k in model.A.phasors:
        np.testing.assert_allclose(back.A[k], model.A[k])
        np.testing.assert_allclose(back.B[k], model.B[k])


def test_estimator_api():
    trajs, A, B = small_trajectories()
    est = HarmonicLTPIdentifier(p=2)
    assert clone(est).get_params()["p"] == 2
    est.fit(trajs)
    assert est.informativity_.informative
    assert 0.99 < est.score(trajs) <= 1.0
    pred = est.predict(trajs[0].states[:, 0], trajs[0].grid)
    assert pred.states.shape == trajs[0].states.shape


def test_autonomous_identification_from_many_trajectories():
    trajs, A, _ = small_trajectories(count=8, m=0, N=64)
    model = HarmonicLTPIdentifier(p=2).fit(trajs).model_
    assert model.B is None
    err = np.linalg.norm(stack_phasors(model.A, None, 2) - stack_phasors(A, None, 2), 2)
    assert err <= 1e-2 * np.linalg.norm(stack_phasors(A, None, 2), 2)


def test_sweep_stops_when_decayed():
    trajs, *_ = small_trajectories(count=6, m=0, degree=1, N=128)
    steps = sweep_p(trajs, [1, 2, 3, 4], threshold=1e-2)
    assert steps[0].p == 1
    assert steps[-1].decayed
    assert all(not s.decayed for s in steps[:-1])


@given(st.integers(0, 2 ** 32 - 1), st.integers(1, 3), st.integers(0, 2), st.integers(0, 2))
def test_exact_fixture_property(seed, n, m, p):
    data, A, B, theta = strip_data(n, m, p, (n + m) * (2 * p + 1) + 3, seed)
    model = solve(data)
    est = stack_phasors(model.A, model.B, p)
    assert np.linalg.norm(est - theta, 2) <= 1e-8 * np.linalg.norm(theta, 2)
