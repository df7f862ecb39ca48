import json

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from ltpid.periodic import (PeriodicMatrix, evaluate, example_b_specs, from_raw_phasors, random_spec,
                            truncation_tail_estimate)

from conftest import constant, cosine


def test_constant_spec_evaluates_to_itself():
    spec = constant([[2.0]])
    for t in (0.0, 0.3, 17.25):
        assert evaluate(spec, t) == pytest.approx(np.array([[2.0]]))


def test_first_harmonic_pair_at_zero():
    assert evaluate(cosine(1.0), 0.0)[0, 0] == pytest.approx(1.0, abs=1e-15)


def test_vector_evaluation_shape():
    spec = random_spec(3, 2, 4, seed=1)
    out = evaluate(spec, np.linspace(0, 1, 7))
    assert out.shape == (7, 3, 2)
    assert spec(0.25).shape == (3, 2)


def test_a22_against_trigonometric_form():
    A, _ = example_b_specs(200)
    w = 2 * np.pi
    t = 0.25
    direct = 1 - 2 * np.sin(w * t) - 2 * np.sin(3 * w * t) + 2 * np.cos(3 * w * t) + 2 * np.cos(5 * w * t)
    assert abs(evaluate(A, t)[1, 1] - direct) <= 1e-12


def _partial_sums(t, K):
    # direct partial sums of the Fourier series of every entry of the second example
    w = 2 * np.pi
    q = np.arange(1, K + 1, 2)
    a11 = 1 + np.sum(4 / (np.pi * q) * np.sin(q * w * t))
    a12 = 2 + np.sum(16 / (np.pi ** 2 * q ** 2) * np.cos(q * w * t))
    k = np.arange(1, K + 1)
    c = (2 / np.pi) * (-1.0) ** k / k
    a21 = -1 + np.sum(c * np.sin(k * w * t + np.pi / 4))
    a22 = 1 - 2 * np.sin(w * t) - 2 * np.sin(3 * w * t) + 2 * np.cos(3 * w * t) + 2 * np.cos(5 * w * t)
    b11 = 1 + 2 * np.cos(2 * w * t) + 4 * np.sin(3 * w * t)
    return np.array([[a11, a12], [a21, a22]]), np.array([[b11], [0.0]])


def test_example_b_matches_partial_sums():
    K = 200
    A, B = example_b_specs(K)
    ts = np.random.default_rng(3).uniform(0, 1, 64)
    got_A = evaluate(A, ts)
    got_B = evaluate(B, ts)
    for i, t in enumerate(ts):
        ref_A, ref_B = _partial_sums(t, K)
        assert np.abs(got_A[i] - ref_A).max() <= 1e-10
        assert np.abs(got_B[i] - ref_B).max() <= 1e-10


def test_example_b_constant_terms():
    A, B = example_b_specs(200)
    np.testing.assert_allclose(A[0], [[1, 2], [-1, 1]], atol=1e-15)
    np.testing.assert_allclose(B[0], [[1], [0]], atol=1e-15)
    assert np.all(B.phasors[3][1] == 0)


def test_example_b_rejects_short_truncation():
    with pytest.raises(ValueError):
        example_b_specs(4)


def test_raw_constant():
    spec = from_raw_phasors({0: np.array([[3 + 0j]])}, 1.0)
    assert spec[0][0, 0] == 3
    assert spec.hermitian_defect == 0


def test_raw_already_hermitian():
    spec = from_raw_phasors({1: np.array([[1j]]), -1: np.array([[-1j]])}, 1.0)
    assert spec[1][0, 0] == 1j
    assert spec.hermitian_defect == 0


def test_raw_symmetrization_by_hand():
    spec = from_raw_phasors({1: np.array([[1.0]]), -1: np.array([[0.0]])}, 1.0)
    assert spec[1][0, 0] == 0.5
    assert spec[-1][0, 0] == 0.5
    assert spec.hermitian_defect == pytest.approx(1.0)


def test_raw_mismatched_shapes():
    with pytest.raises(ValueError):
        from_raw_phasors({0: np.zeros((2, 2)), 1: np.zeros((2, 3))}, 1.0)


def test_non_hermitian_family_rejected():
    with pytest.raises(ValueError):
        PeriodicMatrix(1.0, {1: np.array([[1.0]]), -1: np.array([[2.0]])})
    with pytest.raises(ValueError):
        PeriodicMatrix(1.0, {0: np.array([[1j]])})


def test_random_spec_deterministic():
    a = random_spec(3, 2, 10, seed=5)
    b = random_spec(3, 2, 10, seed=5)
    assert a.degree == 10
    for k in a.phasors:
        assert np.array_equal(a[k], b[k])


def test_random_spec_degree_zero():
    spec = random_spec(2, 2, 0, seed=1, scale=3.0)
    assert set(spec.phasors) == {0}
    assert np.isrealobj(spec[0]) or np.all(spec[0].imag == 0)
    assert np.linalg.norm(spec[0], 2) == pytest.approx(3.0)


def test_random_spec_scale():
    spec = random_spec(3, 3, 10, seed=2, scale=3.0)
    assert spec.total_norm() == pytest.approx(3.0)


def test_random_specs_are_hermitian():
    for seed in range(100):
        spec = random_spec(2, 3, 3, seed)
        assert from_raw_phasors(spec.phasors, 1.0).hermitian_defect == 0


def test_degree_is_largest_nonzero():
    spec = PeriodicMatrix(1.0, {0: np.eye(2), 3: np.zeros((2, 2)), -3: np.zeros((2, 2)),
                                2: np.ones((2, 2)), -2: np.ones((2, 2))})
    assert spec.degree == 2


def test_tail_zero_beyond_degree():
    spec = random_spec(2, 2, 4, seed=0)
    for p in (4, 5, 9):
        assert truncation_tail_estimate(spec, p) == 0


def test_tail_example_b_monotone():
    A, _ = example_b_specs(200)
    t25 = truncation_tail_estimate(A, 25)
    t10 = truncation_tail_estimate(A, 10)
    assert 0 < t25 <= t10


def test_tail_single_pair_bound():
    M3 = np.array([[0.3 + 0.4j, 0.1], [0.0, 0.2j]])
    spec = PeriodicMatrix(1.0, {3: M3, -3: M3.conj()})
    est = truncation_tail_estimate(spec, 2)
    n3 = np.linalg.norm(M3, 2)
    assert 0 < est <= 2 * (n3 + n3) + 1e-12


def test_json_round_trip(tmp_path):
    spec = random_spec(2, 3, 5, seed=9, period=2.5)
    path = tmp_path / "spec.json"
    spec.to_json(path)
    on_disk = json.loads(path.read_text())
    assert all(entry["k"] >= 0 for entry in on_disk["phasors"])
    back = PeriodicMatrix.from_json(path)
    assert back.period == 2.5
    for k in spec.phasors:
        np.testing.assert_array_equal(back[k], spec[k])


def test_truncate_keeps_low_orders():
    spec = random_spec(1, 1, 6, seed=4)
    low = spec.truncate(2)
    assert low.degree == 2
    assert np.array_equal(low[2], spec[2])
    assert np.all(low[3] == 0)


specs = st.builds(random_spec, st.integers(1, 3), st.integers(1, 3), st.integers(0, 6),
                  st.integers(0, 2 ** 32 - 1), st.floats(0.1, 50.0), st.floats(0.2, 5.0))


@given(specs, st.floats(-100, 100))
def test_realness_and_periodicity(spec, t):
    ks = np.array(list(spec.phasors))
    stack = np.stack([spec.phasors[k] for k in ks])
    val = np.einsum("k,kij->ij", np.exp(2j * np.pi * ks * t / spec.period), stack)
    assert np.abs(val.imag).max() <= 1e-12 * spec.total_norm()
    a = evaluate(spec, t)
    b = evaluate(spec, t + spec.period)
    assert np.abs(a - b).max() <= 1e-12 * max(1.0, np.abs(a).max()) * max(1.0, abs(t))


@given(specs)
def test_symmetrization_idempotent(spec):
    once = from_raw_phasors(spec.phasors, spec.period)
    twice = from_raw_phasors(once.phasors, spec.period)
    assert set(once.phasors) == set(twice.phasors)
    for k in once.phasors:
        assert np.array_equal(once[k], twice[k])


@given(specs, st.integers(0, 8))
def test_tail_vanishes_above_degree(spec, extra):
    assert truncation_tail_estimate(spec, spec.degree + extra, points_per_period=128) == 0
