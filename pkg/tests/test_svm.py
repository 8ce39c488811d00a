import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

import oracles
from quadocr.svm import (
    NonConvergence, ScaleParams, SingleClass, SVMMulti, decision_function, dual_objective,
    full_alphas, kkt_violation, load_multi, ovo_predict, ovo_train, rbf, rbf_matrix,
    save_multi, scale_apply, scale_fit, smo_train,
)

TWO_X = np.array([[1.0, 0.0], [-1.0, 0.0]])
TWO_Y = np.array([1.0, -1.0])
TWO_ALPHA = 1.0 / (1.0 - math.exp(-2.0))

# (points, C) for the grid comparison; C shrinks with n so the lattice stays
# small enough to enumerate
GRID_SIZES = ((2, 1.0), (3, 1.0), (4, 0.2), (5, 0.05))


def grid_instances(seeds=(0, 1, 2)):
    for n, c in GRID_SIZES:
        for seed in seeds:
            rng = np.random.default_rng(100 * n + seed)
            X = rng.uniform(-1, 1, (n, 2))
            y = np.where(np.arange(n) % 2 == 0, 1.0, -1.0)
            rng.shuffle(y)
            gamma = float(rng.uniform(0.5, 2.0))
            yield X, y, c, gamma


def grid_gaps():
    gaps = []
    for X, y, c, gamma in grid_instances():
        m = smo_train(X, y, c, gamma)
        alpha = full_alphas(m, len(y))
        got = dual_objective(alpha, y, oracles.rbf_gram(X, gamma))
        gaps.append(abs(got - oracles.grid_dual_max(X, y, c, gamma)))
    return gaps


def blobs(k=3, n=30, seed=0, spread=0.3):
    rng = np.random.default_rng(seed)
    centres = rng.uniform(-5, 5, (k, 4))
    X = np.vstack([rng.normal(ctr, spread, (n, 4)) for ctr in centres])
    return X, np.repeat(np.arange(k), n)


def test_scale_examples():
    p = ScaleParams(np.array([2.0, 5.0]), np.array([6.0, 5.0]))
    assert scale_apply(p, np.array([4.0, 123.0])).tolist() == [0.0, 0.0]
    assert scale_apply(p, np.array([2.0, 5.0])).tolist() == [-1.0, 0.0]
    assert scale_apply(p, np.array([6.0, -1.0])).tolist() == [1.0, 0.0]


@settings(max_examples=40, deadline=None)
@given(arrays(np.float64, st.tuples(st.integers(1, 8), st.integers(1, 5)),
              elements=st.floats(-1e3, 1e3)))
def test_scale_idempotent_on_training_set(X):
    once = scale_apply(scale_fit(X), X)
    twice = scale_apply(scale_fit(once), once)
    assert np.abs(twice - once).max() <= 1e-12
    assert ((once >= -1) & (once <= 1)).all()


def test_rbf_examples():
    assert rbf(np.zeros(2), np.ones(2), 0.5) == pytest.approx(0.367879441, abs=1e-9)
    rng = np.random.default_rng(0)
    for _ in range(20):
        x, z = rng.normal(size=(2, 5))
        assert rbf(x, x, 0.3) == 1.0
        assert rbf(x, z, 0.3) == rbf(z, x, 0.3)
    with pytest.raises(ValueError):
        rbf(np.zeros(2), np.ones(2), 0.0)


def test_rbf_matrix_agrees_and_is_psd():
    rng = np.random.default_rng(1)
    for seed in range(5):
        X = rng.normal(size=(25, 6))
        K = rbf_matrix(X, X, 0.2)
        np.testing.assert_allclose(K, oracles.rbf_gram(X, 0.2), rtol=0, atol=1e-12)
        assert np.linalg.eigvalsh((K + K.T) / 2).min() >= -1e-8


def test_two_point_analytic():
    m = smo_train(TWO_X, TWO_Y, c=100.0, gamma=0.5)
    alpha = full_alphas(m, 2)
    assert abs(alpha[0] - TWO_ALPHA) <= 1e-6 and abs(alpha[1] - TWO_ALPHA) <= 1e-6
    assert abs(m.bias) <= 1e-6
    assert decision_function(m, TWO_X[0]) == pytest.approx(1.0, abs=1e-6)
    assert abs(decision_function(m, np.zeros(2))) <= 1e-9


def test_label_flip_flips_sign():
    X, y = blobs(2, 10, seed=3)
    yy = np.where(y == 0, 1.0, -1.0)
    a = smo_train(X, yy, 4.0, 0.5)
    b = smo_train(X, -yy, 4.0, 0.5)
    probe = np.random.default_rng(2).normal(size=(10, 4)) * 4
    np.testing.assert_allclose(decision_function(a, probe), -decision_function(b, probe),
                               atol=1e-6)


def test_dual_matches_grid_search():
    assert max(grid_gaps()) <= 1e-3


def test_feasibility_and_kkt():
    rng = np.random.default_rng(7)
    for seed in range(6):
        X = rng.normal(size=(40, 3))
        y = np.where(X[:, 0] * X[:, 1] + 0.3 * rng.normal(size=40) > 0, 1.0, -1.0)
        m = smo_train(X, y, c=2.0, gamma=0.7)
        alpha = full_alphas(m, 40)
        assert m.converged
        assert ((alpha >= 0) & (alpha <= 2.0)).all()
        assert abs(alpha @ y) <= 1e-12
        assert kkt_violation(m, X, y) <= 1e-3


def test_xor():
    X = np.array([[0, 0], [0, 1], [1, 0], [1, 1]], dtype=float)
    y = np.array([-1.0, 1.0, 1.0, -1.0])
    m = smo_train(X, y, c=100.0, gamma=1.0)
    assert (np.sign(decision_function(m, X)) == y).all()
    assert kkt_violation(m, X, y) <= 1e-3


def test_non_convergence_warns():
    X, y = blobs(2, 30, seed=4, spread=4.0)
    yy = np.where(y == 0, 1.0, -1.0)
    with pytest.warns(NonConvergence):
        m = smo_train(X, yy, c=50.0, gamma=2.0, max_passes=0)
    assert not m.converged


def test_single_class_rejected():
    with pytest.raises(SingleClass):
        ovo_train(np.zeros((3, 2)), [1, 1, 1])


def test_ovo_two_classes_is_one_machine():
    X, y = blobs(2, 15, seed=5)
    m = ovo_train(X, y, c=8.0, gamma=0.25)
    assert list(m.machines) == [(0, 1)]
    f = decision_function(m.machines[(0, 1)], scale_apply(m.scale, X))
    assert np.array_equal(ovo_predict(m, X), np.where(f >= 0, 0, 1))


def test_ovo_blobs_and_kkt():
    X, y = blobs(3, 30, seed=6)
    m = ovo_train(X, y, c=8.0, gamma=0.25)
    assert len(m.machines) == 3
    assert (ovo_predict(m, X) == y).all()
    Xs = scale_apply(m.scale, X)
    for (a, b), machine in m.machines.items():
        rows = (y == a) | (y == b)
        assert kkt_violation(machine, Xs[rows], np.where(y[rows] == a, 1.0, -1.0)) <= 1e-3


def test_machine_count_for_93_classes():
    rng = np.random.default_rng(0)
    X = rng.normal(size=(93 * 2, 3))
    y = np.repeat(np.arange(93), 2)
    with warnings.catch_warnings():
        warnings.simplefilter("error", NonConvergence)
        m = ovo_train(X, y, c=1.0, gamma=0.5)
    assert len(m.machines) == 4278 == 93 * 92 // 2


def test_model_file_round_trip(tmp_path):
    X, y = blobs(3, 12, seed=8)
    y = y * 2 + 1  # non-contiguous labels survive
    m = ovo_train(X, y, c=8.0, gamma=0.25)
    save_multi(m, tmp_path / "m.svm")
    back = SVMMulti.load(tmp_path / "m.svm")
    assert back.classes.tolist() == [1, 3, 5]
    probe = np.random.default_rng(0).normal(size=(30, 4)) * 3
    assert np.array_equal(ovo_predict(back, probe), ovo_predict(m, probe))
    for key, machine in m.machines.items():
        np.testing.assert_array_equal(decision_function(back.machines[key], probe),
                                      decision_function(machine, probe))
    save_multi(back, tmp_path / "again.svm")
    assert (tmp_path / "again.svm").read_bytes() == (tmp_path / "m.svm").read_bytes()
    assert load_multi(tmp_path / "again.svm").gamma == m.gamma
