from fractions import Fraction

import numpy as np
import pytest

from poincare_lab import measures as ms
from poincare_lab import testfuncs as tf
from poincare_lab.potentials import _fd_gradient

rng = np.random.default_rng(3)


def _fd_check(f, x, tol=1e-6):
    g = f.gradient(x)
    fd = _fd_gradient(f.value, x, 1e-6)
    assert np.max(np.abs(g - fd) / np.maximum(1.0, np.abs(g))) <= tol


def test_random_polynomial_examples():
    f = tf.random_polynomial(3, 0, seed=1)
    x = rng.normal(size=(5, 3))
    assert np.ptp(f.value(x)) == 0
    np.testing.assert_array_equal(f.gradient(x), 0)
    lin = tf.polynomial_function(2, {(0, 0): 0, (1, 0): 1, (0, 1): 0})
    np.testing.assert_allclose(lin.value(x[:, :2]), x[:, 0])
    np.testing.assert_allclose(lin.gradient(x[:, :2]), np.tile([1.0, 0.0], (5, 1)))
    with pytest.raises(ValueError):
        tf.random_polynomial(2, 7, seed=0)


def test_random_polynomial_coefficients():
    f = tf.random_polynomial(2, 3, seed=5)
    assert f.polynomial.degree <= 3
    assert len(f.polynomial.terms) == 10
    assert all(-1 <= c <= 1 for c in f.polynomial.terms.values())
    g = tf.random_polynomial(2, 3, seed=5)
    assert f.polynomial == g.polynomial


@pytest.mark.parametrize("deg", [1, 2, 4, 6])
def test_polynomial_gradient_matches_fd(deg):
    f = tf.random_polynomial(3, deg, seed=deg)
    _fd_check(f, rng.uniform(-1, 1, (50, 3)))


@pytest.mark.parametrize("make", [lambda: tf.coordinate(3, 1), lambda: tf.squared_norm(3),
                                  lambda: tf.thin_shell(3, 0.7)])
def test_builtin_gradients(make):
    _fd_check(make(), rng.uniform(-1, 1, (50, 3)))


def test_thin_shell_and_sign():
    f = tf.thin_shell(2, 0.5)
    x = rng.normal(size=(10, 2))
    np.testing.assert_allclose(f.value(x), np.sum(x ** 2, 1) - 0.5, atol=1e-14)
    np.testing.assert_allclose(f.gradient(x), 2 * x)
    s = tf.sign_product((0,), 1)
    np.testing.assert_array_equal(s.value(np.array([[-0.3], [0.2]])), [-1, 1])
    np.testing.assert_array_equal(s.gradient(np.array([[0.3]])), [[0.0]])


def test_center_examples():
    for n in (1, 2, 5):
        c = tf.center(tf.coordinate(n + 1, 1), ms.RegularSimplex(n))
        assert c.center_offset == Fraction(1, n + 1) and c.centered_exactly
    sq = tf.polynomial_function(1, {(2,): 1})
    c = tf.center(sq, ms.Interval(-1, 1))
    assert c.center_offset == pytest.approx(1 / 3, abs=1e-15)
    again = tf.center(c, ms.Interval(-1, 1))
    assert abs(float(again.center_offset) - float(c.center_offset)) <= 1e-15


def test_center_mc_records_se():
    b = ms.LpBall(2, 0.5)
    f = tf.center(tf.coordinate(2, 0), b, seed=1, N=20_000)
    assert not f.centered_exactly and f.center_se > 0
    x = b.sample(2, 100_000)
    v = f.value(x)
    assert abs(v.mean()) <= 4 * np.hypot(v.std() / np.sqrt(len(v)), f.center_se)


def test_center_idempotent_exact_simplex():
    f = tf.random_polynomial(3, 3, seed=2)
    c1 = tf.center(f, ms.RegularSimplex(2))
    c2 = tf.center(c1, ms.RegularSimplex(2))
    assert abs(float(c2.center_offset) - float(c1.center_offset)) <= 1e-12


def test_thin_shell_function_examples():
    f = tf.thin_shell_function(ms.Interval(-1, 1))
    x = np.array([[0.0], [0.5]])
    np.testing.assert_allclose(f.value(x), x[:, 0] ** 2 - 1 / 3)
    np.testing.assert_allclose(f.gradient(x), 2 * x)
    b = ms.LpBall(3, 0.5)
    g = tf.thin_shell_function(b, seed=4)
    v = g.value(b.sample(8, 100_000))
    assert abs(v.mean()) <= 4 * np.hypot(v.std() / np.sqrt(len(v)), g.center_se)


def test_eij_examples():
    n = 3
    f = tf.coordinate(n + 1, 1)
    p = ms.RegularSimplex(n).sample(0, 1)[0]
    assert tf.eij_apply(f, p, 0, 1) == -1
    for j in range(2, n + 1):
        assert tf.eij_apply(f, p, 1, j) == 1
    assert tf.eij_apply(f, p, 2, 3) == 0
    sym = tf.polynomial_function(3, {(1, 1, 0): 1.0, (2, 0, 0): 1.0, (0, 2, 0): 1.0})
    assert tf.eij_apply(sym, np.array([0.3, 0.3, 0.4]), 0, 1) == 0
    const = tf.polynomial_function(3, {(0, 0, 0): 2.0})
    np.testing.assert_array_equal(tf.eij_matrix(const, p[:3]), 0)


def test_eij_antisymmetric():
    f = tf.random_polynomial(4, 4, seed=9)
    p = ms.RegularSimplex(3).sample(1, 20)
    E = tf.eij_matrix(f, p)
    np.testing.assert_array_equal(E, -np.swapaxes(E, -1, -2))
    for i in range(4):
        for j in range(4):
            np.testing.assert_array_equal(E[:, i, j], tf.eij_apply(f, p, i, j))


def test_polynomial_json_round_trip():
    p = tf.random_polynomial(3, 4, seed=11).polynomial
    assert tf.Polynomial.from_json(p.to_json()) == p
    q = tf.Polynomial(2, {(1, 0): Fraction(1, 3), (0, 2): -2})
    assert tf.Polynomial.from_json(q.to_json()) == q


def test_polynomial_algebra():
    x = tf.Polynomial.coordinate(2, 0)
    y = tf.Polynomial.coordinate(2, 1)
    p = (x + y) * (x - y)
    pts = rng.normal(size=(10, 2))
    np.testing.assert_allclose(p(pts), pts[:, 0] ** 2 - pts[:, 1] ** 2)
    assert p.derivative(0) == 2 * x
    s = (x * y + x).substitute_x0()
    # p0 = 1 - y1, p1 = y1 -> (1 - y1) y1 + (1 - y1)
    z = rng.uniform(0, 1, (5, 1))
    np.testing.assert_allclose(s(z), (1 - z[:, 0]) * z[:, 0] + 1 - z[:, 0])
    assert (x * y).lift_x0().terms == {(0, 1, 1): 1}
