import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from poincare_lab.errors import EvaluationDomainError, ModelViolationError
from poincare_lab.potentials import custom_potential, exponential_potential, simplex_potential
from poincare_lab.transport import (Weight, christoffel_contraction, constant_weight, exp_weight, inverse_moment_map,
                                    log_concavity_probe, moment_map, q_form, qform_field, qstar_matrix,
                                    quadratic_form_report, ricci_matrix, simplex_q_form, simplex_q_form_batch,
                                    simplex_qstar_closed_form, star_condition_check, star_condition_matrix,
                                    transport_density)

rng = np.random.default_rng(7)


def test_moment_map_examples():
    np.testing.assert_allclose(moment_map(simplex_potential(2), np.zeros(2)), [1 / 3, 1 / 3])
    np.testing.assert_allclose(moment_map(exponential_potential(2), np.zeros(2)), [1, 1])
    assert moment_map(simplex_potential(1), np.array([math.log(1)]))[0] == pytest.approx(0.5)


def test_inverse_moment_map_examples():
    np.testing.assert_allclose(inverse_moment_map(simplex_potential(2), [1 / 3, 1 / 3]), 0, atol=1e-10)
    np.testing.assert_allclose(inverse_moment_map(exponential_potential(3), np.ones(3)), 0, atol=1e-12)
    assert inverse_moment_map(simplex_potential(1), [0.9])[0] == pytest.approx(math.log(9), abs=1e-9)


@pytest.mark.parametrize("y", [[0.5, 0.5], [0.0, 0.3], [-0.1, 0.2], [0.7, 0.4]])
def test_inverse_moment_map_rejects_boundary(y):
    with pytest.raises(EvaluationDomainError):
        inverse_moment_map(simplex_potential(2), y)
    with pytest.raises(EvaluationDomainError):
        inverse_moment_map(exponential_potential(1), [0.0])


@pytest.mark.parametrize("ctor", [simplex_potential, exponential_potential])
def test_round_trip(ctor):
    p = ctor(4)
    x = rng.uniform(-5, 5, (100, 4))
    np.testing.assert_allclose(inverse_moment_map(p, moment_map(p, x)), x, atol=1e-8)


def test_transport_density_examples():
    assert transport_density(simplex_potential(2), np.zeros(2)) == pytest.approx(1 / 27)
    assert transport_density(exponential_potential(2), np.zeros(2)) == pytest.approx(1.0)
    assert transport_density(exponential_potential(2), np.array([1.0, 2.0])) == pytest.approx(math.e ** 3)
    concave = custom_potential(1, lambda x: -x[..., 0] ** 2)
    with pytest.raises(ModelViolationError):
        transport_density(concave, np.array([0.0]))


def test_log_concavity_examples():
    assert log_concavity_probe(exponential_potential(2), rng.normal(size=(10, 2))).passed
    assert log_concavity_probe(simplex_potential(3), rng.uniform(-5, 5, (100, 3))).passed
    q = custom_potential(1, lambda x: x[..., 0] ** 4 / 12)
    rep = log_concavity_probe(q, [[1.0], [1.5], [2.0]])
    assert rep.passed


def test_ricci_examples():
    np.testing.assert_allclose(ricci_matrix(exponential_potential(3), rng.normal(size=3)), 0, atol=1e-12)
    for n in (2, 3):
        p = simplex_potential(n)
        x = rng.uniform(-3, 3, (20, n))
        np.testing.assert_allclose(2 * ricci_matrix(p, x), (n + 1) * p.hessian(x), atol=1e-6)
    assert ricci_matrix(simplex_potential(1), np.zeros(1))[0, 0] == pytest.approx(0.25, abs=1e-8)


def test_ricci_fd_route_for_custom_potential():
    s = simplex_potential(2)
    x = np.array([0.2, -0.4])
    target = 3 * s.hessian(x)
    with_grad = custom_potential(2, s.value_fn, s.gradient_fn)
    np.testing.assert_allclose(2 * ricci_matrix(with_grad, x), target, atol=1e-3)
    value_only = custom_potential(2, s.value_fn)
    np.testing.assert_allclose(2 * ricci_matrix(value_only, x), target, atol=5e-2)


def test_christoffel_examples():
    e = exponential_potential(3)
    C = christoffel_contraction(e, rng.normal(size=3))
    expect = np.zeros((3, 3, 3))
    for i in range(3):
        expect[i, i, i] = 1
    np.testing.assert_allclose(C, expect, atol=1e-12)
    assert christoffel_contraction(exponential_potential(1), np.array([2.3]))[0, 0, 0] == pytest.approx(1.0)
    p = simplex_potential(3)
    x = rng.uniform(-2, 2, 3)
    v = p.gradient(x)
    I = np.eye(3)
    closed = (np.einsum("jk,jl->ljk", I, I) - np.einsum("jl,k->ljk", I, v) - np.einsum("kl,j->ljk", I, v))
    np.testing.assert_allclose(christoffel_contraction(p, x), closed, atol=1e-8)


def test_qstar_examples():
    np.testing.assert_allclose(qstar_matrix(exponential_potential(4), rng.normal(size=4)), np.eye(4), atol=1e-12)
    np.testing.assert_allclose(qstar_matrix(exponential_potential(1), np.zeros(1)), [[1.0]])
    for n in range(2, 7):
        x = rng.uniform(-3, 3, (20, n))
        M = qstar_matrix(simplex_potential(n), x)
        C = simplex_qstar_closed_form(x)
        assert np.max(np.abs(M - C)) <= 1e-8 * np.max(np.abs(C))


def test_q_form_examples():
    y = rng.uniform(0.1, 3, (50, 3))
    U = rng.normal(size=(50, 3))
    np.testing.assert_allclose(q_form(exponential_potential(3), y, U), 4 * np.sum(y ** 2 * U ** 2, -1), rtol=1e-8)
    p = simplex_potential(2)
    assert q_form(p, [1 / 3, 1 / 3], [1, -1]) == pytest.approx(simplex_q_form([1 / 3, 1 / 3], [1, -1]), rel=1e-6)
    assert q_form(p, [0.2, 0.3], [0, 0]) == 0.0


def test_q_form_infinite_outside_subspace():
    # psi = x1^2/2 + exp(x2): Q* vanishes in the first direction.
    pot = custom_potential(2, lambda x: 0.5 * x[..., 0] ** 2 + np.exp(x[..., 1]),
                           lambda x: np.stack([x[..., 0], np.exp(x[..., 1])], -1),
                           lambda x: np.stack([np.stack([np.ones_like(x[..., 0]), 0 * x[..., 0]], -1),
                                               np.stack([0 * x[..., 0], np.exp(x[..., 1])], -1)], -2))
    from dataclasses import replace
    pot = replace(pot, third_fn=lambda x: np.einsum("...,ijk->...ijk", np.exp(x[..., 1]),
                                                     np.array([[[0, 0], [0, 0]], [[0, 0], [0, 1.0]]])),
                  derivative_mode="closed_form")
    rep = quadratic_form_report(pot, [0.5, 2.0], [[1.0, 0.0], [0.0, 1.0], [1.0, 1.0]])
    assert rep.rank == 1
    vals = [v for _, v in rep.q_values]
    assert vals[0] == math.inf and vals[2] == math.inf
    assert vals[1] == pytest.approx(4 * 2.0 ** 2)


def test_simplex_q_form_examples():
    assert simplex_q_form([1 / 3, 1 / 3], [1, 0]) == pytest.approx(8 / 9)
    assert simplex_q_form([0.1, 0.3], [0, 0]) == 0.0
    a = simplex_q_form([1 / 3, 1 / 3], [0.7, -1.3])
    b = simplex_q_form([1 / 3, 1 / 3], [-1.3, 0.7])
    assert a == pytest.approx(b, rel=1e-14)
    with pytest.raises(EvaluationDomainError):
        simplex_q_form([0.6, 0.5], [1, 1])


def test_simplex_q_form_singular_policy():
    vals, flag = simplex_q_form_batch(np.array([[0.5, 0.2], [0.2, 0.25]]), np.array([[1.0, 1.0], [1.0, 1.0]]))
    assert flag.tolist() == [True, False]
    assert np.all(np.isfinite(vals)) and np.all(vals >= 0)


def test_simplex_q_form_matches_generic():
    from poincare_lab.measures import CornerSimplex
    for n in range(2, 7):
        y = CornerSimplex(n).sample(n, 100)
        U = rng.normal(size=(100, n))
        s, _ = simplex_q_form_batch(y, U)
        g = q_form(simplex_potential(n), y, U)
        np.testing.assert_allclose(g, s, rtol=1e-6)


@pytest.mark.parametrize("ctor,n", [(simplex_potential, 3), (exponential_potential, 3)])
def test_qstar_psd_and_quadratic(ctor, n):
    p = ctor(n)
    x = rng.uniform(-3, 3, (50, n))
    M = qstar_matrix(p, x)
    ev = np.linalg.eigvalsh(M)
    assert np.all(ev[:, 0] >= -1e-8 * ev[:, -1])
    fld = qform_field(p, p.gradient(x), x=x)
    U, V = rng.normal(size=(50, n)), rng.normal(size=(50, n))
    q = fld.evaluate
    np.testing.assert_allclose(q(2.5 * U), 6.25 * q(U), rtol=1e-9)
    np.testing.assert_allclose(q(U + V) + q(U - V), 2 * q(U) + 2 * q(V), rtol=1e-8)


def test_supremum_consistency():
    p = simplex_potential(3)
    y = np.array([0.2, 0.25, 0.3])
    fld = qform_field(p, y)
    U = np.array([0.4, -1.0, 0.7])
    qU = float(fld.evaluate(U))
    # Points on the Q*-unit ellipsoid.
    L = np.linalg.cholesky(fld.qstar)
    Z = rng.normal(size=(1000, 3))
    Z /= np.linalg.norm(Z, axis=1, keepdims=True)
    V = np.linalg.solve(L.T, Z.T).T
    assert np.allclose(np.einsum("ni,ij,nj->n", V, fld.qstar, V), 1.0)
    vals = 4 * (V @ (fld.hessian @ U)) ** 2
    assert np.all(vals <= qU * (1 + 1e-8))
    vstar = fld.maximizer(U)
    assert 4 * float(vstar @ fld.hessian @ U) ** 2 == pytest.approx(qU, rel=1e-8)


def test_star_condition_examples():
    p = simplex_potential(3)
    x = rng.uniform(-4, 4, (100, 3))
    A, _ = star_condition_matrix(p, constant_weight(), x)
    np.testing.assert_allclose(A, ricci_matrix(p, x), atol=1e-12)
    assert star_condition_check(p, constant_weight(), x).passed
    e = exponential_potential(2)
    rep = star_condition_check(e, constant_weight(), rng.normal(size=(10, 2)))
    assert rep.passed and abs(rep.min_eigenvalue_overall) <= 1e-10
    probes = np.linspace(-3, 3, 25)[:, None]
    fail = star_condition_check(exponential_potential(1), exp_weight(0.25), probes)
    assert not fail.passed
    xs = probes[:, 0]
    np.testing.assert_allclose(fail.min_eigenvalues, -np.exp(xs / 4) / 16, rtol=1e-8)
    border = star_condition_check(exponential_potential(1), exp_weight(0.5), probes)
    assert border.passed and np.max(np.abs(border.min_eigenvalues)) <= 1e-9


def test_star_condition_finite_difference_weight():
    probes = np.linspace(-2, 2, 9)[:, None]
    phi = Weight(lambda x: np.exp(x[..., 0] / 4))
    rep = star_condition_check(exponential_potential(1), phi, probes)
    assert not rep.passed
    np.testing.assert_allclose(rep.min_eigenvalues, -np.exp(probes[:, 0] / 4) / 16, rtol=1e-4)


@settings(max_examples=40, deadline=None)
@given(arrays(float, 3, elements=st.floats(-6, 6)), arrays(float, 3, elements=st.floats(-5, 5)))
def test_generic_q_form_nonnegative(x, U):
    p = simplex_potential(3)
    v = float(qform_field(p, p.gradient(x), x=x).evaluate(U))
    assert v >= 0
