import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from helpers import brute_force_F, jacobi_eigenvalues, single_component_instance
from nested_admm.diagnostics import finite_diff_gradient
from nested_admm.exceptions import (
    DimensionError,
    EmptyBatch,
    InsufficientProbes,
    InvalidMatrix,
    NumericalFailure,
    UnsupportedMode,
)
from nested_admm.oracles import AffineInner, CompositionOracle, QuadraticOuter
from nested_admm.problem import (
    SmoothnessProfile,
    composition_value,
    estimate_profile,
    eval_f1,
    eval_grad_f2,
    eval_jac_f1,
    exact_nested_gradient,
    full_objective,
    spectral_bounds,
)
from nested_admm.prox import Regularizer


def test_spectral_bounds_identity():
    smin, smax = spectral_bounds(np.eye(3))
    assert smin == pytest.approx(1.0, abs=1e-12) and smax == pytest.approx(1.0, abs=1e-12)


def test_spectral_bounds_diagonal():
    smin, smax = spectral_bounds(np.diag([1.0, 2.0]))
    assert smin == pytest.approx(1.0, abs=1e-8)
    assert smax == pytest.approx(4.0, abs=1e-8)


def test_spectral_bounds_match_jacobi_oracle():
    M = np.random.default_rng(11).standard_normal((6, 4))
    eig = jacobi_eigenvalues(M.T @ M)
    smin, smax = spectral_bounds(M)
    assert abs(smin - eig[0]) <= 1e-8
    assert abs(smax - eig[-1]) <= 1e-8


def test_spectral_bounds_rank_deficient_gives_zero():
    M = np.array([[1.0, 1.0], [1.0, 1.0], [0.0, 0.0]])
    smin, smax = spectral_bounds(M)
    assert smin == pytest.approx(0.0, abs=1e-8)
    assert smax == pytest.approx(4.0, abs=1e-8)


def test_spectral_bounds_errors():
    with pytest.raises(InvalidMatrix):
        spectral_bounds(np.zeros((3, 2)))
    M = np.random.default_rng(0).standard_normal((8, 8))
    with pytest.raises(NumericalFailure) as info:
        spectral_bounds(M, tol=1e-16, max_iter=3)
    assert info.value.iterations == 3


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 10_000), rows=st.integers(2, 7), cols=st.integers(1, 5))
def test_rayleigh_quotients_inside_bounds(seed, rows, cols):
    rng = np.random.default_rng(seed)
    M = rng.standard_normal((rows, cols))
    smin, smax = spectral_bounds(M)
    V = rng.standard_normal((100, cols))
    V /= np.linalg.norm(V, axis=1, keepdims=True)
    rq = np.einsum("ij,jk,ik->i", V, M.T @ M, V)
    assert np.all(rq >= smin - 1e-8) and np.all(rq <= smax + 1e-8)


def test_batch_means(small_quadratic):
    oracle = small_quadratic.oracle
    x = np.linspace(-1, 1, oracle.dim_x)
    i = 4
    np.testing.assert_allclose(eval_f1(oracle, [i], x), oracle.eval_f1_component(i, x))
    np.testing.assert_allclose(eval_f1(oracle, [i, i], x), oracle.eval_f1_component(i, x))
    np.testing.assert_allclose(eval_jac_f1(oracle, [i], x), oracle.jac_f1_component(i, x))
    w = np.ones(oracle.dim_w)
    np.testing.assert_allclose(eval_grad_f2(oracle, [2], w), oracle.grad_f2_component(2, w))


def test_full_batch_mean_matches_direct_sum(small_quadratic):
    oracle = small_quadratic.oracle
    x = np.random.default_rng(1).standard_normal(oracle.dim_x)
    Mbar = oracle.inner.M.sum(axis=0) / oracle.n1
    bbar = oracle.inner.b.sum(axis=0) / oracle.n1
    idx = np.arange(oracle.n1)
    np.testing.assert_allclose(eval_f1(oracle, idx, x), Mbar @ x + bbar, atol=1e-13)
    np.testing.assert_allclose(eval_jac_f1(oracle, idx, x), Mbar, atol=1e-13)
    w = np.random.default_rng(2).standard_normal(oracle.dim_w)
    C, dv = oracle.outer.C, oracle.outer.d
    direct = sum(C[j].T @ (C[j] @ w - dv[j]) for j in range(oracle.n2)) / oracle.n2
    np.testing.assert_allclose(eval_grad_f2(oracle, np.arange(oracle.n2), w), direct, atol=1e-13)


def test_full_batch_invariant_to_order(small_quadratic):
    oracle = small_quadratic.oracle
    x = np.random.default_rng(3).standard_normal(oracle.dim_x)
    perm = np.random.default_rng(4).permutation(oracle.n1)
    np.testing.assert_allclose(eval_f1(oracle, perm, x), eval_f1(oracle, np.arange(oracle.n1), x), atol=1e-14)
    np.testing.assert_allclose(
        eval_jac_f1(oracle, perm, x), eval_jac_f1(oracle, np.arange(oracle.n1), x), atol=1e-14
    )
    perm2 = np.random.default_rng(5).permutation(oracle.n2)
    w = np.ones(oracle.dim_w)
    np.testing.assert_allclose(
        eval_grad_f2(oracle, perm2, w), eval_grad_f2(oracle, np.arange(oracle.n2), w), atol=1e-14
    )


def test_identical_outer_components_give_w():
    l = 3
    outer = QuadraticOuter(np.stack([np.eye(l)] * 4), np.zeros((4, l)))
    oracle = CompositionOracle(AffineInner(np.ones((2, l, 2)), np.zeros((2, l))), outer, 2, l)
    w = np.array([1.0, -2.0, 0.5])
    np.testing.assert_allclose(eval_grad_f2(oracle, [0, 3, 3], w), w)


def test_batch_errors(small_quadratic):
    oracle = small_quadratic.oracle
    with pytest.raises(EmptyBatch):
        eval_f1(oracle, [], np.zeros(oracle.dim_x))
    with pytest.raises(IndexError):
        eval_f1(oracle, [oracle.n1], np.zeros(oracle.dim_x))


def test_chain_rule_analytic():
    M = np.random.default_rng(0).standard_normal((4, 3))
    problem = single_component_instance(M, np.eye(4))
    x = np.array([0.5, -1.0, 2.0])
    np.testing.assert_allclose(exact_nested_gradient(problem, x), M.T @ M @ x, atol=1e-13)
    np.testing.assert_array_equal(exact_nested_gradient(problem, np.zeros(3)), np.zeros(3))


@pytest.mark.parametrize("name", ["small_quadratic", "small_logistic", "small_graph"])
def test_chain_rule_matches_finite_differences(name, request):
    problem = request.getfixturevalue(name)
    rng = np.random.default_rng(9)
    for _ in range(5):
        x = rng.standard_normal(problem.dim_x)
        g = exact_nested_gradient(problem, x)
        fd = finite_diff_gradient(problem, x, h=1e-5)
        assert np.linalg.norm(g - fd) <= 1e-5 * np.linalg.norm(g)


def test_online_oracle_has_no_exact_gradient(small_online):
    with pytest.raises(UnsupportedMode):
        exact_nested_gradient(small_online, np.zeros(small_online.dim_x))


def test_full_objective_examples(small_quadratic):
    oracle = small_quadratic.oracle
    x = np.random.default_rng(2).standard_normal(oracle.dim_x)
    y = [np.ones(n) for n in small_quadratic.block_dims]
    assert composition_value(small_quadratic, x) == pytest.approx(brute_force_F(oracle, x), rel=1e-12)
    expected = brute_force_F(oracle, x) + sum(reg(yj) for reg, yj in zip(small_quadratic.regs, y))
    assert full_objective(small_quadratic, x, y) == pytest.approx(expected, rel=1e-12)
    with pytest.raises(DimensionError):
        full_objective(small_quadratic, x, y + [np.ones(2)])
    with pytest.raises(DimensionError):
        full_objective(small_quadratic, x, [np.ones(1)])


def test_full_objective_zero_F_with_l1():
    zero = single_component_instance(np.zeros((2, 2)), np.eye(2), regs=[Regularizer("l1", 1.0)])
    assert full_objective(zero, np.zeros(2), [np.array([1.0, -2.0])]) == 3.0


def test_problem_instance_validation(small_quadratic):
    p = small_quadratic
    with pytest.raises(DimensionError):
        type(p)(p.A, [np.ones((p.dim_c + 1, 2))], p.c, p.regs, p.oracle)
    with pytest.raises(DimensionError):
        type(p)(p.A, p.B, np.ones(p.dim_c + 1), p.regs, p.oracle)
    with pytest.raises(DimensionError):
        type(p)(p.A, p.B, p.c, [], p.oracle)
    rank_def = np.zeros_like(p.A)
    rank_def[:, 0] = 1.0
    with pytest.raises(InvalidMatrix):
        type(p)(rank_def, p.B, p.c, p.regs, p.oracle).spectral


def test_estimate_profile_zero_variance_and_ell1():
    M = np.array([[2.0, 0.0], [0.0, 0.5], [1.0, 1.0]])
    oracle = CompositionOracle(
        AffineInner(np.stack([M, M]), np.zeros((2, 3))), QuadraticOuter(np.eye(3)[None], np.zeros((1, 3))), 2, 3
    )
    rng = np.random.default_rng(0)
    probes = [np.array([1.0, 0.0]), np.array([0.0, 1.0]), np.array([1.0, 1.0])]
    prof = estimate_profile(oracle, probes, rng, safety=1.0)
    assert prof.sigma1 == 0.0 and prof.delta == 0.0
    assert prof.ell1 == pytest.approx(np.sqrt(jacobi_eigenvalues(M.T @ M)[-1]), rel=1e-12)
    assert prof.L1 == 0.0
    assert prof.LF == pytest.approx(prof.ell1**2 * prof.L2 + prof.ell2 * prof.L1)
    inflated = estimate_profile(oracle, probes, rng)
    assert inflated.ell1 == pytest.approx(1.5 * prof.ell1)


def test_estimate_profile_passthrough_and_errors(small_quadratic):
    given_profile = SmoothnessProfile(1, 1, 1, 1, 2, 1, 1, 1)
    rng = np.random.default_rng(0)
    assert estimate_profile(small_quadratic.oracle, [], rng, profile=given_profile) is given_profile
    with pytest.raises(InsufficientProbes):
        estimate_profile(small_quadratic.oracle, [np.zeros(small_quadratic.dim_x)], rng)


def test_profile_validation():
    with pytest.raises(ValueError):
        SmoothnessProfile(1, 1, 1, 1, 1, -1, 1, 1)
    with pytest.raises(ValueError):
        SmoothnessProfile(1, 1, 1, 1, 0, 1, 1, 1)
    with pytest.raises(ValueError):
        SmoothnessProfile(1, 1, 1, np.inf, 1, 1, 1, 1)
