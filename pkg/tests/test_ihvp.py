"""Inverse-Hessian-vector product strategies against dense linear algebra."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hypergrad import (
    InverseStrategy,
    approx_ihvp,
    dense_hessian,
    dense_mixed,
)
from hypergrad.errors import CapacityError, ConfigError, ValidationError
from hypergrad.problems import QuadraticBilevelSpec, make_quadratic, random_quadratic

# For the quadratic problem L_T = 0.5 w'Aw + w'(B lam + c), the weight
# Hessian is A and the mixed block d2 L_T / dw dlam is B, both exactly and
# independently of (lam, w) -- that is the oracle used throughout.

SEED = 7


@pytest.fixture(scope="module")
def quad():
    spec = random_quadratic(8, 3, seed=SEED)
    problem = make_quadratic(spec)
    lam = problem.init_lam(SEED)
    w = problem.init_w(SEED)
    return spec, problem, lam, w


def _diag_quadratic(diag):
    d = np.asarray(diag, dtype=float)
    m = len(d)
    return QuadraticBilevelSpec(np.diag(d), np.zeros((m, 1)), np.zeros(m), np.zeros(m))


# ---------------------------------------------------------------------------
# dense assembly
# ---------------------------------------------------------------------------


def test_dense_hessian_matches_quadratic_matrix(quad):
    spec, problem, lam, w = quad
    h = dense_hessian(problem, lam, w)
    np.testing.assert_allclose(h, spec.a, atol=1e-10)


def test_dense_hessian_is_symmetric(quad):
    _, problem, lam, w = quad
    h = dense_hessian(problem, lam, w)
    np.testing.assert_array_equal(h, h.T)


def test_dense_hessian_respects_cap(quad):
    _, problem, lam, w = quad
    with pytest.raises(CapacityError):
        dense_hessian(problem, lam, w, cap=len(w) - 1)


def test_dense_mixed_matches_quadratic_matrix(quad):
    spec, problem, lam, w = quad
    np.testing.assert_allclose(dense_mixed(problem, lam, w), spec.b, atol=1e-10)


def test_dense_mixed_respects_cap(quad):
    _, problem, lam, w = quad
    with pytest.raises(CapacityError):
        dense_mixed(problem, lam, w, cap=2)


# ---------------------------------------------------------------------------
# strategy construction
# ---------------------------------------------------------------------------


def test_unknown_kind_rejected():
    with pytest.raises(ValidationError):
        InverseStrategy("jacobi")


def test_negative_terms_rejected():
    with pytest.raises(ValidationError):
        InverseStrategy.neumann(-1)


def test_nonpositive_scale_rejected():
    with pytest.raises(ValidationError):
        InverseStrategy.neumann(5, scale=0.0)


def test_cg_needs_positive_tol_and_iterations():
    with pytest.raises(ValidationError):
        InverseStrategy("cg", tol=0.0, max_iter=5)
    with pytest.raises(ValidationError):
        InverseStrategy.cg(max_iter=0)


def test_truncated_unrolled_kept_bounds():
    with pytest.raises(ValidationError):
        InverseStrategy.truncated_unrolled(steps=3, kept=4)
    InverseStrategy.truncated_unrolled(steps=3, kept=0)  # boundary is legal


def test_with_default_scale_fills_only_missing_iterative_scale():
    assert InverseStrategy.neumann(5).with_default_scale(0.2).scale == 0.2
    assert InverseStrategy.neumann(5, scale=0.7).with_default_scale(0.2).scale == 0.7
    assert InverseStrategy.identity().with_default_scale(0.2).scale is None


def test_unrolled_kinds_are_rejected_by_approx_ihvp(quad):
    _, problem, lam, w = quad
    v = w.with_data(np.ones(len(w)))
    with pytest.raises(ConfigError):
        approx_ihvp(InverseStrategy.unrolled(3, scale=0.1), problem, lam, w, v)


def test_neumann_without_scale_is_rejected(quad):
    _, problem, lam, w = quad
    v = w.with_data(np.ones(len(w)))
    with pytest.raises(ConfigError):
        approx_ihvp(InverseStrategy.neumann(3), problem, lam, w, v)


# ---------------------------------------------------------------------------
# the approximations against the dense solve
# ---------------------------------------------------------------------------


def test_identity_returns_the_vector_unchanged(quad):
    _, problem, lam, w = quad
    v = w.with_data(np.arange(1.0, len(w) + 1.0))
    u, diag = approx_ihvp(InverseStrategy.identity(), problem, lam, w, v)
    np.testing.assert_array_equal(u.data, v.data)
    assert diag["ihvp_iterations"] == 0
    assert not diag["diverged"]


def test_exact_dense_solves_the_system(quad):
    spec, problem, lam, w = quad
    v = w.with_data(np.arange(1.0, len(w) + 1.0))
    u, diag = approx_ihvp(InverseStrategy.exact_dense(), problem, lam, w, v)
    np.testing.assert_allclose(u.data, np.linalg.solve(spec.a, v.data), atol=1e-10)
    assert diag["ihvp_residual_norm"] < 1e-9


def test_neumann_matches_geometric_series_closed_form():
    # diagonal A makes every coordinate an independent scalar series:
    # u_i = (1 - (1 - alpha a_i)^terms) / a_i * v_i
    diag = np.array([2.0, 4.0, 0.5])
    problem = make_quadratic(_diag_quadratic(diag))
    lam = problem.zeros_lam()
    w = problem.zeros_w()
    v = w.with_data(np.array([1.0, -2.0, 3.0]))
    alpha = 0.2
    for terms in (1, 2, 5, 17):
        u, diagnostics = approx_ihvp(
            InverseStrategy.neumann(terms, scale=alpha), problem, lam, w, v
        )
        expected = (1.0 - (1.0 - alpha * diag) ** terms) / diag * v.data
        np.testing.assert_allclose(u.data, expected, atol=1e-12)
        assert diagnostics["ihvp_iterations"] == terms
        assert not diagnostics["diverged"]


def test_neumann_zero_terms_gives_zero(quad):
    _, problem, lam, w = quad
    v = w.with_data(np.ones(len(w)))
    u, diag = approx_ihvp(InverseStrategy.neumann(0, scale=0.1), problem, lam, w, v)
    np.testing.assert_array_equal(u.data, np.zeros(len(w)))
    assert diag["ihvp_iterations"] == 0


def test_neumann_one_term_unit_scale_equals_identity(quad):
    _, problem, lam, w = quad
    v = w.with_data(np.linspace(-1.0, 1.0, len(w)))
    u_n, _ = approx_ihvp(InverseStrategy.neumann(1, scale=1.0), problem, lam, w, v)
    u_i, _ = approx_ihvp(InverseStrategy.identity(), problem, lam, w, v)
    np.testing.assert_array_equal(u_n.data, u_i.data)


def test_neumann_converges_under_contraction(quad):
    spec, problem, lam, w = quad
    v = w.with_data(np.arange(1.0, len(w) + 1.0))
    alpha = 0.9 / float(np.linalg.eigvalsh(spec.a).max())
    exact = np.linalg.solve(spec.a, v.data)
    u, diag = approx_ihvp(InverseStrategy.neumann(200, scale=alpha), problem, lam, w, v)
    rel = np.linalg.norm(u.data - exact) / np.linalg.norm(exact)
    assert rel < 1e-3
    assert not diag["diverged"]


def test_neumann_divergence_flagged_not_fatal(quad):
    spec, problem, lam, w = quad
    v = w.with_data(np.ones(len(w)))
    alpha = 3.0 / float(np.linalg.eigvalsh(spec.a).max())
    u, diag = approx_ihvp(InverseStrategy.neumann(200, scale=alpha), problem, lam, w, v)
    assert diag["diverged"]
    assert np.isnan(diag["ihvp_residual_norm"])
    assert np.all(np.isfinite(u.data))  # the partial sum before the bailout


def test_cg_is_exact_at_full_dimension(quad):
    spec, problem, lam, w = quad
    v = w.with_data(np.arange(1.0, len(w) + 1.0))
    u, diag = approx_ihvp(InverseStrategy.cg(max_iter=len(w)), problem, lam, w, v)
    np.testing.assert_allclose(u.data, np.linalg.solve(spec.a, v.data), atol=1e-8)
    assert diag["ihvp_iterations"] <= len(w)
    assert diag["ihvp_residual_norm"] < 1e-8


def test_cg_residual_diagnostic_matches_recomputation(quad):
    spec, problem, lam, w = quad
    v = w.with_data(np.linspace(1.0, 2.0, len(w)))
    u, diag = approx_ihvp(InverseStrategy.cg(max_iter=3), problem, lam, w, v)
    residual = np.linalg.norm(spec.a @ u.data - v.data)
    np.testing.assert_allclose(diag["ihvp_residual_norm"], residual, rtol=1e-9)


@settings(max_examples=25, deadline=None)
@given(
    eigs=st.lists(st.floats(0.5, 4.0), min_size=2, max_size=6),
    seed=st.integers(0, 2**16),
)
def test_neumann_error_shrinks_with_more_terms(eigs, seed):
    # with 0 < alpha < 1/lambda_max the series error contracts monotonically
    diag = np.asarray(eigs)
    problem = make_quadratic(_diag_quadratic(diag))
    lam, w = problem.zeros_lam(), problem.zeros_w()
    v = w.with_data(np.random.default_rng(seed).standard_normal(len(diag)))
    alpha = 0.9 / float(diag.max())
    exact = v.data / diag
    errs = []
    for terms in (1, 4, 16, 64):
        u, _ = approx_ihvp(InverseStrategy.neumann(terms, scale=alpha), problem, lam, w, v)
        errs.append(np.linalg.norm(u.data - exact))
    assert all(a >= b - 1e-12 for a, b in zip(errs, errs[1:]))
