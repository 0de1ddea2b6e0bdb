"""Implicit and unrolled hypergradients against closed forms and finite
differences, plus the outer optimization loop."""

import numpy as np
import pytest

from hypergrad import (
    InverseStrategy,
    OptimizerState,
    cosine_and_l2,
    dense_hessian,
    fixed_point_residual,
    grad_lam,
    grad_w,
    hypergrad_accuracy,
    hypergradient,
    inner_optimize,
    newton_refine,
    run_ho,
    unrolled_hypergradient,
)
from hypergrad.errors import CapacityError, ConfigError
from hypergrad.problems import (
    PenalizedModelSpec,
    exact_quadratic_hypergradient,
    gen_blobs,
    make_penalized,
    make_quadratic,
    quadratic_lambda_star,
    random_quadratic,
)

SEED = 3


@pytest.fixture(scope="module")
def quad():
    spec = random_quadratic(6, 3, seed=SEED)
    return spec, make_quadratic(spec)


@pytest.fixture(scope="module")
def logistic():
    """A small trained logistic problem with a near-exact stationary point."""
    train = gen_blobs(2, 10, dim=2, spread=0.8, seed=SEED)
    val = gen_blobs(2, 10, dim=2, spread=0.8, seed=SEED + 1)
    test = gen_blobs(2, 10, dim=2, spread=0.8, seed=SEED + 2)
    spec = PenalizedModelSpec(model="logistic", decay_scope="per_param", init_decay=0.1)
    problem = make_penalized(spec, train, val, test)
    lam = problem.init_lam(SEED)
    w, _, _ = inner_optimize(problem, lam, problem.init_w(SEED), 300, OptimizerState("sgd", 0.3))
    w = newton_refine(problem, lam, w, steps=5)
    return problem, lam, w


def _sgd_trajectory(problem, lam, w, steps, lr):
    for _ in range(steps):
        g = grad_w(problem.train_loss, lam, w, problem.train_data)
        w = w.with_data(w.data - lr * g.data)
    return w


def _fd_lam(fun, lam, eps=1e-6):
    """Central differences of a scalar function over every lam coordinate."""
    out = np.empty(len(lam))
    for i in range(len(lam)):
        up, down = lam.data.copy(), lam.data.copy()
        up[i] += eps
        down[i] -= eps
        out[i] = (fun(lam.with_data(up)) - fun(lam.with_data(down))) / (2 * eps)
    return out


# ---------------------------------------------------------------------------
# implicit differentiation vs the closed form
# ---------------------------------------------------------------------------


def test_exact_dense_matches_quadratic_oracle(quad):
    spec, problem = quad
    lam = problem.init_lam(SEED)
    w_star, hg_star = exact_quadratic_hypergradient(spec, lam)
    assert fixed_point_residual(problem, lam, w_star) < 1e-9
    report = hypergradient(problem, lam, w_star, InverseStrategy.exact_dense())
    np.testing.assert_allclose(report.total.data, hg_star.data, atol=1e-10)


def test_total_is_direct_plus_indirect_exactly(quad):
    spec, problem = quad
    lam = problem.init_lam(SEED)
    w_star, _ = exact_quadratic_hypergradient(spec, lam)
    for strategy in (
        InverseStrategy.exact_dense(),
        InverseStrategy.neumann(5, scale=0.1),
        InverseStrategy.cg(max_iter=4),
        InverseStrategy.identity(),
    ):
        report = hypergradient(problem, lam, w_star, strategy)
        np.testing.assert_array_equal(
            report.total.data, (report.direct + report.indirect).data
        )


def test_diagnostics_carry_residual_and_strategy(quad):
    spec, problem = quad
    lam = problem.init_lam(SEED)
    w_star, _ = exact_quadratic_hypergradient(spec, lam)
    report = hypergradient(problem, lam, w_star, InverseStrategy.cg(max_iter=6))
    assert report.diagnostics["strategy"] == "cg"
    assert report.diagnostics["fixed_point_residual"] < 1e-9
    assert not report.diagnostics["diverged"]


# ---------------------------------------------------------------------------
# unrolled differentiation
# ---------------------------------------------------------------------------


def test_unrolled_zero_steps_is_the_direct_gradient(quad):
    _, problem = quad
    lam = problem.init_lam(SEED)
    w0 = problem.zeros_w().with_data(np.linspace(-1, 1, problem.w_dim))
    direct = grad_lam(problem.val_loss, lam, w0, problem.val_data)
    total = unrolled_hypergradient(problem, lam, w0, steps=0, scale=0.1)
    np.testing.assert_array_equal(total.data, direct.data)


def test_unrolled_matches_finite_differences_from_cold_start(quad):
    # from a non-stationary start the unrolled gradient is the exact
    # derivative of the finite SGD trajectory, checked against central
    # differences of that trajectory
    _, problem = quad
    lam = problem.init_lam(SEED + 1)
    w0 = problem.zeros_w().with_data(np.full(problem.w_dim, 0.3))
    steps, lr = 5, 0.05

    def val_after_sgd(lam_v):
        w = _sgd_trajectory(problem, lam_v, w0, steps, lr)
        from hypergrad import evaluate

        return evaluate(problem.val_loss, lam_v, w, problem.val_data)

    fd = _fd_lam(val_after_sgd, lam)
    total = unrolled_hypergradient(problem, lam, w0, steps=steps, scale=lr)
    np.testing.assert_allclose(total.data, fd, rtol=1e-6, atol=1e-8)


def test_truncated_unrolled_matches_frozen_prefix_finite_differences(quad):
    _, problem = quad
    lam = problem.init_lam(SEED + 2)
    w0 = problem.zeros_w().with_data(np.full(problem.w_dim, -0.2))
    steps, kept, lr = 6, 2, 0.05
    w_mid = _sgd_trajectory(problem, lam, w0, steps - kept, lr)  # held fixed below

    def val_after_suffix(lam_v):
        w = _sgd_trajectory(problem, lam_v, w_mid, kept, lr)
        from hypergrad import evaluate

        return evaluate(problem.val_loss, lam_v, w, problem.val_data)

    fd = _fd_lam(val_after_suffix, lam)
    total = unrolled_hypergradient(problem, lam, w0, steps=steps, scale=lr, kept=kept)
    np.testing.assert_allclose(total.data, fd, rtol=1e-6, atol=1e-8)


def test_truncated_with_all_steps_kept_equals_full_unrolled(quad):
    _, problem = quad
    lam = problem.init_lam(SEED)
    w0 = problem.zeros_w().with_data(np.full(problem.w_dim, 0.1))
    full = unrolled_hypergradient(problem, lam, w0, steps=4, scale=0.05)
    trunc = unrolled_hypergradient(problem, lam, w0, steps=4, scale=0.05, kept=4)
    np.testing.assert_allclose(trunc.data, full.data, atol=1e-12)


def test_unrolled_argument_validation(quad):
    _, problem = quad
    lam, w0 = problem.init_lam(SEED), problem.zeros_w()
    with pytest.raises(ConfigError):
        unrolled_hypergradient(problem, lam, w0, steps=-1, scale=0.1)
    with pytest.raises(ConfigError):
        unrolled_hypergradient(problem, lam, w0, steps=2, scale=0.1, kept=3)
    with pytest.raises(CapacityError):
        unrolled_hypergradient(problem, lam, w0, steps=50, scale=0.1, unroll_cap=10)


def test_unrolled_strategy_needs_a_scale(quad):
    _, problem = quad
    lam, w0 = problem.init_lam(SEED), problem.zeros_w()
    with pytest.raises(ConfigError):
        hypergradient(problem, lam, w0, InverseStrategy.unrolled(3))


# ---------------------------------------------------------------------------
# Neumann / unrolled equivalence at a stationary point
# ---------------------------------------------------------------------------


@pytest.mark.parametrize("terms", [1, 3, 10])
def test_neumann_equals_unrolled_at_stationarity_quadratic(quad, terms):
    spec, problem = quad
    lam = problem.init_lam(SEED)
    w_star, _ = exact_quadratic_hypergradient(spec, lam)
    alpha = 0.9 / float(np.linalg.eigvalsh(spec.a).max())
    via_neumann = hypergradient(
        problem, lam, w_star, InverseStrategy.neumann(terms, scale=alpha)
    ).total
    via_unrolling = unrolled_hypergradient(problem, lam, w_star, terms, alpha)
    np.testing.assert_allclose(via_unrolling.data, via_neumann.data, atol=1e-8)


@pytest.mark.parametrize("terms", [1, 3, 10])
def test_neumann_equals_unrolled_at_stationarity_logistic(logistic, terms):
    problem, lam, w = logistic
    assert fixed_point_residual(problem, lam, w) < 1e-9
    h = dense_hessian(problem, lam, w)
    alpha = 0.9 / float(np.linalg.eigvalsh(h).max())
    via_neumann = hypergradient(
        problem, lam, w, InverseStrategy.neumann(terms, scale=alpha)
    ).total
    via_unrolling = unrolled_hypergradient(problem, lam, w, terms, alpha)
    np.testing.assert_allclose(via_unrolling.data, via_neumann.data, atol=1e-8)


def test_unrolled_strategy_reports_through_hypergradient(quad):
    spec, problem = quad
    lam = problem.init_lam(SEED)
    w_star, _ = exact_quadratic_hypergradient(spec, lam)
    report = hypergradient(
        problem, lam, w_star, InverseStrategy.unrolled(3, scale=0.05)
    )
    direct = grad_lam(problem.val_loss, lam, w_star, problem.val_data)
    np.testing.assert_array_equal(report.direct.data, direct.data)
    np.testing.assert_allclose(
        report.total.data,
        unrolled_hypergradient(problem, lam, w_star, 3, 0.05).data,
        atol=1e-12,
    )
    assert np.isnan(report.diagnostics["ihvp_residual_norm"])
    assert report.diagnostics["ihvp_iterations"] == 3


# ---------------------------------------------------------------------------
# the outer loop
# ---------------------------------------------------------------------------


def test_run_ho_converges_to_quadratic_optimum(quad):
    spec, problem = quad
    lam_star = quadratic_lambda_star(spec)
    run = run_ho(
        problem,
        problem.init_lam(0),
        problem.init_w(0),
        outer_iters=300,
        inner_steps=20,
        opt_w=OptimizerState("sgd", 0.2),
        opt_lam=OptimizerState("rmsprop", 0.05),
        strategy=InverseStrategy.exact_dense(),
    )
    assert not run.failed
    assert len(run.records) == 300
    assert np.linalg.norm(run.lam.data - lam_star) < 5e-2
    # the outer iterate is still moving, so w trails the shifting optimum a bit
    assert run.records[-1].fixed_point_residual < 1e-3
    assert [r.iteration for r in run.records] == list(range(300))


def test_run_ho_zero_outer_iters_is_a_no_op(quad):
    _, problem = quad
    lam0, w0 = problem.init_lam(1), problem.init_w(1)
    run = run_ho(
        problem, lam0, w0, 0, 5,
        OptimizerState("sgd", 0.1), OptimizerState("sgd", 0.1),
        InverseStrategy.identity(),
    )
    assert run.records == []
    np.testing.assert_array_equal(run.lam.data, lam0.data)
    np.testing.assert_array_equal(run.w.data, w0.data)


def test_run_ho_truncates_on_numeric_failure(quad):
    # an absurd inner learning rate blows the quadratic up within an iteration
    _, problem = quad
    run = run_ho(
        problem,
        problem.init_lam(0),
        problem.init_w(0),
        outer_iters=50,
        inner_steps=30,
        opt_w=OptimizerState("sgd", 10.0),
        opt_lam=OptimizerState("sgd", 0.01),
        strategy=InverseStrategy.identity(),
    )
    assert run.failed
    assert len(run.records) < 50
    assert run.records[-1].diverged
    assert np.isnan(run.records[-1].train_loss)


def test_run_ho_surfaces_neumann_divergence_flag(quad):
    spec, problem = quad
    alpha = 3.0 / float(np.linalg.eigvalsh(spec.a).max())
    run = run_ho(
        problem,
        problem.init_lam(0),
        problem.init_w(0),
        outer_iters=2,
        inner_steps=40,
        opt_w=OptimizerState("sgd", 0.2),
        opt_lam=OptimizerState("sgd", 0.01),
        strategy=InverseStrategy.neumann(100, scale=alpha),
    )
    assert not run.failed  # divergence of the series is non-fatal
    assert any(r.diverged for r in run.records)


# ---------------------------------------------------------------------------
# accuracy comparison harness
# ---------------------------------------------------------------------------


def test_cosine_and_l2_identical_vectors():
    v = np.array([1.0, 2.0, -3.0])
    assert cosine_and_l2(v, v.copy()) == (1.0, 0.0)


def test_cosine_and_l2_zero_vector_has_no_angle():
    cos, l2 = cosine_and_l2(np.zeros(3), np.array([1.0, 0.0, 0.0]))
    assert np.isnan(cos)
    assert l2 == 1.0


def test_hypergrad_accuracy_table_layout_and_limits(quad):
    spec, problem = quad
    lam = problem.init_lam(SEED)
    strategies = [
        InverseStrategy.exact_dense(),
        InverseStrategy.neumann(1, scale=0.9 / float(np.linalg.eigvalsh(spec.a).max())),
        InverseStrategy.cg(max_iter=1),
    ]
    grid = [1, 3, spec.m]
    rows = hypergrad_accuracy(problem, lam, strategies, grid, inner_steps=200, inner_lr=0.2)
    assert len(rows) == len(strategies) * len(grid)

    by_strategy = {}
    for row in rows:
        by_strategy.setdefault(row.strategy, []).append(row)
    for row in by_strategy["exact_dense"]:
        assert row.cosine_similarity == 1.0
        assert row.l2_distance == 0.0
    neumann_l2 = [r.l2_distance for r in by_strategy["neumann"]]
    assert neumann_l2[0] >= neumann_l2[-1]
    cg_full = [r for r in by_strategy["cg"] if r.steps == spec.m][0]
    assert cg_full.cosine_similarity >= 1.0 - 1e-6
