"""Hypergradients: validation-loss gradients with respect to hyperparameters.

At a stationary point of the training loss, the implicit function theorem
gives the best-response Jacobian as

    dw*/dlam = -[d2 L_T / dw dw]^{-1} [d2 L_T / dw dlam]

so the total derivative of the validation loss splits into a direct term and
an indirect term routed through the weights:

    total = dL_V/dlam  +  (dL_V/dw) (dw*/dlam)
          = direct     -  mixed_vjp(L_T, approx_ihvp(strategy, dL_V/dw))

The inverse Hessian is never formed; `InverseStrategy` picks the
approximation.  `unrolled_hypergradient` is the alternative that
differentiates through an explicit SGD trajectory; started from a stationary
point, `steps` unrolled SGD steps reproduce the `terms=steps` Neumann
hypergradient exactly (the geometric series and the unrolled product-sum
collapse to the same polynomial in I - alpha*H).
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from . import tape
from .bilevel import (
    BilevelProblem,
    OptimizerState,
    fixed_point_residual,
    inner_optimize,
    newton_refine,
    optimizer_step,
)
from .errors import CapacityError, ConfigError, NumericError
from .flat import FlatVector
from .ihvp import DENSE_CAP_DEFAULT, InverseStrategy, approx_ihvp
from .programs import evaluate, grad_lam, grad_w, mixed_vjp

UNROLL_CAP_DEFAULT = 1000


@dataclass(frozen=True)
class HypergradReport:
    """Direct, indirect, and total hypergradient plus solver diagnostics.

    total is always computed as direct + indirect, so the decomposition is
    exact by construction.  diagnostics carries ihvp_iterations,
    ihvp_residual_norm, fixed_point_residual, and diverged.
    """

    direct: FlatVector
    indirect: FlatVector
    total: FlatVector
    diagnostics: dict = field(default_factory=dict)


def hypergradient(
    problem: BilevelProblem,
    lam: FlatVector,
    w: FlatVector,
    strategy: InverseStrategy,
    cap: int = DENSE_CAP_DEFAULT,
    unroll_cap: int = UNROLL_CAP_DEFAULT,
    seed: int = 0,
) -> HypergradReport:
    """Approximate d L_V / d lam at (lam, w), trusting w as near-stationary.

    Unrolled strategies are routed through unrolled_hypergradient with w as
    the starting point; all other strategies go through approx_ihvp.
    """
    direct = grad_lam(problem.val_loss, lam, w, problem.val_data, seed)
    residual = fixed_point_residual(problem, lam, w, seed)

    if strategy.kind in ("unrolled", "truncated_unrolled"):
        if strategy.scale is None:
            raise ConfigError("unrolled strategies need an explicit scale here")
        kept = strategy.kept if strategy.kind == "truncated_unrolled" else None
        total = unrolled_hypergradient(
            problem, lam, w, strategy.terms, strategy.scale, kept=kept,
            unroll_cap=unroll_cap, seed=seed,
        )
        indirect = total - direct
        diagnostics = {
            "strategy": strategy.label(),
            "ihvp_iterations": strategy.terms,
            "ihvp_residual_norm": float("nan"),
            "diverged": False,
        }
    else:
        v1 = grad_w(problem.val_loss, lam, w, problem.val_data, seed)
        u, diagnostics = approx_ihvp(strategy, problem, lam, w, v1, cap=cap, seed=seed)
        indirect = -mixed_vjp(problem.train_loss, lam, w, problem.train_data, u, seed)
        total = direct + indirect

    diagnostics = dict(diagnostics)
    diagnostics["fixed_point_residual"] = residual
    return HypergradReport(direct, indirect, total, diagnostics)


def unrolled_hypergradient(
    problem: BilevelProblem,
    lam: FlatVector,
    w0: FlatVector,
    steps: int,
    scale: float,
    kept: int | None = None,
    unroll_cap: int = UNROLL_CAP_DEFAULT,
    seed: int = 0,
) -> FlatVector:
    """Exact d/dlam of L_V(lam, w_steps(lam)) where w_steps is produced by
    `steps` SGD updates (learning rate `scale`) from the lam-independent w0.

    kept (truncated variant): differentiate only through the last `kept`
    updates; the earlier ones run outside the graph.  Memory grows with the
    differentiated suffix, so it is capped.
    """
    if steps < 0:
        raise ConfigError(f"steps must be >= 0, got {steps}")
    kept = steps if kept is None else kept
    if not 0 <= kept <= steps:
        raise ConfigError(f"kept must lie in [0, steps], got kept={kept}, steps={steps}")
    if kept > unroll_cap:
        raise CapacityError(
            f"unrolling {kept} steps through the graph exceeds the cap of {unroll_cap}"
        )

    rng = np.random.default_rng(seed)
    plain = steps - kept
    w_arr = w0.data
    if plain:
        # run the un-differentiated prefix outside the graph
        for _ in range(plain):
            lam_n = tape.Node(lam.data, op="hyperparameters")
            w_n = tape.Node(w_arr, op="weights")
            out = problem.train_loss.build(lam_n, w_n, problem.train_data, rng)
            (g,) = tape.gradients(out, [w_n])
            w_arr = w_arr - scale * g.value

    lam_node = tape.Node(lam.data, op="hyperparameters")
    w_node: tape.Node = tape.constant(w_arr)
    for _ in range(kept):
        out = problem.train_loss.build(lam_node, w_node, problem.train_data, rng)
        (g,) = tape.gradients(out, [w_node])
        w_node = tape.subtract(w_node, tape.multiply(scale, g))

    val = problem.val_loss.build(lam_node, w_node, problem.val_data, rng)
    if val.value.ndim != 0:
        raise ConfigError("validation loss must be scalar")
    (d_lam,) = tape.gradients(val, [lam_node])
    return lam.with_data(d_lam.value)


# ---------------------------------------------------------------------------
# the outer loop
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class RunRecord:
    """Metrics for one outer iteration.

    Losses: train is the inner objective (penalty included), val is the
    outer objective, test is the prediction loss from the problem's scorer
    (falls back to the validation objective when no scorer exists).
    Accuracies are nan where undefined.  wall_ms is in-memory only and never
    persisted, so written records stay byte-identical across reruns.
    """

    iteration: int
    train_loss: float
    val_loss: float
    test_loss: float
    train_acc: float
    val_acc: float
    test_acc: float
    fixed_point_residual: float
    hypergrad_norm: float
    wall_ms: float
    diverged: bool


@dataclass(frozen=True)
class HoRun:
    """Outcome of run_ho: per-iteration records plus the final iterates."""

    records: list[RunRecord]
    lam: FlatVector
    w: FlatVector
    opt_w: OptimizerState
    opt_lam: OptimizerState
    failed: bool = False


def _score_split(problem, lam, w, dataset, loss_fallback):
    if problem.scorer is not None and dataset.n > 0:
        return problem.scorer(lam, w, dataset)
    return loss_fallback, float("nan")


def run_ho(
    problem: BilevelProblem,
    lam0: FlatVector,
    w0: FlatVector,
    outer_iters: int,
    inner_steps: int,
    opt_w: OptimizerState,
    opt_lam: OptimizerState,
    strategy: InverseStrategy,
    seed: int = 0,
    cap: int = DENSE_CAP_DEFAULT,
    unroll_cap: int = UNROLL_CAP_DEFAULT,
) -> HoRun:
    """Alternate `inner_steps` weight updates with one hyperparameter update.

    The weights warm-start across outer iterations (both the iterate and the
    optimizer moments).  A numeric failure truncates the run: the final
    record is marked diverged and the last finite iterates are returned.
    outer_iters = 0 returns no records and the inputs unchanged.
    """
    strategy = strategy.with_default_scale(opt_w.lr)
    lam, w = lam0, w0
    records: list[RunRecord] = []
    for it in range(outer_iters):
        t0 = time.perf_counter()
        try:
            w, _, opt_w = inner_optimize(problem, lam, w, inner_steps, opt_w, seed)
            report = hypergradient(
                problem, lam, w, strategy, cap=cap, unroll_cap=unroll_cap, seed=seed
            )
            new_lam, opt_lam = optimizer_step(opt_lam, lam, report.total)

            train_loss = evaluate(problem.train_loss, lam, w, problem.train_data, seed)
            val_loss = evaluate(problem.val_loss, lam, w, problem.val_data, seed)
            _, train_acc = _score_split(problem, lam, w, problem.train_data, train_loss)
            _, val_acc = _score_split(problem, lam, w, problem.val_data, val_loss)
            test_loss, test_acc = _score_split(problem, lam, w, problem.test_data, val_loss)

            records.append(
                RunRecord(
                    iteration=it,
                    train_loss=train_loss,
                    val_loss=val_loss,
                    test_loss=test_loss,
                    train_acc=train_acc,
                    val_acc=val_acc,
                    test_acc=test_acc,
                    fixed_point_residual=report.diagnostics["fixed_point_residual"],
                    hypergrad_norm=report.total.norm(),
                    wall_ms=(time.perf_counter() - t0) * 1e3,
                    diverged=bool(report.diagnostics.get("diverged", False)),
                )
            )
            lam = new_lam
        except NumericError:
            records.append(
                RunRecord(
                    iteration=it,
                    train_loss=float("nan"),
                    val_loss=float("nan"),
                    test_loss=float("nan"),
                    train_acc=float("nan"),
                    val_acc=float("nan"),
                    test_acc=float("nan"),
                    fixed_point_residual=float("nan"),
                    hypergrad_norm=float("nan"),
                    wall_ms=(time.perf_counter() - t0) * 1e3,
                    diverged=True,
                )
            )
            return HoRun(records, lam, w, opt_w, opt_lam, failed=True)
    return HoRun(records, lam, w, opt_w, opt_lam)


# ---------------------------------------------------------------------------
# hypergradient accuracy against the exact inverse
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class AccuracyRow:
    strategy: str
    steps: int
    cosine_similarity: float
    l2_distance: float


def cosine_and_l2(approx: np.ndarray, exact: np.ndarray) -> tuple[float, float]:
    """Cosine similarity and euclidean distance; identical vectors score
    exactly (1.0, 0.0)."""
    diff = float(np.linalg.norm(approx - exact))
    if diff == 0.0:
        return 1.0, 0.0
    na, ne = np.linalg.norm(approx), np.linalg.norm(exact)
    if na == 0.0 or ne == 0.0:
        return float("nan"), diff
    return float(approx @ exact / (na * ne)), diff


def hypergrad_accuracy(
    problem: BilevelProblem,
    lam: FlatVector,
    strategies: list[InverseStrategy],
    step_grid: list[int],
    w0: FlatVector | None = None,
    inner_steps: int = 500,
    inner_lr: float | None = None,
    polish: bool = True,
    cap: int = DENSE_CAP_DEFAULT,
    seed: int = 0,
) -> list[AccuracyRow]:
    """Compare strategy hypergradients to the exact dense-solve hypergradient.

    The weights are first driven to (near-)stationarity: `inner_steps` of
    SGD, optionally polished with Newton steps so the implicit-differentiation
    premise holds tightly.  Iterative strategies sweep `step_grid`;
    single-shot strategies (identity, exact) contribute one row per grid
    point so downstream tables stay rectangular.
    """
    w = w0 if w0 is not None else problem.zeros_w()
    lr = inner_lr if inner_lr is not None else 0.05
    opt = OptimizerState("sgd", lr)
    w, _, _ = inner_optimize(problem, lam, w, inner_steps, opt, seed)
    if polish:
        w = newton_refine(problem, lam, w, steps=3, cap=cap)

    exact = hypergradient(problem, lam, w, InverseStrategy.exact_dense(), cap=cap, seed=seed)
    rows: list[AccuracyRow] = []
    for strat in strategies:
        for steps in step_grid:
            sized = _resize_strategy(strat, steps)
            report = hypergradient(problem, lam, w, sized, cap=cap, seed=seed)
            cos, l2 = cosine_and_l2(report.total.data, exact.total.data)
            rows.append(AccuracyRow(strat.label(), steps, cos, l2))
    return rows


def _resize_strategy(strat: InverseStrategy, steps: int) -> InverseStrategy:
    from dataclasses import replace

    if strat.kind == "neumann" or strat.kind == "unrolled":
        return replace(strat, terms=steps)
    if strat.kind == "truncated_unrolled":
        return replace(strat, terms=max(steps, strat.kept))
    if strat.kind == "cg":
        return replace(strat, max_iter=steps)
    return strat
