"""Bilevel problem container and first-order optimizers for the inner loop.

The inner problem is: given hyperparameters lam, drive the training loss to a
stationary point in the weights.  Everything here treats optimizer state as a
value: each step returns fresh state, so interleaving and resuming runs is
exact (N steps then M steps is indistinguishable from N+M steps).
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np

from .data import Dataset
from .errors import DimensionError, NumericError, ValidationError
from .flat import FlatVector, Segment
from .programs import LossProgram, evaluate, grad_w, hvp


@dataclass(frozen=True)
class BilevelProblem:
    """Training loss, validation loss, and their data splits.

    The hyperparameter and weight layouts are separate flat vectors (no
    shared slots by construction).  `scorer`, when present, maps
    (lam, w, dataset) to (prediction_loss, accuracy) with accuracy = nan for
    problems where it is undefined.  `init_lam` / `init_w` produce seeded
    starting points.
    """

    train_loss: LossProgram
    val_loss: LossProgram
    train_data: Dataset
    val_data: Dataset
    test_data: Dataset
    lam_segments: tuple[Segment, ...]
    w_segments: tuple[Segment, ...]
    scorer: Callable[[FlatVector, FlatVector, Dataset], tuple[float, float]] | None = None
    init_lam: Callable[[int], FlatVector] | None = None
    init_w: Callable[[int], FlatVector] | None = None
    name: str = ""

    def __post_init__(self):
        lam_dim = sum(s.length for s in self.lam_segments)
        w_dim = sum(s.length for s in self.w_segments)
        for prog in (self.train_loss, self.val_loss):
            if prog.lam_dim != lam_dim or prog.w_dim != w_dim:
                raise DimensionError(
                    f"program {prog.name!r} expects (lam={prog.lam_dim}, w={prog.w_dim}) "
                    f"but problem layouts are (lam={lam_dim}, w={w_dim})"
                )

    @property
    def lam_dim(self) -> int:
        return sum(s.length for s in self.lam_segments)

    @property
    def w_dim(self) -> int:
        return sum(s.length for s in self.w_segments)

    def zeros_lam(self) -> FlatVector:
        return FlatVector(np.zeros(self.lam_dim), self.lam_segments)

    def zeros_w(self) -> FlatVector:
        return FlatVector(np.zeros(self.w_dim), self.w_segments)


# ---------------------------------------------------------------------------
# optimizers
# ---------------------------------------------------------------------------

_RULES = ("sgd", "adam", "rmsprop")


@dataclass(frozen=True)
class OptimizerState:
    """Immutable optimizer state; moments are lazily allocated on first step.

    Defaults: adam (beta1=0.9, beta2=0.999, eps=1e-8),
    rmsprop (decay=0.99, eps=1e-8).
    """

    rule: str
    lr: float
    step: int = 0
    m: np.ndarray | None = None
    v: np.ndarray | None = None
    beta1: float = 0.9
    beta2: float = 0.999
    decay: float = 0.99
    eps: float = 1e-8

    def __post_init__(self):
        if self.rule not in _RULES:
            raise ValidationError(f"unknown optimizer rule {self.rule!r}; use one of {_RULES}")
        if not self.lr > 0.0:
            raise ValidationError(f"learning rate must be positive, got {self.lr}")


def optimizer_step(
    opt: OptimizerState, x: FlatVector, g: FlatVector
) -> tuple[FlatVector, OptimizerState]:
    """One update of x against gradient g; returns (new_x, new_state)."""
    if len(x) != len(g):
        raise DimensionError(f"parameter has {len(x)} entries, gradient has {len(g)}")
    t = opt.step + 1
    if opt.rule == "sgd":
        return x.with_data(x.data - opt.lr * g.data), replace(opt, step=t)

    m = opt.m if opt.m is not None else np.zeros(len(x))
    v = opt.v if opt.v is not None else np.zeros(len(x))
    if len(m) != len(x) or len(v) != len(x):
        raise DimensionError("optimizer moments do not match the parameter size")

    if opt.rule == "adam":
        m = opt.beta1 * m + (1.0 - opt.beta1) * g.data
        v = opt.beta2 * v + (1.0 - opt.beta2) * g.data**2
        m_hat = m / (1.0 - opt.beta1**t)
        v_hat = v / (1.0 - opt.beta2**t)
        new_x = x.data - opt.lr * m_hat / (np.sqrt(v_hat) + opt.eps)
        return x.with_data(new_x), replace(opt, step=t, m=m, v=v)

    # rmsprop
    v = opt.decay * v + (1.0 - opt.decay) * g.data**2
    new_x = x.data - opt.lr * g.data / (np.sqrt(v) + opt.eps)
    return x.with_data(new_x), replace(opt, step=t, v=v)


# ---------------------------------------------------------------------------
# inner loop
# ---------------------------------------------------------------------------


def inner_optimize(
    problem: BilevelProblem,
    lam: FlatVector,
    w0: FlatVector,
    steps: int,
    opt: OptimizerState,
    seed: int = 0,
) -> tuple[FlatVector, list[float], OptimizerState]:
    """Run `steps` optimizer updates on the training loss at fixed lam.

    Returns (final weights, per-step training-loss trace, advanced optimizer
    state).  The trace records the loss after each step.  Passing the
    returned state back in continues the run exactly (warm start).
    """
    if steps < 1:
        raise ValidationError(f"inner_optimize needs steps >= 1, got {steps}")
    w = w0
    trace: list[float] = []
    for k in range(steps):
        try:
            g = grad_w(problem.train_loss, lam, w, problem.train_data, seed)
            w, opt = optimizer_step(opt, w, g)
            trace.append(evaluate(problem.train_loss, lam, w, problem.train_data, seed))
        except NumericError as err:
            raise NumericError(
                f"inner optimization failed at step {k}: {err}",
                node_id=err.node_id,
                op=err.op,
                step=k,
            ) from err
    return w, trace, opt


def fixed_point_residual(
    problem: BilevelProblem, lam: FlatVector, w: FlatVector, seed: int = 0
) -> float:
    """2-norm of the training-loss gradient in w: how stationary w is.

    Implicit-differentiation hypergradients are certified only insofar as
    this residual is small.
    """
    return grad_w(problem.train_loss, lam, w, problem.train_data, seed).norm()


def newton_refine(
    problem: BilevelProblem,
    lam: FlatVector,
    w: FlatVector,
    steps: int = 3,
    cap: int = 2000,
    ridge: float = 0.0,
) -> FlatVector:
    """Polish w toward a stationary point with dense Newton steps.

    Diagnostic helper for desk-scale problems: assembles the weight Hessian
    column by column (dimension capped) and solves.  `ridge` stabilizes
    near-singular Hessians.
    """
    from .ihvp import dense_hessian  # local import to avoid a cycle

    for _ in range(steps):
        g = grad_w(problem.train_loss, lam, w, problem.train_data)
        h = dense_hessian(problem, lam, w, cap=cap)
        if ridge:
            h = h + ridge * np.eye(len(w))
        try:
            delta = np.linalg.solve(h, g.data)
        except np.linalg.LinAlgError as err:
            raise NumericError(f"newton_refine: Hessian solve failed: {err}") from err
        w = w.with_data(w.data - delta)
    return w
