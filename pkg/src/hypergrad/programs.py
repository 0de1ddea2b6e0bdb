"""Scalar loss programs over (hyperparameters, weights, data) and their
first- and second-order derivative operations.

A LossProgram is a builder that assembles a computation graph from a
hyperparameter node, a weight node, and a dataset.  All derivative products
below are exact (reverse-mode), never finite differences; check_grad_fd is
the independent finite-difference audit.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from . import tape
from .data import Dataset
from .errors import DimensionError
from .flat import FlatVector


class LossProgram:
    """A differentiable scalar loss with declared slot dimensions.

    build(lam_node, w_node, data, rng) must return a scalar Node.  Evaluation
    is deterministic given the inputs and the seed that feeds `rng`; the
    programs shipped here are all full-batch and ignore the rng entirely.
    """

    def __init__(
        self,
        build: Callable[[tape.Node, tape.Node, Dataset, np.random.Generator], tape.Node],
        lam_dim: int,
        w_dim: int,
        name: str = "",
    ):
        self.build = build
        self.lam_dim = int(lam_dim)
        self.w_dim = int(w_dim)
        self.name = name

    def __repr__(self):
        return f"LossProgram({self.name!r}, lam_dim={self.lam_dim}, w_dim={self.w_dim})"


def _forward(
    f: LossProgram, lam: FlatVector, w: FlatVector, data: Dataset, seed: int
) -> tuple[tape.Node, tape.Node, tape.Node]:
    if len(lam) != f.lam_dim:
        raise DimensionError(
            f"{f.name or 'loss'}: hyperparameter slot expects {f.lam_dim} entries, "
            f"got {len(lam)}"
        )
    if len(w) != f.w_dim:
        raise DimensionError(
            f"{f.name or 'loss'}: weight slot expects {f.w_dim} entries, got {len(w)}"
        )
    lam_node = tape.Node(lam.data, op="hyperparameters")
    w_node = tape.Node(w.data, op="weights")
    out = f.build(lam_node, w_node, data, np.random.default_rng(seed))
    if out.value.ndim != 0:
        raise DimensionError(
            f"{f.name or 'loss'}: program output must be scalar, got shape {out.shape}"
        )
    return lam_node, w_node, out


def evaluate(f: LossProgram, lam: FlatVector, w: FlatVector, data: Dataset, seed: int = 0) -> float:
    """Loss value as a python float."""
    _, _, out = _forward(f, lam, w, data, seed)
    return float(out.value)


def grad_w(f: LossProgram, lam: FlatVector, w: FlatVector, data: Dataset, seed: int = 0) -> FlatVector:
    """Gradient with respect to the weights, in the weight layout."""
    _, w_node, out = _forward(f, lam, w, data, seed)
    (g,) = tape.gradients(out, [w_node])
    return w.with_data(g.value)


def grad_lam(f: LossProgram, lam: FlatVector, w: FlatVector, data: Dataset, seed: int = 0) -> FlatVector:
    """Gradient with respect to the hyperparameters, in their layout."""
    lam_node, _, out = _forward(f, lam, w, data, seed)
    (g,) = tape.gradients(out, [lam_node])
    return lam.with_data(g.value)


def hvp(
    f: LossProgram,
    lam: FlatVector,
    w: FlatVector,
    data: Dataset,
    v: FlatVector,
    seed: int = 0,
) -> FlatVector:
    """Weight-Hessian-vector product: (d2 loss / dw dw) @ v, never materialized."""
    if len(v) != f.w_dim:
        raise DimensionError(f"hvp vector has {len(v)} entries, weights have {f.w_dim}")
    _, w_node, out = _forward(f, lam, w, data, seed)
    (gw,) = tape.gradients(out, [w_node])
    pairing = tape.dot(gw, tape.constant(v.data))
    (hv,) = tape.gradients(pairing, [w_node])
    return w.with_data(hv.value)


def mixed_vjp(
    f: LossProgram,
    lam: FlatVector,
    w: FlatVector,
    data: Dataset,
    v: FlatVector,
    seed: int = 0,
) -> FlatVector:
    """v-transpose times the mixed second derivative d2 loss / dw dlam.

    Returned in the hyperparameter layout: component j is
    d/dlam_j of (v . grad_w loss).
    """
    if len(v) != f.w_dim:
        raise DimensionError(
            f"mixed_vjp vector has {len(v)} entries, weights have {f.w_dim}"
        )
    lam_node, w_node, out = _forward(f, lam, w, data, seed)
    (gw,) = tape.gradients(out, [w_node])
    pairing = tape.dot(gw, tape.constant(v.data))
    (mv,) = tape.gradients(pairing, [lam_node])
    return lam.with_data(mv.value)


# ---------------------------------------------------------------------------
# finite-difference audit
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class GradCheckReport:
    """Max relative errors of each derivative product vs central differences."""

    grad_w_err: float
    grad_lam_err: float
    hvp_err: float
    mixed_err: float
    eps: float
    probes: int

    @property
    def max_err(self) -> float:
        return max(self.grad_w_err, self.grad_lam_err, self.hvp_err, self.mixed_err)


def _rel_scalar(a: float, b: float) -> float:
    return abs(a - b) / max(abs(a), abs(b), 1e-8)


def _rel_vector(a: np.ndarray, b: np.ndarray) -> float:
    scale = max(np.max(np.abs(a), initial=0.0), np.max(np.abs(b), initial=0.0), 1e-8)
    return float(np.max(np.abs(a - b), initial=0.0) / scale)


def check_grad_fd(
    f: LossProgram,
    lam: FlatVector,
    w: FlatVector,
    data: Dataset,
    eps: float = 1e-5,
    probes: int = 3,
    seed: int = 0,
) -> GradCheckReport:
    """Audit grad_w, grad_lam, hvp, and mixed_vjp against central differences.

    Probes are random unit directions.  eps must lie in (0, 1e-2].
    """
    if not 0.0 < eps <= 1e-2:
        raise DimensionError(f"eps must lie in (0, 1e-2], got {eps}")
    rng = np.random.default_rng(seed)

    def unit(n: int) -> np.ndarray:
        u = rng.standard_normal(n)
        return u / np.linalg.norm(u)

    gw = grad_w(f, lam, w, data).data
    gl = grad_lam(f, lam, w, data).data

    e_gw = e_gl = e_h = e_m = 0.0
    for _ in range(probes):
        uw = unit(len(w))
        ul = unit(len(lam)) if len(lam) else np.zeros(0)

        fd_w = (
            evaluate(f, lam, w.with_data(w.data + eps * uw), data)
            - evaluate(f, lam, w.with_data(w.data - eps * uw), data)
        ) / (2 * eps)
        e_gw = max(e_gw, _rel_scalar(fd_w, float(gw @ uw)))

        if len(lam):
            fd_l = (
                evaluate(f, lam.with_data(lam.data + eps * ul), w, data)
                - evaluate(f, lam.with_data(lam.data - eps * ul), w, data)
            ) / (2 * eps)
            e_gl = max(e_gl, _rel_scalar(fd_l, float(gl @ ul)))

        fd_h = (
            grad_w(f, lam, w.with_data(w.data + eps * uw), data).data
            - grad_w(f, lam, w.with_data(w.data - eps * uw), data).data
        ) / (2 * eps)
        e_h = max(e_h, _rel_vector(fd_h, hvp(f, lam, w, data, w.with_data(uw)).data))

        if len(lam):
            fd_m = (
                grad_lam(f, lam, w.with_data(w.data + eps * uw), data).data
                - grad_lam(f, lam, w.with_data(w.data - eps * uw), data).data
            ) / (2 * eps)
            e_m = max(
                e_m, _rel_vector(fd_m, mixed_vjp(f, lam, w, data, w.with_data(uw)).data)
            )

    return GradCheckReport(e_gw, e_gl, e_h, e_m, eps, probes)
