"""Approximate inverse-Hessian-vector products for implicit differentiation.

Given the training-loss Hessian H in the weights (accessed only through
Hessian-vector products) and a vector v, every strategy here approximates
u = H^{-1} v:

* identity      -- u = v; the cheapest possible preconditioner-free guess.
* neumann       -- u = alpha * sum_{j=0}^{terms-1} (I - alpha*H)^j v, the
                   truncated geometric series for (alpha*H)^{-1} scaled back
                   by alpha.  Scaling the operator by the learning-rate-like
                   alpha is what makes the series contract.  `terms` counts
                   summands, so terms=1 gives alpha*v and, with alpha=1,
                   matches the identity strategy exactly.
* cg            -- conjugate gradients on the symmetric system H u = v.
* exact_dense   -- assemble H column by column (dimension capped) and solve.
* unrolled / truncated_unrolled -- not inverse products at all: they
                   differentiate through the optimizer instead, and are
                   rejected here (see hypergradient.unrolled_hypergradient).

Divergence of the Neumann recurrence (iterate norm growing past 10x its
starting norm, which happens whenever alpha exceeds 2 / lambda_max) is
detected and reported as a non-fatal `diverged` diagnostic.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .bilevel import BilevelProblem
from .errors import CapacityError, ConfigError, NumericError, ValidationError
from .flat import FlatVector
from .programs import hvp

DENSE_CAP_DEFAULT = 2000

_KINDS = ("identity", "neumann", "cg", "exact_dense", "unrolled", "truncated_unrolled")
_ITERATIVE = ("neumann", "unrolled", "truncated_unrolled")


@dataclass(frozen=True)
class InverseStrategy:
    """A named approximation scheme plus its knobs.

    terms    : neumann summands / unrolled optimizer steps (>= 0)
    scale    : alpha for neumann/unrolled; None defers to the caller's
               inner-loop learning rate
    tol      : cg relative-residual stopping tolerance
    max_iter : cg iteration cap
    kept     : truncated_unrolled: differentiate only the last `kept` steps
    """

    kind: str
    terms: int = 0
    scale: float | None = None
    tol: float = 1e-12
    max_iter: int = 0
    kept: int = 0

    def __post_init__(self):
        if self.kind not in _KINDS:
            raise ValidationError(f"unknown strategy kind {self.kind!r}; use one of {_KINDS}")
        if self.kind in _ITERATIVE and self.terms < 0:
            raise ValidationError(f"{self.kind} needs terms >= 0, got {self.terms}")
        if self.scale is not None and not self.scale > 0:
            raise ValidationError(f"scale must be positive, got {self.scale}")
        if self.kind == "cg":
            if not self.tol > 0:
                raise ValidationError(f"cg tol must be positive, got {self.tol}")
            if self.max_iter < 1:
                raise ValidationError(f"cg max_iter must be >= 1, got {self.max_iter}")
        if self.kind == "truncated_unrolled" and not 0 <= self.kept <= self.terms:
            raise ValidationError(
                f"truncated_unrolled needs 0 <= kept <= terms, got kept={self.kept}, "
                f"terms={self.terms}"
            )

    # -- constructors --------------------------------------------------------

    @classmethod
    def identity(cls) -> "InverseStrategy":
        return cls("identity")

    @classmethod
    def neumann(cls, terms: int, scale: float | None = None) -> "InverseStrategy":
        return cls("neumann", terms=terms, scale=scale)

    @classmethod
    def cg(cls, max_iter: int, tol: float = 1e-12) -> "InverseStrategy":
        return cls("cg", tol=tol, max_iter=max_iter)

    @classmethod
    def exact_dense(cls) -> "InverseStrategy":
        return cls("exact_dense")

    @classmethod
    def unrolled(cls, steps: int, scale: float | None = None) -> "InverseStrategy":
        return cls("unrolled", terms=steps, scale=scale)

    @classmethod
    def truncated_unrolled(
        cls, steps: int, kept: int, scale: float | None = None
    ) -> "InverseStrategy":
        return cls("truncated_unrolled", terms=steps, scale=scale, kept=kept)

    def with_default_scale(self, default: float) -> "InverseStrategy":
        if self.kind in _ITERATIVE and self.scale is None:
            return replace(self, scale=float(default))
        return self

    def label(self) -> str:
        return self.kind


def dense_hessian(
    problem: BilevelProblem, lam: FlatVector, w: FlatVector, cap: int = DENSE_CAP_DEFAULT
) -> np.ndarray:
    """Training-loss weight Hessian assembled from basis Hessian-vector
    products, symmetrized against roundoff.  Refuses dimensions above `cap`.
    """
    dim = len(w)
    if dim > cap:
        raise CapacityError(
            f"dense Hessian of dimension {dim} exceeds the cap of {cap}"
        )
    cols = np.empty((dim, dim))
    basis = w.zeros_like()
    for i in range(dim):
        e = basis.data.copy()
        e[i] = 1.0
        cols[:, i] = hvp(problem.train_loss, lam, w, problem.train_data, w.with_data(e)).data
    return 0.5 * (cols + cols.T)


def dense_mixed(
    problem: BilevelProblem, lam: FlatVector, w: FlatVector, cap: int = DENSE_CAP_DEFAULT
) -> np.ndarray:
    """Mixed second derivative d2 L_train / dw dlam as a dense (w_dim, lam_dim)
    matrix, assembled row-space-first from vector-Jacobian products.
    """
    from .programs import mixed_vjp

    dim = len(w)
    if dim > cap or len(lam) > cap:
        raise CapacityError(
            f"dense mixed block of shape ({dim}, {len(lam)}) exceeds the cap of {cap}"
        )
    rows = np.empty((dim, len(lam)))
    for i in range(dim):
        e = np.zeros(dim)
        e[i] = 1.0
        rows[i, :] = mixed_vjp(problem.train_loss, lam, w, problem.train_data, w.with_data(e)).data
    return rows


def approx_ihvp(
    strategy: InverseStrategy,
    problem: BilevelProblem,
    lam: FlatVector,
    w: FlatVector,
    v: FlatVector,
    cap: int = DENSE_CAP_DEFAULT,
    seed: int = 0,
) -> tuple[FlatVector, dict]:
    """Approximate H^{-1} v for the training-loss weight Hessian at (lam, w).

    Returns (u, diagnostics) where diagnostics records ihvp_iterations,
    ihvp_residual_norm (|H u - v|, nan if it could not be evaluated), and a
    non-fatal `diverged` flag for a non-contracting Neumann recurrence.
    """
    if strategy.kind in ("unrolled", "truncated_unrolled"):
        raise ConfigError(
            "unrolled strategies differentiate through optimization; "
            "use unrolled_hypergradient instead of approx_ihvp"
        )

    def apply_h(x: np.ndarray) -> np.ndarray:
        return hvp(problem.train_loss, lam, w, problem.train_data, w.with_data(x), seed).data

    diverged = False
    if strategy.kind == "identity":
        u = v.data.copy()
        iterations = 0

    elif strategy.kind == "neumann":
        if strategy.scale is None:
            raise ConfigError("neumann strategy needs an explicit scale here")
        alpha = strategy.scale
        v0_norm = np.linalg.norm(v.data)
        acc = np.zeros_like(v.data)
        cur = v.data.copy()
        iterations = 0
        for j in range(strategy.terms):
            if j > 0:
                cur = cur - alpha * apply_h(cur)
                if np.linalg.norm(cur) > 10.0 * v0_norm:
                    diverged = True
                    iterations = j
                    break
            acc = acc + cur
            iterations = j + 1
        u = alpha * acc

    elif strategy.kind == "cg":
        u, iterations, _ = _conjugate_gradient(
            apply_h, v.data, strategy.tol, strategy.max_iter
        )

    else:  # exact_dense
        h = dense_hessian(problem, lam, w, cap=cap)
        try:
            u = np.linalg.solve(h, v.data)
        except np.linalg.LinAlgError as err:
            raise NumericError(f"dense Hessian solve failed: {err}") from err
        iterations = len(w)

    try:
        residual = float(np.linalg.norm(apply_h(u) - v.data)) if not diverged else float("nan")
    except NumericError:
        residual = float("nan")

    diagnostics = {
        "strategy": strategy.label(),
        "ihvp_iterations": int(iterations),
        "ihvp_residual_norm": residual,
        "diverged": diverged,
    }
    return v.with_data(u), diagnostics


def _conjugate_gradient(apply_h, b: np.ndarray, tol: float, max_iter: int):
    """Plain conjugate gradients on H x = b; H accessed through products only.

    Hand-rolled rather than delegated so iteration counts and residuals are
    exactly reproducible diagnostics.  Non-convergence is not an error; the
    residual tells the story.
    """
    x = np.zeros_like(b)
    r = b.copy()
    d = r.copy()
    rs = float(r @ r)
    b_norm = max(float(np.linalg.norm(b)), 1e-300)
    iterations = 0
    for _ in range(max_iter):
        if np.sqrt(rs) / b_norm <= tol:
            break
        hd = apply_h(d)
        dhd = float(d @ hd)
        if dhd <= 0 or not np.isfinite(dhd):
            break  # curvature breakdown: H not positive definite along d
        step = rs / dhd
        x = x + step * d
        r = r - step * hd
        rs_new = float(r @ r)
        d = r + (rs_new / rs) * d
        rs = rs_new
        iterations += 1
    return x, iterations, float(np.sqrt(rs))
