"""Datasets: dense feature matrices with regression or label targets."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionError, ValidationError


@dataclass(frozen=True)
class Dataset:
    """Immutable (inputs, targets) pair with a provenance note.

    inputs  : (n, d) float64
    targets : (n,) — integer class labels or float regression values
    provenance : human-readable record of where the data came from
    """

    inputs: np.ndarray
    targets: np.ndarray
    provenance: str = ""

    def __post_init__(self):
        inputs = np.ascontiguousarray(self.inputs, dtype=np.float64)
        if inputs.ndim != 2:
            raise DimensionError(f"inputs must be (n, d), got shape {inputs.shape}")
        targets = np.ascontiguousarray(self.targets)
        if targets.ndim != 1:
            raise DimensionError(f"targets must be (n,), got shape {targets.shape}")
        if inputs.shape[0] != targets.shape[0]:
            raise DimensionError(
                f"{inputs.shape[0]} input rows but {targets.shape[0]} targets"
            )
        if not np.all(np.isfinite(inputs)):
            raise ValidationError("inputs contain non-finite values")
        if np.issubdtype(targets.dtype, np.floating) and not np.all(np.isfinite(targets)):
            raise ValidationError("targets contain non-finite values")
        object.__setattr__(self, "inputs", inputs)
        object.__setattr__(self, "targets", targets)

    @property
    def n(self) -> int:
        return self.inputs.shape[0]

    @property
    def n_features(self) -> int:
        return self.inputs.shape[1]

    @property
    def is_classification(self) -> bool:
        return np.issubdtype(self.targets.dtype, np.integer)

    def one_hot(self, num_classes: int | None = None) -> np.ndarray:
        if not self.is_classification:
            raise DimensionError("one_hot requires integer class labels")
        k = int(num_classes if num_classes is not None else self.targets.max() + 1)
        out = np.zeros((self.n, k))
        out[np.arange(self.n), self.targets] = 1.0
        return out

    def float_targets(self) -> np.ndarray:
        return np.asarray(self.targets, dtype=np.float64)

    def subset(self, idx: np.ndarray, note: str = "") -> "Dataset":
        tag = f"{self.provenance}|{note}" if note else self.provenance
        return Dataset(self.inputs[idx], self.targets[idx], tag)


def empty_dataset(provenance: str = "unused") -> Dataset:
    """Placeholder for loss programs whose data slot is unused."""
    return Dataset(np.zeros((0, 0)), np.zeros(0), provenance)


def with_intercept_column(data: Dataset) -> Dataset:
    """Append a constant 1.0 feature column (intercept via the weight vector)."""
    ones = np.ones((data.n, 1))
    return Dataset(
        np.hstack([data.inputs, ones]),
        data.targets,
        f"{data.provenance}|intercept_col",
    )


def split_dataset(data: Dataset, fraction: float, seed: int) -> tuple[Dataset, Dataset]:
    """Deterministic shuffle-split; second part holds `fraction` of the rows."""
    if not 0.0 < fraction < 1.0:
        raise ValidationError(f"fraction must lie in (0, 1), got {fraction}")
    rng = np.random.default_rng(seed)
    perm = rng.permutation(data.n)
    n_second = max(1, int(round(data.n * fraction)))
    n_second = min(n_second, data.n - 1)
    second = perm[:n_second]
    first = perm[n_second:]
    return (
        data.subset(np.sort(first), f"split<{1 - fraction:g}"),
        data.subset(np.sort(second), f"split>{fraction:g}"),
    )


def concat_datasets(a: Dataset, b: Dataset) -> Dataset:
    if a.n_features != b.n_features:
        raise DimensionError("cannot concatenate datasets with different widths")
    return Dataset(
        np.vstack([a.inputs, b.inputs]),
        np.concatenate([a.targets, b.targets]),
        f"{a.provenance}+{b.provenance}",
    )
