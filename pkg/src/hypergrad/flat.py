"""Flat float64 vectors with named, non-overlapping segments.

Hyperparameters and weights travel through the package as single flat
vectors; segments record which stretch of the vector belongs to which
logical block (a weight matrix, a bias, a per-parameter decay rate).
Segments are metadata only: they must tile [0, len) exactly, and all
arithmetic happens on the underlying array.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .errors import DimensionError, ValidationError


@dataclass(frozen=True)
class Segment:
    name: str
    offset: int
    length: int


def _check_segments(segments: Sequence[Segment], total: int) -> None:
    pos = 0
    seen = set()
    for seg in segments:
        if seg.name in seen:
            raise DimensionError(f"duplicate segment name {seg.name!r}")
        seen.add(seg.name)
        if seg.offset != pos or seg.length < 0:
            raise DimensionError(
                f"segment {seg.name!r} at offset {seg.offset} breaks the tiling "
                f"(expected offset {pos})"
            )
        pos += seg.length
    if pos != total:
        raise DimensionError(
            f"segments cover {pos} entries but the vector has {total}"
        )


class FlatVector:
    """A 1-D float64 array plus a named-segment layout."""

    __slots__ = ("data", "segments")

    def __init__(self, data, segments: Sequence[Segment] | None = None):
        arr = np.ascontiguousarray(data, dtype=np.float64)
        if arr.ndim != 1:
            raise DimensionError(f"FlatVector data must be 1-D, got shape {arr.shape}")
        if segments is None:
            segments = (Segment("all", 0, arr.shape[0]),)
        segments = tuple(segments)
        _check_segments(segments, arr.shape[0])
        self.data = arr
        self.segments = segments

    # -- construction ------------------------------------------------------

    @classmethod
    def from_arrays(cls, named: Iterable[tuple[str, np.ndarray]]) -> "FlatVector":
        """Concatenate (name, array) pairs; each array is flattened in C order."""
        parts, segs, pos = [], [], 0
        for name, arr in named:
            flat = np.asarray(arr, dtype=np.float64).reshape(-1)
            parts.append(flat)
            segs.append(Segment(name, pos, flat.shape[0]))
            pos += flat.shape[0]
        data = np.concatenate(parts) if parts else np.zeros(0)
        return cls(data, segs)

    @classmethod
    def single(cls, name: str, arr) -> "FlatVector":
        flat = np.asarray(arr, dtype=np.float64).reshape(-1)
        return cls(flat, (Segment(name, 0, flat.shape[0]),))

    def with_data(self, data) -> "FlatVector":
        """Same layout, new contents."""
        arr = np.asarray(data, dtype=np.float64).reshape(-1)
        if arr.shape[0] != self.data.shape[0]:
            raise DimensionError(
                f"replacement data has {arr.shape[0]} entries, layout expects "
                f"{self.data.shape[0]}"
            )
        return FlatVector(arr, self.segments)

    def zeros_like(self) -> "FlatVector":
        return FlatVector(np.zeros_like(self.data), self.segments)

    def copy(self) -> "FlatVector":
        return FlatVector(self.data.copy(), self.segments)

    # -- access ------------------------------------------------------------

    def segment(self, name: str) -> np.ndarray:
        """Copy of one named slice; mutating it never touches the vector."""
        for seg in self.segments:
            if seg.name == name:
                return self.data[seg.offset : seg.offset + seg.length].copy()
        raise ValidationError(f"no segment named {name!r}")

    def segment_names(self) -> tuple[str, ...]:
        return tuple(seg.name for seg in self.segments)

    def same_layout(self, other: "FlatVector") -> bool:
        return self.segments == other.segments

    def is_finite(self) -> bool:
        return bool(np.all(np.isfinite(self.data)))

    def norm(self) -> float:
        return float(np.linalg.norm(self.data))

    def __len__(self) -> int:
        return self.data.shape[0]

    def __repr__(self) -> str:
        names = ",".join(f"{s.name}[{s.length}]" for s in self.segments)
        return f"FlatVector(len={len(self)}, segments={names})"

    # -- arithmetic (layout-preserving) -------------------------------------

    def _binary(self, other, fn) -> "FlatVector":
        if isinstance(other, FlatVector):
            if not self.same_layout(other):
                raise ValidationError(
                    f"segment layouts differ: {self.segment_names()} vs "
                    f"{other.segment_names()}"
                )
            return FlatVector(fn(self.data, other.data), self.segments)
        return FlatVector(fn(self.data, np.asarray(other, dtype=np.float64)), self.segments)

    def __add__(self, other):
        return self._binary(other, np.add)

    def __sub__(self, other):
        return self._binary(other, np.subtract)

    def __mul__(self, scalar):
        return FlatVector(self.data * float(scalar), self.segments)

    __rmul__ = __mul__

    def __neg__(self):
        return FlatVector(-self.data, self.segments)
