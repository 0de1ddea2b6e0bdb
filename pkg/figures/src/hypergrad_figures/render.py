"""The three renderers: grouped line panels, matrix heatmap sets, and the
distilled-point scatter.

Each one reads CSVs through the schema-checked readers, draws with the Agg
backend at a fixed DPI, and writes a PNG with pinned metadata, so identical
inputs produce identical bytes.  Inputs are never modified.  Anything that
computes (averaging, smoothing, fitting) is deliberately out of scope: the
tables arrive plot-ready.
"""

import re
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .errors import FigureError
from .tables import column_floats, read_matrix, read_table, require_columns

KINDS = ("lines", "matrix_heatmap", "point_grid")

_PALETTE = plt.get_cmap("tab10").colors
_METADATA = {"Software": "hypergrad-fig"}


@dataclass(frozen=True)
class FigureSpec:
    """What to draw: input CSVs, figure kind, output path, axis dressing."""

    inputs: tuple[Path, ...]
    kind: str
    out: Path
    title: str = ""
    x_label: str = ""
    y_label: str = ""
    log_x: bool = False
    log_y: bool = False
    dpi: int = 150

    def __post_init__(self):
        if self.kind not in KINDS:
            raise FigureError(f"unknown figure kind {self.kind!r}; use one of {KINDS}")
        if not self.inputs:
            raise FigureError("at least one input CSV is required")
        object.__setattr__(self, "inputs", tuple(Path(p) for p in self.inputs))
        object.__setattr__(self, "out", Path(self.out))
        for p in self.inputs:
            if not p.exists():
                raise FigureError(f"input file {p} does not exist")


def render(spec: FigureSpec) -> Path:
    """Dispatch on spec.kind; returns the written path."""
    if spec.kind == "lines":
        return render_lines(spec)
    if spec.kind == "matrix_heatmap":
        return render_matrix(spec)
    return render_point_grid(spec)


def _save(fig, spec: FigureSpec) -> Path:
    spec.out.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(spec.out, dpi=spec.dpi, metadata=dict(_METADATA))
    plt.close(fig)
    return spec.out


def _color_for(groups: list[str]) -> dict[str, tuple]:
    """Stable group -> color assignment in first-appearance order."""
    return {g: _PALETTE[i % len(_PALETTE)] for i, g in enumerate(groups)}


def _first_appearance(values) -> list[str]:
    seen: dict[str, None] = {}
    for v in values:
        seen.setdefault(v, None)
    return list(seen)


def _apply_axes(ax, spec: FigureSpec, x_label: str, y_label: str):
    ax.set_xlabel(spec.x_label or x_label)
    ax.set_ylabel(spec.y_label or y_label)
    if spec.log_x:
        ax.set_xscale("log")
    if spec.log_y:
        ax.set_yscale("log")
    ax.grid(True, alpha=0.3)


# ---------------------------------------------------------------------------
# lines
# ---------------------------------------------------------------------------

# each known table layout is identified by the columns that are present and
# then held to its full column list, so a mangled file fails naming exactly
# the column it lost rather than falling through to a wrong plot
_MARKERS = {
    "strategy_accuracy": {
        "optimization_iter", "strategy", "inversion_steps",
        "cosine_similarity", "l2_distance",
    },
    "split_fractions": {"validation_fraction", "regime", "retrained"},
    "tuning_arms": {"arm", "val_error", "test_error"},
}


def render_lines(spec: FigureSpec) -> Path:
    if len(spec.inputs) != 1:
        raise FigureError(f"lines takes exactly one input CSV, got {len(spec.inputs)}")
    path = spec.inputs[0]
    header, rows = read_table(path)

    hits = {name: len(markers & set(header)) for name, markers in _MARKERS.items()}
    best = max(hits.values())
    if best >= 2:
        layout = max(hits, key=lambda k: hits[k])
        if layout == "strategy_accuracy":
            fig = _lines_accuracy(path, header, rows, spec)
        elif layout == "split_fractions":
            fig = _lines_split(path, header, rows, spec)
        else:
            fig = _lines_arms(path, header, rows, spec)
    elif "iteration" in header:
        fig = _lines_trajectory(path, header, rows, spec)
    else:
        raise FigureError(
            f"{path} matches no known line layout: expected the strategy-accuracy "
            f"columns {sorted(_MARKERS['strategy_accuracy'])}, the split-study "
            f"columns {sorted(_MARKERS['split_fractions'])}, the tuning-arms "
            f"columns {sorted(_MARKERS['tuning_arms'])}, or a trajectory with an "
            f"'iteration' column; found {header}"
        )
    return _save(fig, spec)


def _lines_accuracy(path, header, rows, spec: FigureSpec):
    require_columns(path, header, sorted(_MARKERS["strategy_accuracy"]))
    final = max(int(r["optimization_iter"]) for r in rows)
    block = [r for r in rows if int(r["optimization_iter"]) == final]
    strategies = _first_appearance(r["strategy"] for r in block)
    colors = _color_for(strategies)

    fig, (ax_cos, ax_l2) = plt.subplots(1, 2, figsize=(9.6, 4.0))
    for strategy in strategies:
        grp = sorted(
            (r for r in block if r["strategy"] == strategy),
            key=lambda r: int(r["inversion_steps"]),
        )
        steps = [int(r["inversion_steps"]) for r in grp]
        cos = [float(r["cosine_similarity"]) for r in grp]
        l2 = [float(r["l2_distance"]) for r in grp]
        ax_cos.plot(steps, cos, marker="o", color=colors[strategy], label=strategy)
        ax_l2.plot(steps, l2, marker="o", color=colors[strategy], label=strategy)
    _apply_axes(ax_cos, spec, "inversion steps", "cosine similarity")
    _apply_axes(ax_l2, spec, "inversion steps", "l2 distance")
    ax_cos.legend()
    fig.suptitle(spec.title or f"approximation quality at iteration {final}")
    fig.tight_layout()
    return fig


def _lines_split(path, header, rows, spec: FigureSpec):
    y = "test_accuracy_mean" if "test_accuracy_mean" in header else "test_accuracy"
    require_columns(path, header, sorted(_MARKERS["split_fractions"]) + [y])
    panels = _first_appearance(r["retrained"] for r in rows)
    regimes = _first_appearance(r["regime"] for r in rows)
    seeds = _first_appearance(r["seed"] for r in rows) if "seed" in header else [None]
    colors = _color_for(regimes)

    fig, axes = plt.subplots(1, len(panels), figsize=(4.8 * len(panels), 4.0),
                             sharey=True, squeeze=False)
    for ax, retrained in zip(axes[0], panels):
        for regime in regimes:
            for i, seed in enumerate(seeds):
                grp = [
                    r for r in rows
                    if r["retrained"] == retrained and r["regime"] == regime
                    and (seed is None or r["seed"] == seed)
                ]
                grp.sort(key=lambda r: float(r["validation_fraction"]))
                if not grp:
                    continue
                ax.plot(
                    [float(r["validation_fraction"]) for r in grp],
                    [float(r[y]) for r in grp],
                    marker="o",
                    color=colors[regime],
                    alpha=1.0 if seed is None else 0.6,
                    label=regime if i == 0 else "_nolegend_",
                )
        _apply_axes(ax, spec, "validation fraction", y.replace("_", " "))
        ax.set_title(f"retrained = {retrained}")
    axes[0][0].legend()
    fig.suptitle(spec.title or "test accuracy vs validation fraction")
    fig.tight_layout()
    return fig


def _lines_arms(path, header, rows, spec: FigureSpec):
    require_columns(path, header, ["iteration"] + sorted(_MARKERS["tuning_arms"]))
    arms = _first_appearance(r["arm"] for r in rows)
    colors = _color_for(arms)

    fig, axes = plt.subplots(1, 2, figsize=(9.6, 4.0))
    for ax, metric in zip(axes, ("val_error", "test_error")):
        for arm in arms:
            grp = sorted(
                (r for r in rows if r["arm"] == arm), key=lambda r: int(r["iteration"])
            )
            ax.plot(
                [int(r["iteration"]) for r in grp],
                [float(r[metric]) for r in grp],
                color=colors[arm],
                label=arm,
            )
        _apply_axes(ax, spec, "outer iteration", metric.replace("_", " "))
    axes[0].legend()
    fig.suptitle(spec.title or "tuned vs frozen hyperparameters")
    fig.tight_layout()
    return fig


def _lines_trajectory(path, header, rows, spec: FigureSpec):
    def numeric(col: str) -> bool:
        try:
            float(rows[0][col])
            return True
        except ValueError:
            return False

    group_cols = [c for c in header if c != "iteration" and not numeric(c)]
    y_cols = [c for c in header if c != "iteration" and numeric(c)]
    if not y_cols:
        raise FigureError(f"{path}: no numeric columns to plot against 'iteration'")
    group = group_cols[0] if group_cols else None
    groups = _first_appearance(r[group] for r in rows) if group else [None]

    fig, ax = plt.subplots(figsize=(6.4, 4.2))
    for g in groups:
        grp = [r for r in rows if group is None or r[group] == g]
        grp.sort(key=lambda r: int(r["iteration"]))
        xs = [int(r["iteration"]) for r in grp]
        for col in y_cols:
            label = col if g is None else f"{g}: {col}"
            ax.plot(xs, column_floats(path, grp, col), label=label)
    _apply_axes(ax, spec, "iteration", "value")
    ax.legend(fontsize=8)
    fig.suptitle(spec.title or Path(path).stem)
    fig.tight_layout()
    return fig


# ---------------------------------------------------------------------------
# matrix heatmaps
# ---------------------------------------------------------------------------


def render_matrix(spec: FigureSpec) -> Path:
    mats = []
    for path in spec.inputs:
        mat = read_matrix(path)
        r, c = mat.shape if mat.ndim == 2 else (mat.shape[0], 1)
        if mat.ndim != 2 or r != c:
            raise FigureError(f"{path}: matrix is {r}x{c}, not square")
        mats.append(mat)
    first = mats[0].shape
    for path, mat in zip(spec.inputs, mats):
        if mat.shape != first:
            raise FigureError(
                f"matrix sizes differ across the set: {spec.inputs[0]} is "
                f"{first[0]}x{first[1]} but {path} is {mat.shape[0]}x{mat.shape[1]}"
            )

    # one color scale for the whole set, symmetric about zero, so panels
    # are comparable at a glance
    vmax = max(float(np.max(np.abs(m))) for m in mats) or 1.0
    n = len(mats)
    fig, axes = plt.subplots(1, n, figsize=(3.6 * n + 1.2, 3.8), squeeze=False)
    for ax, path, mat in zip(axes[0], spec.inputs, mats):
        im = ax.imshow(mat, cmap="RdBu_r", vmin=-vmax, vmax=vmax)
        name = path.name
        for suffix in (".csv", ".mat"):
            name = name.removesuffix(suffix)
        ax.set_title(name, fontsize=10)
        ax.set_xticks([])
        ax.set_yticks([])
    fig.colorbar(im, ax=[a for a in axes[0]], shrink=0.85)
    if spec.title:
        fig.suptitle(spec.title)
    return _save(fig, spec)


# ---------------------------------------------------------------------------
# point grid
# ---------------------------------------------------------------------------

_FEATURE = re.compile(r"^f(\d+)$")


def _feature_columns(path, header) -> list[str]:
    feats = sorted(
        (c for c in header if _FEATURE.match(c)),
        key=lambda c: int(_FEATURE.match(c).group(1)),
    )
    if len(feats) < 2:
        raise FigureError(
            f"{path} needs at least two feature columns (f0, f1, ...), found {feats}"
        )
    if len(feats) > 2:
        warnings.warn(
            f"{path} has {len(feats)} feature columns; projecting onto the first two",
            stacklevel=2,
        )
    return feats[:2]


def render_point_grid(spec: FigureSpec) -> Path:
    if len(spec.inputs) not in (1, 2):
        raise FigureError(
            "point_grid takes the distilled-points CSV plus an optional "
            f"background dataset CSV, got {len(spec.inputs)} inputs"
        )
    pts_path = spec.inputs[0]
    header, rows = read_table(pts_path)
    require_columns(pts_path, header, ["label"])
    fx, fy = _feature_columns(pts_path, header)
    pts = np.column_stack([column_floats(pts_path, rows, fx),
                           column_floats(pts_path, rows, fy)])
    labels = [int(r["label"]) for r in rows]

    fig, ax = plt.subplots(figsize=(5.6, 5.2))

    if len(spec.inputs) == 2:
        bg_path = spec.inputs[1]
        bg_header, bg_rows = read_table(bg_path)
        require_columns(bg_path, bg_header, ["target"])
        bx, by = _feature_columns(bg_path, bg_header)
        bg = np.column_stack([column_floats(bg_path, bg_rows, bx),
                              column_floats(bg_path, bg_rows, by)])
        bg_labels = np.array([int(float(r["target"])) for r in bg_rows])
        for c in sorted(set(bg_labels)):
            mask = bg_labels == c
            ax.scatter(bg[mask, 0], bg[mask, 1], s=14, alpha=0.35,
                       color=_PALETTE[c % len(_PALETTE)], linewidths=0)

    for c in sorted(set(labels)):
        sel = np.array([l == c for l in labels])
        ax.scatter(pts[sel, 0], pts[sel, 1], marker="*", s=340,
                   color=_PALETTE[c % len(_PALETTE)], edgecolors="black",
                   linewidths=1.2, label=f"class {c}", zorder=3)

    _apply_axes(ax, spec, fx, fy)
    ax.legend()
    ax.set_aspect("equal", adjustable="datalim")
    fig.suptitle(spec.title or "distilled points")
    fig.tight_layout()
    return _save(fig, spec)
