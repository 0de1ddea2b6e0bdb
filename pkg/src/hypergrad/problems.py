"""The problem zoo: bilevel problems with known structure for testing and
desk-scale experiments.

* Quadratic bilevel problems have closed-form best responses and closed-form
  hypergradients -- the ground truth everything else is audited against.
* Penalized prediction models (linear, logistic, small MLPs) expose one decay
  hyperparameter per weight (or one global one); the penalty is
  0.5 * sum_j exp(lam_j) * w_j^2, so rates stay positive and unconstrained.
* Dataset distillation makes the training inputs themselves the
  hyperparameters, with fixed one-hot labels and a logistic inner model.
"""

from __future__ import annotations

import csv as _csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import tape
from .bilevel import BilevelProblem
from .data import Dataset, empty_dataset, with_intercept_column
from .errors import CsvParseError, DimensionError, ValidationError
from .flat import FlatVector, Segment


# ---------------------------------------------------------------------------
# quadratic bilevel problems (closed-form ground truth)
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class QuadraticBilevelSpec:
    """L_T(lam, w) = 0.5 w'Aw + w'(B lam + c),  L_V(w) = 0.5 |w - t|^2.

    A must be symmetric positive definite, so the best response is
    w*(lam) = -A^{-1}(B lam + c) and dw*/dlam = -A^{-1}B.
    """

    a: np.ndarray
    b: np.ndarray
    c: np.ndarray
    t: np.ndarray

    def __post_init__(self):
        a = np.asarray(self.a, dtype=np.float64)
        b = np.asarray(self.b, dtype=np.float64)
        c = np.asarray(self.c, dtype=np.float64)
        t = np.asarray(self.t, dtype=np.float64)
        m = a.shape[0]
        if a.shape != (m, m):
            raise DimensionError(f"A must be square, got shape {a.shape}")
        if not np.allclose(a, a.T, atol=1e-12):
            raise ValidationError("A must be symmetric")
        try:
            np.linalg.cholesky(a)
        except np.linalg.LinAlgError:
            raise ValidationError("A must be positive definite") from None
        if b.ndim != 2 or b.shape[0] != m:
            raise DimensionError(f"B must be (m, n) with m={m}, got shape {b.shape}")
        if c.shape != (m,) or t.shape != (m,):
            raise DimensionError("c and t must be length-m vectors")
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "c", c)
        object.__setattr__(self, "t", t)

    @property
    def m(self) -> int:
        return self.a.shape[0]

    @property
    def n(self) -> int:
        return self.b.shape[1]


def make_quadratic(spec: QuadraticBilevelSpec) -> BilevelProblem:
    a_c, b_c, c_c, t_c = (tape.constant(x) for x in (spec.a, spec.b, spec.c, spec.t))

    def train(lam, w, data, rng):
        quad = tape.multiply(0.5, tape.dot(w, tape.matmul(a_c, w)))
        lin = tape.dot(w, tape.add(tape.matmul(b_c, lam), c_c))
        return tape.add(quad, lin)

    def val(lam, w, data, rng):
        d = tape.subtract(w, t_c)
        return tape.multiply(0.5, tape.sum_squares(d))

    from .programs import LossProgram

    train_prog = LossProgram(train, spec.n, spec.m, name="quadratic_train")
    val_prog = LossProgram(val, spec.n, spec.m, name="quadratic_val")
    placeholder = empty_dataset("synthetic:quadratic")
    return BilevelProblem(
        train_loss=train_prog,
        val_loss=val_prog,
        train_data=placeholder,
        val_data=placeholder,
        test_data=placeholder,
        lam_segments=(Segment("hyper", 0, spec.n),),
        w_segments=(Segment("weights", 0, spec.m),),
        init_lam=lambda seed: FlatVector(
            np.random.default_rng(seed).standard_normal(spec.n),
            (Segment("hyper", 0, spec.n),),
        ),
        init_w=lambda seed: FlatVector(np.zeros(spec.m), (Segment("weights", 0, spec.m),)),
        name="quadratic",
    )


def exact_quadratic_hypergradient(
    spec: QuadraticBilevelSpec, lam: FlatVector
) -> tuple[FlatVector, FlatVector]:
    """Closed-form (w*, d L_V*/d lam): the oracle for everything else."""
    w_star = -np.linalg.solve(spec.a, spec.b @ lam.data + spec.c)
    jac = -np.linalg.solve(spec.a, spec.b)  # dw*/dlam
    hg = jac.T @ (w_star - spec.t)
    return (
        FlatVector(w_star, (Segment("weights", 0, spec.m),)),
        lam.with_data(hg),
    )


def quadratic_lambda_star(spec: QuadraticBilevelSpec) -> np.ndarray:
    """argmin_lam of L_V(w*(lam)): least squares on the response map."""
    k = np.linalg.solve(spec.a, spec.b)
    b0 = np.linalg.solve(spec.a, spec.c) + spec.t
    sol, *_ = np.linalg.lstsq(k, -b0, rcond=None)
    return sol


def random_quadratic(
    m: int, n: int, seed: int = 0, eig_range: tuple[float, float] = (0.5, 5.0)
) -> QuadraticBilevelSpec:
    """Seeded random instance with a controlled SPD spectrum."""
    rng = np.random.default_rng(seed)
    q, _ = np.linalg.qr(rng.standard_normal((m, m)))
    eigs = rng.uniform(eig_range[0], eig_range[1], size=m)
    a = q @ np.diag(eigs) @ q.T
    a = 0.5 * (a + a.T)
    b = rng.standard_normal((m, n))
    c = rng.standard_normal(m)
    t = rng.standard_normal(m)
    return QuadraticBilevelSpec(a, b, c, t)


# ---------------------------------------------------------------------------
# penalized prediction models
# ---------------------------------------------------------------------------

_MODELS = ("linear", "logistic", "mlp")
_ACTIVATIONS = ("tanh", "sigmoid")  # smooth only: second derivatives exist
_SCOPES = ("per_param", "global")


@dataclass(frozen=True)
class PenalizedModelSpec:
    """A prediction model whose every weight carries an exp(lam) decay.

    decay_scope 'per_param' gives one hyperparameter per weight entry;
    'global' gives a single shared rate.  init_decay seeds lam at
    log(init_decay).
    """

    model: str
    hidden: tuple[int, ...] = ()
    activation: str = "tanh"
    decay_scope: str = "per_param"
    intercept: bool = True
    init_decay: float = 1e-2
    init_w_scale: float = 0.1

    def __post_init__(self):
        if self.model not in _MODELS:
            raise ValidationError(f"unknown model {self.model!r}; use one of {_MODELS}")
        if self.activation not in _ACTIVATIONS:
            raise ValidationError(
                f"activation must be smooth ({_ACTIVATIONS}), got {self.activation!r}"
            )
        if self.decay_scope not in _SCOPES:
            raise ValidationError(f"decay_scope must be one of {_SCOPES}")
        if self.model != "mlp" and self.hidden:
            raise ValidationError(f"hidden sizes only apply to mlp, got {self.hidden}")
        if not self.init_decay > 0:
            raise ValidationError("init_decay must be positive")


def _layer_sizes(spec: PenalizedModelSpec, d: int, out_dim: int) -> list[int]:
    if spec.model == "mlp":
        return [d, *spec.hidden, out_dim]
    return [d, out_dim]


def _weight_segments(sizes: list[int], with_bias: bool) -> tuple[Segment, ...]:
    segs, pos = [], 0
    for i, (fan_in, fan_out) in enumerate(zip(sizes[:-1], sizes[1:]), start=1):
        segs.append(Segment(f"w{i}", pos, fan_in * fan_out))
        pos += fan_in * fan_out
        if with_bias:
            segs.append(Segment(f"b{i}", pos, fan_out))
            pos += fan_out
    return tuple(segs)


def _model_logits(spec, sizes, with_bias, w_node, x_node):
    """Graph forward pass: returns the (n, out_dim) pre-activation output."""
    act = tape.tanh if spec.activation == "tanh" else tape.sigmoid
    h = x_node
    pos = 0
    n_layers = len(sizes) - 1
    for i in range(n_layers):
        fan_in, fan_out = sizes[i], sizes[i + 1]
        w_mat = tape.reshape(
            tape.slice1d(w_node, pos, pos + fan_in * fan_out), (fan_in, fan_out)
        )
        pos += fan_in * fan_out
        h = tape.matmul(h, w_mat)
        if with_bias:
            b = tape.slice1d(w_node, pos, pos + fan_out)
            pos += fan_out
            h = tape.add(h, b)
        if i < n_layers - 1:
            h = act(h)
    return h


def _numpy_logits(spec, sizes, with_bias, w_arr, x):
    act = np.tanh if spec.activation == "tanh" else lambda z: 1.0 / (1.0 + np.exp(-z))
    h = x
    pos = 0
    n_layers = len(sizes) - 1
    for i in range(n_layers):
        fan_in, fan_out = sizes[i], sizes[i + 1]
        w_mat = w_arr[pos : pos + fan_in * fan_out].reshape(fan_in, fan_out)
        pos += fan_in * fan_out
        h = h @ w_mat
        if with_bias:
            h = h + w_arr[pos : pos + fan_out]
            pos += fan_out
        if i < n_layers - 1:
            h = act(h)
    return h


def _penalty(lam_node, w_node, scope: str):
    if scope == "per_param":
        return tape.multiply(
            0.5, tape.reduce_sum(tape.multiply(tape.exp(lam_node), tape.multiply(w_node, w_node)))
        )
    rate = tape.exp(tape.reduce_sum(lam_node))  # single entry
    return tape.multiply(0.5, tape.multiply(rate, tape.sum_squares(w_node)))


def _classification_scores(logits: np.ndarray, labels: np.ndarray) -> tuple[float, float]:
    shift = logits.max(axis=1, keepdims=True)
    lse = np.log(np.exp(logits - shift).sum(axis=1)) + shift[:, 0]
    picked = logits[np.arange(len(labels)), labels]
    loss = float(np.mean(lse - picked))
    acc = float(np.mean(logits.argmax(axis=1) == labels))
    return loss, acc


def make_penalized(
    spec: PenalizedModelSpec, train: Dataset, val: Dataset, test: Dataset
) -> BilevelProblem:
    """Bilevel problem: inner fits the model on train with exp(lam) decays,
    outer is the plain prediction loss on val (no penalty: pure response)."""
    for ds, tag in ((train, "train"), (val, "val"), (test, "test")):
        if ds.n == 0:
            raise ValidationError(f"{tag} dataset is empty")
    if spec.intercept:
        train, val, test = (with_intercept_column(d) for d in (train, val, test))

    classification = train.is_classification
    if spec.model == "linear" and classification:
        raise ValidationError("linear model expects regression targets")
    if spec.model == "logistic" and not classification:
        raise ValidationError("logistic model expects integer class labels")

    d = train.n_features
    k = int(train.targets.max()) + 1 if classification else 1
    out_dim = k if classification else 1
    sizes = _layer_sizes(spec, d, out_dim)
    with_bias = spec.model == "mlp"  # first-layer intercept comes from the column
    w_segs = _weight_segments(sizes, with_bias)
    w_dim = sum(s.length for s in w_segs)

    if spec.decay_scope == "per_param":
        lam_segs = tuple(Segment(f"decay_{s.name}", s.offset, s.length) for s in w_segs)
        lam_dim = w_dim
    else:
        lam_segs = (Segment("decay", 0, 1),)
        lam_dim = 1

    def data_loss(w_node, data: Dataset):
        if data.n_features != d:
            note = " (intercept column included)" if spec.intercept else ""
            raise DimensionError(
                f"dataset has {data.n_features} features, model expects {d}{note}"
            )
        x_node = tape.constant(data.inputs)
        logits = _model_logits(spec, sizes, with_bias, w_node, x_node)
        if classification:
            return tape.softmax_cross_entropy(logits, tape.constant(data.one_hot(k)))
        pred = tape.reshape(logits, (data.n,))
        return tape.squared_error(pred, tape.constant(data.float_targets()))

    def train_loss(lam, w, data, rng):
        return tape.add(data_loss(w, data), _penalty(lam, w, spec.decay_scope))

    def val_loss(lam, w, data, rng):
        return data_loss(w, data)

    from .programs import LossProgram

    train_prog = LossProgram(train_loss, lam_dim, w_dim, name=f"{spec.model}_train")
    val_prog = LossProgram(val_loss, lam_dim, w_dim, name=f"{spec.model}_val")

    def scorer(lam, w, dataset: Dataset) -> tuple[float, float]:
        logits = _numpy_logits(spec, sizes, with_bias, w.data, dataset.inputs)
        if classification:
            return _classification_scores(logits, dataset.targets)
        pred = logits[:, 0]
        resid = pred - dataset.float_targets()
        return float(0.5 * np.mean(resid**2)), float("nan")

    def init_lam(seed: int) -> FlatVector:
        return FlatVector(np.full(lam_dim, np.log(spec.init_decay)), lam_segs)

    def init_w(seed: int) -> FlatVector:
        if spec.model == "mlp":
            rng = np.random.default_rng(seed)
            parts = []
            for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
                parts.append(
                    rng.standard_normal(fan_in * fan_out) * spec.init_w_scale / np.sqrt(fan_in)
                )
                parts.append(np.zeros(fan_out))
            return FlatVector(np.concatenate(parts), w_segs)
        return FlatVector(np.zeros(w_dim), w_segs)

    return BilevelProblem(
        train_loss=train_prog,
        val_loss=val_prog,
        train_data=train,
        val_data=val,
        test_data=test,
        lam_segments=lam_segs,
        w_segments=w_segs,
        scorer=scorer,
        init_lam=init_lam,
        init_w=init_w,
        name=f"penalized_{spec.model}_{spec.decay_scope}",
    )


# ---------------------------------------------------------------------------
# dataset distillation
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class DistillationSpec:
    """Learn `per_class` synthetic inputs per class: the hyperparameters ARE
    the distilled features; their one-hot labels are fixed.

    inner_decay is a fixed (non-hyper) ridge keeping the tiny inner problem
    strongly convex, so the inverse in the implicit gradient exists.
    """

    classes: int
    per_class: int = 1
    dim: int = 2
    inner_decay: float = 1e-2
    init_spread: float = 0.5

    def __post_init__(self):
        if self.classes < 2 or self.per_class < 1 or self.dim < 1:
            raise ValidationError("distillation needs classes >= 2, per_class >= 1, dim >= 1")
        if not self.inner_decay > 0:
            raise ValidationError("inner_decay must be positive")

    @property
    def n_points(self) -> int:
        return self.classes * self.per_class

    def point_labels(self) -> np.ndarray:
        return np.repeat(np.arange(self.classes), self.per_class)


def make_distillation(
    spec: DistillationSpec, labeled: Dataset, test: Dataset
) -> BilevelProblem:
    """All labeled data sit in the validation set; the inner model trains on
    the distilled points alone."""
    if not labeled.is_classification:
        raise ValidationError("distillation needs labeled classification data")
    if labeled.n_features != spec.dim:
        raise DimensionError(
            f"labeled data has {labeled.n_features} features, spec.dim is {spec.dim}"
        )
    k = spec.classes
    if int(labeled.targets.max()) + 1 > k:
        raise ValidationError("labeled data contains classes beyond spec.classes")

    p = spec.n_points
    lam_dim = p * spec.dim
    w_dim = spec.dim * k
    lam_segs = (Segment("distilled", 0, lam_dim),)
    w_segs = (Segment("coef", 0, w_dim),)

    point_onehot = np.zeros((p, k))
    point_onehot[np.arange(p), spec.point_labels()] = 1.0

    def train_loss(lam, w, data, rng):
        # the data slot is unused by design: the training set IS lam
        x = tape.reshape(lam, (p, spec.dim))
        w_mat = tape.reshape(w, (spec.dim, k))
        ce = tape.softmax_cross_entropy(tape.matmul(x, w_mat), tape.constant(point_onehot))
        ridge = tape.multiply(0.5 * spec.inner_decay, tape.sum_squares(w))
        return tape.add(ce, ridge)

    def val_loss(lam, w, data, rng):
        w_mat = tape.reshape(w, (spec.dim, k))
        logits = tape.matmul(tape.constant(data.inputs), w_mat)
        return tape.softmax_cross_entropy(logits, tape.constant(data.one_hot(k)))

    from .programs import LossProgram

    train_prog = LossProgram(train_loss, lam_dim, w_dim, name="distill_train")
    val_prog = LossProgram(val_loss, lam_dim, w_dim, name="distill_val")

    def scorer(lam, w, dataset: Dataset) -> tuple[float, float]:
        logits = dataset.inputs @ w.data.reshape(spec.dim, k)
        return _classification_scores(logits, dataset.targets)

    def init_lam(seed: int) -> FlatVector:
        rng = np.random.default_rng(seed)
        return FlatVector(spec.init_spread * rng.standard_normal(lam_dim), lam_segs)

    def init_w(seed: int) -> FlatVector:
        return FlatVector(np.zeros(w_dim), w_segs)

    return BilevelProblem(
        train_loss=train_prog,
        val_loss=val_prog,
        train_data=empty_dataset("distilled(hyperparameters)"),
        val_data=labeled,
        test_data=test,
        lam_segments=lam_segs,
        w_segments=w_segs,
        scorer=scorer,
        init_lam=init_lam,
        init_w=init_w,
        name="distillation",
    )


def distilled_points(spec: DistillationSpec, lam: FlatVector) -> tuple[np.ndarray, np.ndarray]:
    """(features, labels) view of the distilled hyperparameters."""
    return lam.data.reshape(spec.n_points, spec.dim), spec.point_labels()


# ---------------------------------------------------------------------------
# data generators and CSV interchange
# ---------------------------------------------------------------------------


def gen_blobs(
    classes: int,
    per_class: int,
    dim: int = 2,
    spread: float = 1.0,
    seed: int = 0,
    radius: float = 3.0,
    label_noise: float = 0.0,
    noise_scale: float = 1.0,
) -> Dataset:
    """Balanced gaussian blobs; class means sit on a circle in the first two
    feature dimensions.  label_noise flips that fraction of labels to a
    uniformly random other class.  noise_scale multiplies the spread of the
    non-signal dimensions (index >= 2), turning them into high-variance
    nuisance features when > 1."""
    if classes < 2 or per_class < 1 or dim < 1:
        raise ValidationError("gen_blobs needs classes >= 2, per_class >= 1, dim >= 1")
    if not 0.0 <= label_noise < 1.0:
        raise ValidationError("label_noise must lie in [0, 1)")
    if not noise_scale > 0.0:
        raise ValidationError("noise_scale must be positive")
    rng = np.random.default_rng(seed)
    means = np.zeros((classes, dim))
    angles = 2.0 * np.pi * np.arange(classes) / classes
    means[:, 0] = radius * np.cos(angles)
    if dim > 1:
        means[:, 1] = radius * np.sin(angles)
    labels = np.repeat(np.arange(classes), per_class)
    scales = np.full(dim, spread)
    scales[2:] *= noise_scale
    x = means[labels] + scales * rng.standard_normal((classes * per_class, dim))
    if label_noise > 0.0:
        n = len(labels)
        n_flip = int(round(label_noise * n))
        flip_idx = rng.choice(n, size=n_flip, replace=False)
        shifts = rng.integers(1, classes, size=n_flip)
        labels = labels.copy()
        labels[flip_idx] = (labels[flip_idx] + shifts) % classes
    return Dataset(
        x,
        labels.astype(np.int64),
        provenance=(
            f"blobs(classes={classes},per_class={per_class},dim={dim},"
            f"spread={spread},seed={seed},radius={radius},label_noise={label_noise},"
            f"noise_scale={noise_scale})"
        ),
    )


def gen_regression(n: int = 506, dim: int = 13, noise: float = 0.1, seed: int = 0) -> Dataset:
    """Synthetic dense regression shaped like the classic 506 x 13 table."""
    rng = np.random.default_rng(seed)
    x = rng.standard_normal((n, dim))
    w_true = rng.standard_normal(dim)
    y = x @ w_true + noise * rng.standard_normal(n)
    return Dataset(x, y, provenance=f"regression(n={n},dim={dim},noise={noise},seed={seed})")


def load_csv(path, target_col: str | int | None = None, kind: str = "auto") -> Dataset:
    """Read a dataset from CSV: UTF-8, a header row, numeric cells, one
    target column (default: the last).  kind: 'auto' treats an all-integral
    target column as class labels, 'label'/'value' force it.
    """
    if kind not in ("auto", "label", "value"):
        raise ValidationError(f"kind must be auto|label|value, got {kind!r}")
    path = Path(path)
    with open(path, newline="", encoding="utf-8") as fh:
        lines = [(i + 1, row) for i, row in enumerate(_csv.reader(fh))]
    rows = [(no, row) for no, row in lines if row and not row[0].startswith("#")]
    if not rows:
        raise CsvParseError(f"{path}: no header row", line=1)
    header_no, header = rows[0]
    if len(header) < 2:
        raise CsvParseError(f"{path}: need at least one feature and a target", line=header_no)
    if target_col is None:
        target_idx = len(header) - 1
    elif isinstance(target_col, int):
        target_idx = target_col
        if not 0 <= target_idx < len(header):
            raise CsvParseError(f"{path}: target column index {target_col} out of range")
    else:
        if target_col not in header:
            raise CsvParseError(f"{path}: no column named {target_col!r}")
        target_idx = header.index(target_col)

    feats, targets = [], []
    for no, row in rows[1:]:
        if len(row) != len(header):
            raise CsvParseError(
                f"{path}: row has {len(row)} cells, header has {len(header)}", line=no
            )
        try:
            vals = [float(cell) for cell in row]
        except ValueError as err:
            raise CsvParseError(f"{path}: {err}", line=no) from None
        targets.append(vals.pop(target_idx))
        feats.append(vals)
    if not feats:
        raise CsvParseError(f"{path}: no data rows", line=header_no)
    x = np.asarray(feats)
    y = np.asarray(targets)
    as_labels = kind == "label" or (kind == "auto" and np.all(y == np.round(y)))
    if as_labels:
        y = y.astype(np.int64)
    return Dataset(x, y, provenance=f"csv:{path.name}")


def save_csv(dataset: Dataset, path) -> None:
    """Write a dataset in the load_csv format (feature columns, last = target)."""
    path = Path(path)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = _csv.writer(fh)
        writer.writerow([f"f{i}" for i in range(dataset.n_features)] + ["target"])
        labels = dataset.is_classification
        for xi, yi in zip(dataset.inputs, dataset.targets):
            row = [format(v, ".17g") for v in xi]
            row.append(str(int(yi)) if labels else format(float(yi), ".17g"))
            writer.writerow(row)


# ---------------------------------------------------------------------------
# the zoo
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ZooEntry:
    name: str
    problem: BilevelProblem
    lam0: FlatVector
    w0: FlatVector
    family: str  # 'quadratic' or 'nonlinear': picks audit tolerances


def zoo(seed: int = 0) -> list[ZooEntry]:
    """One representative of every supported problem shape, seeded."""
    entries: list[ZooEntry] = []

    qspec = random_quadratic(6, 3, seed=seed)
    qp = make_quadratic(qspec)
    entries.append(ZooEntry("quadratic", qp, qp.init_lam(seed), qp.init_w(seed), "quadratic"))

    reg = gen_regression(n=80, dim=5, noise=0.2, seed=seed)
    tr, rest = _split3(reg, seed)
    lin_spec = PenalizedModelSpec(model="linear", decay_scope="global")
    lp = make_penalized(lin_spec, tr, rest[0], rest[1])
    entries.append(ZooEntry("penalized_linear_global", lp, lp.init_lam(seed), lp.init_w(seed), "nonlinear"))

    lin_pp = PenalizedModelSpec(model="linear", decay_scope="per_param")
    lpp = make_penalized(lin_pp, tr, rest[0], rest[1])
    entries.append(ZooEntry("penalized_linear_per_param", lpp, lpp.init_lam(seed), lpp.init_w(seed), "nonlinear"))

    blobs = gen_blobs(3, 12, dim=4, spread=0.8, seed=seed)
    btr, brest = _split3(blobs, seed + 1)
    log_spec = PenalizedModelSpec(model="logistic", decay_scope="per_param")
    lg = make_penalized(log_spec, btr, brest[0], brest[1])
    entries.append(ZooEntry("penalized_logistic_per_param", lg, lg.init_lam(seed), lg.init_w(seed), "nonlinear"))

    mlp_spec = PenalizedModelSpec(model="mlp", hidden=(4,), activation="tanh", decay_scope="per_param")
    mp = make_penalized(mlp_spec, tr, rest[0], rest[1])
    entries.append(ZooEntry("penalized_mlp_tanh", mp, mp.init_lam(seed), mp.init_w(seed + 3), "nonlinear"))

    dspec = DistillationSpec(classes=3, per_class=1, dim=2)
    labeled = gen_blobs(3, 10, dim=2, spread=0.6, seed=seed + 2)
    dtest = gen_blobs(3, 10, dim=2, spread=0.6, seed=seed + 3)
    dp = make_distillation(dspec, labeled, dtest)
    entries.append(ZooEntry("distillation", dp, dp.init_lam(seed), dp.init_w(seed), "nonlinear"))

    return entries


def _split3(data: Dataset, seed: int) -> tuple[Dataset, tuple[Dataset, Dataset]]:
    from .data import split_dataset

    train, other = split_dataset(data, 0.5, seed)
    val, test = split_dataset(other, 0.5, seed + 1)
    return train, (val, test)
