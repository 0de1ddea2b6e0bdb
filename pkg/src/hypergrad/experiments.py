"""Config-driven experiment commands emitting versioned CSV files.

Config format (UTF-8 text):
  * one `key = value` pair per line; `#` starts a comment; blank lines ignored
  * keys are dotted and lowercase; the prefix before the first dot names the
    block it configures (problem.*, optimizer.*, strategy.*, loop.*, ...)
  * `experiment` is required and picks the command; every command has its own
    set of recognized keys and rejects anything else by name
  * list values are space separated (`seeds = 0 1 2`)

CSV format: first line is the literal comment `# schema=v1`, then a header
row, then data rows.  Floats are written with 17 significant digits so they
round-trip bit-identically; reruns with the same config and seeds produce
byte-identical files (wall-clock timings are deliberately never persisted).
Multi-seed commands also write a `*_summary.csv` aggregating mean and
population standard deviation across seeds.

The HYPERGRAD_THREADS environment variable caps how many seeds execute in
parallel (default 1); outputs are merged in seed order either way.
"""

from __future__ import annotations

import csv as _csv
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .bilevel import OptimizerState, inner_optimize, optimizer_step
from .data import concat_datasets, split_dataset
from .errors import CapacityError, ConfigError
from .hypergradient import RunRecord, cosine_and_l2, hypergradient, run_ho
from .ihvp import InverseStrategy, dense_hessian
from .problems import (
    DistillationSpec,
    PenalizedModelSpec,
    distilled_points,
    gen_blobs,
    gen_regression,
    load_csv,
    make_distillation,
    make_penalized,
    make_quadratic,
    random_quadratic,
)
from .programs import grad_lam, grad_w, mixed_vjp

SCHEMA_LINE = "# schema=v1"

COMMANDS = ("accuracy", "hessian-viz", "overfit-val", "distill", "split-study", "run")

RECORD_COLUMNS = (
    "iteration",
    "train_loss",
    "val_loss",
    "test_loss",
    "train_acc",
    "val_acc",
    "test_acc",
    "fixed_point_residual",
    "hypergrad_norm",
    "diverged",
)


# ---------------------------------------------------------------------------
# CSV primitives
# ---------------------------------------------------------------------------


def fmt_value(v) -> str:
    if isinstance(v, bool):
        return "1" if v else "0"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return format(float(v), ".17g")
    return str(v)


def write_table(path, header, rows) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        fh.write(SCHEMA_LINE + "\n")
        writer = _csv.writer(fh)
        writer.writerow(header)
        for row in rows:
            writer.writerow([fmt_value(v) for v in row])
    return path


def write_matrix(path, mat: np.ndarray) -> Path:
    mat = np.asarray(mat, dtype=np.float64)
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        fh.write(SCHEMA_LINE + "\n")
        writer = _csv.writer(fh)
        for row in mat:
            writer.writerow([format(float(v), ".17g") for v in row])
    return path


def read_table(path) -> tuple[list[str], list[dict[str, str]]]:
    """Read a schema-v1 CSV back: (header, rows as dicts of strings)."""
    with open(path, newline="", encoding="utf-8") as fh:
        lines = [row for row in _csv.reader(fh) if row and not row[0].startswith("#")]
    if not lines:
        return [], []
    header = lines[0]
    return header, [dict(zip(header, row)) for row in lines[1:]]


def write_records(records: list[RunRecord], path) -> Path:
    """Persist run records.  Wall-clock is intentionally omitted so files are
    byte-identical across reruns."""
    rows = [
        (
            r.iteration,
            r.train_loss,
            r.val_loss,
            r.test_loss,
            r.train_acc,
            r.val_acc,
            r.test_acc,
            r.fixed_point_residual,
            r.hypergrad_norm,
            r.diverged,
        )
        for r in records
    ]
    return write_table(path, RECORD_COLUMNS, rows)


def summarize(rows, key_cols: list[str], value_cols: list[str]) -> tuple[list[str], list[list]]:
    """Mean and population std (ddof=0) of value columns, grouped by key
    columns; group order follows first appearance."""
    groups: dict[tuple, list[dict]] = {}
    order: list[tuple] = []
    for row in rows:
        key = tuple(row[k] for k in key_cols)
        if key not in groups:
            groups[key] = []
            order.append(key)
        groups[key].append(row)
    header = list(key_cols)
    for col in value_cols:
        header += [f"{col}_mean", f"{col}_std"]
    out = []
    for key in order:
        line: list = list(key)
        for col in value_cols:
            vals = np.asarray([float(r[col]) for r in groups[key]])
            line += [float(np.mean(vals)), float(np.std(vals))]
        out.append(line)
    return header, out


# ---------------------------------------------------------------------------
# config parsing
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class StrategyConfig:
    kind: str = "neumann"
    terms: int = 5
    alpha: float | None = None  # None: fall back to the weight learning rate
    auto_alpha: bool = False  # spectral choice 0.9 / lambda_max where supported
    tol: float = 1e-12
    max_iter: int = 50
    kept: int = 0

    def build(self, alpha: float | None = None) -> InverseStrategy:
        a = alpha if alpha is not None else self.alpha
        if self.kind == "identity":
            return InverseStrategy.identity()
        if self.kind == "neumann":
            return InverseStrategy.neumann(self.terms, a)
        if self.kind == "cg":
            return InverseStrategy.cg(self.max_iter, self.tol)
        if self.kind == "exact_dense":
            return InverseStrategy.exact_dense()
        if self.kind == "unrolled":
            return InverseStrategy.unrolled(self.terms, a)
        if self.kind == "truncated_unrolled":
            return InverseStrategy.truncated_unrolled(self.terms, self.kept, a)
        raise ConfigError(f"unknown strategy kind {self.kind!r}")


@dataclass(frozen=True)
class ExperimentConfig:
    kind: str
    seeds: tuple[int, ...]
    out_dir: Path | None
    opt_w_rule: str
    opt_w_lr: float
    opt_lam_rule: str
    opt_lam_lr: float
    outer_iters: int
    inner_steps: int
    strategy: StrategyConfig
    dense_cap: int
    unroll_cap: int
    extra: dict

    def opt_w(self) -> OptimizerState:
        return OptimizerState(self.opt_w_rule, self.opt_w_lr)

    def opt_lam(self) -> OptimizerState:
        return OptimizerState(self.opt_lam_rule, self.opt_lam_lr)

    def resolved_out(self) -> Path:
        if self.out_dir is None:
            raise ConfigError("missing required key `out` (or pass --out)")
        return Path(self.out_dir)


def _parse_scalar(key, raw, kind):
    try:
        if kind == "int":
            return int(raw)
        if kind == "float":
            return float(raw)
        if kind == "bool":
            if raw.lower() in ("true", "1", "yes"):
                return True
            if raw.lower() in ("false", "0", "no"):
                return False
            raise ValueError(raw)
        if kind == "ints":
            return tuple(int(tok) for tok in raw.split())
        if kind == "floats":
            return tuple(float(tok) for tok in raw.split())
        if kind == "strs":
            return tuple(raw.split())
        return raw  # str
    except ValueError:
        raise ConfigError(f"config key {key!r}: cannot parse {raw!r} as {kind}") from None


# every command accepts these
_COMMON_KEYS: dict[str, tuple[str, object]] = {
    "experiment": ("str", None),
    "seeds": ("ints", (0,)),
    "out": ("str", None),
    "optimizer.weights.rule": ("str", "adam"),
    "optimizer.weights.lr": ("float", 1e-4),
    "optimizer.hyper.rule": ("str", "rmsprop"),
    "optimizer.hyper.lr": ("float", 1e-2),
    "loop.outer_iters": ("int", 100),
    "loop.inner_steps": ("int", 10),
    "strategy.kind": ("str", "neumann"),
    "strategy.terms": ("int", 5),
    "strategy.alpha": ("str", ""),  # empty: weight lr; 'auto': spectral; else float
    "strategy.tol": ("float", 1e-12),
    "strategy.max_iter": ("int", 50),
    "strategy.kept": ("int", 0),
    "caps.dense": ("int", 2000),
    "caps.unroll": ("int", 1000),
}

_KIND_KEYS: dict[str, dict[str, tuple[str, object]]] = {
    "accuracy": {
        "accuracy.n": ("int", 506),
        "accuracy.dim": ("int", 13),
        "accuracy.noise": ("float", 0.1),
        "accuracy.data_seed": ("int", 0),
        "accuracy.val_frac": ("float", 0.2),
        "accuracy.strategies": ("strs", ("neumann", "cg", "identity", "exact_dense")),
        "accuracy.step_grid": ("ints", (1, 2, 5, 10, 14, 20, 50)),
        "accuracy.fixed_steps": ("int", 20),
        "accuracy.record_every": ("int", 5),
    },
    "hessian-viz": {
        "hessian.n": ("int", 506),
        "hessian.dim": ("int", 13),
        "hessian.noise": ("float", 0.1),
        "hessian.data_seed": ("int", 0),
        "hessian.hidden": ("int", 4),
        "hessian.decay": ("float", 0.1),
        "hessian.train_steps": ("int", 1500),
        "hessian.terms": ("ints", (1, 5)),
    },
    "overfit-val": {
        "overfit.dim": ("int", 64),
        "overfit.train_n": ("int", 50),
        "overfit.val_n": ("int", 50),
        "overfit.test_n": ("int", 1000),
        "overfit.radius": ("float", 1.4),
        "overfit.spread": ("float", 1.0),
        "overfit.val_label_noise": ("float", 0.4),
        "overfit.data_seed": ("int", 0),
        "overfit.init_decay": ("float", 0.01),
    },
    "distill": {
        "distill.classes": ("int", 3),
        "distill.per_class": ("int", 1),
        "distill.dim": ("int", 2),
        "distill.labeled_per_class": ("int", 50),
        "distill.test_per_class": ("int", 100),
        "distill.spread": ("float", 0.6),
        "distill.radius": ("float", 3.0),
        "distill.data_seed": ("int", 0),
        "distill.inner_decay": ("float", 0.01),
        "distill.init_spread": ("float", 0.5),
    },
    "split-study": {
        "split.classes": ("int", 2),
        "split.pool_per_class": ("int", 30),
        "split.test_per_class": ("int", 200),
        "split.dim": ("int", 12),
        "split.spread": ("float", 1.0),
        "split.radius": ("float", 1.5),
        "split.label_noise": ("float", 0.2),
        "split.noise_scale": ("float", 1.0),
        "split.data_seed": ("int", 0),
        "split.fractions": ("floats", (0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9)),
        "split.regimes": ("strs", ("global", "per_param")),
        "split.retrain_steps": ("int", 0),  # 0: outer_iters * inner_steps
        "split.init_decay": ("float", 0.01),
        "split.intercept": ("bool", True),
    },
    "run": {
        "problem.kind": ("str", "quadratic"),
        "problem.m": ("int", 6),
        "problem.n": ("int", 3),
        "problem.gen_seed": ("int", 0),
        "problem.model": ("str", "logistic"),
        "problem.hidden": ("ints", ()),
        "problem.activation": ("str", "tanh"),
        "problem.decay_scope": ("str", "per_param"),
        "problem.intercept": ("bool", True),
        "problem.init_decay": ("float", 0.01),
        "problem.data": ("str", "blobs"),
        "problem.csv_path": ("str", ""),
        "problem.target_col": ("str", ""),
        "problem.classes": ("int", 3),
        "problem.per_class": ("int", 20),
        "problem.dim": ("int", 2),
        "problem.spread": ("float", 0.8),
        "problem.radius": ("float", 3.0),
        "problem.label_noise": ("float", 0.0),
        "problem.n_samples": ("int", 200),
        "problem.noise": ("float", 0.1),
        "problem.val_frac": ("float", 0.2),
        "problem.test_frac": ("float", 0.2),
        "problem.data_seed": ("int", 0),
    },
}


def parse_config(path) -> ExperimentConfig:
    """Parse and validate an experiment config file.

    Unknown keys are rejected by name; `experiment` is required.
    """
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file {path} does not exist")
    raw: dict[str, str] = {}
    for lineno, line in enumerate(path.read_text(encoding="utf-8").splitlines(), start=1):
        text = line.split("#", 1)[0].strip()
        if not text:
            continue
        if "=" not in text:
            raise ConfigError(f"{path}:{lineno}: expected `key = value`, got {line!r}")
        key, _, value = text.partition("=")
        key, value = key.strip(), value.strip()
        if key in raw:
            raise ConfigError(f"{path}:{lineno}: duplicate key {key!r}")
        raw[key] = value

    if "experiment" not in raw:
        raise ConfigError("missing required key `experiment`")
    kind = raw.pop("experiment")
    if kind not in COMMANDS:
        raise ConfigError(f"unknown experiment {kind!r}; use one of {COMMANDS}")

    table = dict(_COMMON_KEYS)
    table.pop("experiment")
    table.update(_KIND_KEYS[kind])

    values: dict[str, object] = {k: default for k, (_, default) in table.items()}
    for key, rawval in raw.items():
        if key not in table:
            raise ConfigError(f"unknown config key {key!r} for experiment {kind!r}")
        values[key] = _parse_scalar(key, rawval, table[key][0])

    seeds = tuple(values["seeds"])
    if not seeds:
        raise ConfigError("seeds must be non-empty")
    if values["loop.outer_iters"] < 0 or values["loop.inner_steps"] < 1:
        raise ConfigError("loop.outer_iters must be >= 0 and loop.inner_steps >= 1")

    alpha_raw = str(values["strategy.alpha"]).strip()
    auto_alpha = alpha_raw == "auto"
    alpha = None
    if alpha_raw and not auto_alpha:
        alpha = _parse_scalar("strategy.alpha", alpha_raw, "float")
        if not alpha > 0:
            raise ConfigError("strategy.alpha must be positive")

    strategy = StrategyConfig(
        kind=str(values["strategy.kind"]),
        terms=int(values["strategy.terms"]),
        alpha=alpha,
        auto_alpha=auto_alpha,
        tol=float(values["strategy.tol"]),
        max_iter=int(values["strategy.max_iter"]),
        kept=int(values["strategy.kept"]),
    )
    if strategy.kind not in ("identity", "neumann", "cg", "exact_dense", "unrolled", "truncated_unrolled"):
        raise ConfigError(f"unknown strategy.kind {strategy.kind!r}")

    extra = {k: values[k] for k in _KIND_KEYS[kind]}
    if kind == "run" and values["problem.kind"] == "penalized" and values["problem.data"] == "csv":
        csv_path = str(values["problem.csv_path"])
        if not csv_path:
            raise ConfigError("problem.csv_path is required when problem.data = csv")
        if not Path(csv_path).exists():
            raise ConfigError(f"problem.csv_path {csv_path!r} does not exist")

    return ExperimentConfig(
        kind=kind,
        seeds=seeds,
        out_dir=Path(str(values["out"])) if values["out"] else None,
        opt_w_rule=str(values["optimizer.weights.rule"]),
        opt_w_lr=float(values["optimizer.weights.lr"]),
        opt_lam_rule=str(values["optimizer.hyper.rule"]),
        opt_lam_lr=float(values["optimizer.hyper.lr"]),
        outer_iters=int(values["loop.outer_iters"]),
        inner_steps=int(values["loop.inner_steps"]),
        strategy=strategy,
        dense_cap=int(values["caps.dense"]),
        unroll_cap=int(values["caps.unroll"]),
        extra=extra,
    )


def _map_seeds(fn, seeds):
    workers = max(1, int(os.environ.get("HYPERGRAD_THREADS", "1") or 1))
    if workers == 1 or len(seeds) == 1:
        return [fn(s) for s in seeds]
    with ThreadPoolExecutor(max_workers=min(workers, len(seeds))) as pool:
        return list(pool.map(fn, seeds))


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------


def _exact_reference(problem, lam, w, cap):
    """Exact hypergradient via one dense assembly, plus the spectral alpha
    0.9 / lambda_max used by the 'auto' strategy scale."""
    h = dense_hessian(problem, lam, w, cap=cap)
    v1 = grad_w(problem.val_loss, lam, w, problem.val_data)
    u = np.linalg.solve(h, v1.data)
    indirect = -mixed_vjp(problem.train_loss, lam, w, problem.train_data, w.with_data(u)).data
    direct = grad_lam(problem.val_loss, lam, w, problem.val_data).data
    alpha = 0.9 / float(np.linalg.eigvalsh(h).max())
    return direct + indirect, alpha


def _sized(scfg: StrategyConfig, kind: str, steps: int, alpha: float) -> InverseStrategy:
    if kind == "neumann":
        return InverseStrategy.neumann(steps, alpha)
    if kind == "cg":
        return InverseStrategy.cg(max(steps, 1), scfg.tol)
    if kind == "identity":
        return InverseStrategy.identity()
    if kind == "exact_dense":
        return InverseStrategy.exact_dense()
    if kind == "unrolled":
        return InverseStrategy.unrolled(steps, alpha)
    if kind == "truncated_unrolled":
        return InverseStrategy.truncated_unrolled(steps, min(scfg.kept, steps) or steps, alpha)
    raise ConfigError(f"unknown comparison strategy {kind!r}")


def cmd_accuracy(cfg: ExperimentConfig) -> list[Path]:
    """Hypergradient quality against the exact inverse along an optimization
    trajectory (fixed inversion steps) and across inversion steps at the end.
    """
    out = cfg.resolved_out()
    x = cfg.extra
    data = gen_regression(x["accuracy.n"], x["accuracy.dim"], x["accuracy.noise"], x["accuracy.data_seed"])
    train, val = split_dataset(data, x["accuracy.val_frac"], x["accuracy.data_seed"])
    spec = PenalizedModelSpec(model="linear", decay_scope="per_param")
    problem = make_penalized(spec, train, val, val)
    if problem.w_dim > cfg.dense_cap:
        raise ConfigError(
            f"weight dimension {problem.w_dim} exceeds caps.dense = {cfg.dense_cap}"
        )

    def one_seed(seed: int):
        lam, w = problem.init_lam(seed), problem.init_w(seed)
        opt_w, opt_lam = cfg.opt_w(), cfg.opt_lam()
        rows = []

        def compare_block(it, strategies_steps):
            exact, alpha = _exact_reference(problem, lam, w, cfg.dense_cap)
            for kind, steps in strategies_steps:
                strat = _sized(cfg.strategy, kind, steps, alpha)
                rep = hypergradient(problem, lam, w, strat, cap=cfg.dense_cap)
                cos, l2 = cosine_and_l2(rep.total.data, exact)
                rows.append((it, kind, steps, cos, l2))
            return alpha

        strategies = list(x["accuracy.strategies"])
        fixed = x["accuracy.fixed_steps"]
        last_alpha = None
        for it in range(cfg.outer_iters):
            w, _, opt_w = inner_optimize(problem, lam, w, cfg.inner_steps, opt_w)
            if it % x["accuracy.record_every"] == 0 or it == cfg.outer_iters - 1:
                last_alpha = compare_block(it, [(k, fixed) for k in strategies])
            driver = cfg.strategy.build(alpha=last_alpha if cfg.strategy.auto_alpha else None)
            driver = driver.with_default_scale(cfg.opt_w_lr)
            rep = hypergradient(problem, lam, w, driver, cap=cfg.dense_cap)
            lam, opt_lam = optimizer_step(opt_lam, lam, rep.total)

        final_it = cfg.outer_iters
        compare_block(final_it, [(k, s) for k in strategies for s in x["accuracy.step_grid"]])
        return rows

    all_rows = _map_seeds(one_seed, list(cfg.seeds))
    header = ("optimization_iter", "strategy", "inversion_steps", "cosine_similarity", "l2_distance")
    paths = [write_table(out / "accuracy.csv", header, all_rows[0])]
    if len(cfg.seeds) > 1:
        merged = []
        for seed, rows in zip(cfg.seeds, all_rows):
            for r in rows:
                merged.append(dict(zip(header, r)))
        sum_header, sum_rows = summarize(
            merged,
            ["optimization_iter", "strategy", "inversion_steps"],
            ["cosine_similarity", "l2_distance"],
        )
        paths.append(write_table(out / "accuracy_summary.csv", sum_header, sum_rows))
    return paths


def neumann_inverse_partial_sums(h: np.ndarray, alpha: float, terms: list[int]) -> dict[int, np.ndarray]:
    """Dense mirror of the Neumann recurrence: alpha * sum_{j<i} (I - alpha*H)^j
    for each requested term count i."""
    dim = h.shape[0]
    eye = np.eye(dim)
    t = eye - alpha * h
    acc = np.zeros_like(h)
    cur = eye.copy()
    wanted = sorted(set(terms))
    out: dict[int, np.ndarray] = {}
    for i in range(1, max(wanted) + 1):
        acc = acc + cur
        if i in wanted:
            out[i] = alpha * acc
        cur = cur @ t
    if 0 in wanted:
        out[0] = np.zeros_like(h)
    return out


def cmd_hessian_viz(cfg: ExperimentConfig) -> list[Path]:
    """Train a one-hidden-layer model, then write elementwise-tanh images of
    truncated Neumann inverses next to the true inverse Hessian."""
    out = cfg.resolved_out()
    x = cfg.extra
    data = gen_regression(x["hessian.n"], x["hessian.dim"], x["hessian.noise"], x["hessian.data_seed"])
    spec = PenalizedModelSpec(
        model="mlp",
        hidden=(x["hessian.hidden"],),
        decay_scope="global",
        init_decay=x["hessian.decay"],
    )
    problem = make_penalized(spec, data, data, data)
    if problem.w_dim > cfg.dense_cap:
        raise ConfigError(
            f"weight dimension {problem.w_dim} exceeds caps.dense = {cfg.dense_cap}"
        )
    seed = cfg.seeds[0]
    lam, w = problem.init_lam(seed), problem.init_w(seed)
    opt = OptimizerState(cfg.opt_w_rule, cfg.opt_w_lr)
    w, _, _ = inner_optimize(problem, lam, w, x["hessian.train_steps"], opt)

    h = dense_hessian(problem, lam, w, cap=cfg.dense_cap)
    eigs = np.linalg.eigvalsh(h)
    if eigs.min() <= 0:
        raise CapacityError(
            f"training Hessian is not positive definite (min eig {eigs.min():.3e}); "
            "increase hessian.train_steps or hessian.decay"
        )
    alpha = cfg.strategy.alpha if (cfg.strategy.alpha and not cfg.strategy.auto_alpha) else 0.9 / float(eigs.max())
    terms = list(x["hessian.terms"])
    sums = neumann_inverse_partial_sums(h, alpha, terms)
    paths = []
    for i in terms:
        paths.append(write_matrix(out / f"inv_neumann_{i}.mat.csv", np.tanh(sums[i])))
    paths.append(write_matrix(out / "inv_true.mat.csv", np.tanh(np.linalg.inv(h))))
    return paths


def cmd_overfit(cfg: ExperimentConfig) -> list[Path]:
    """Drive validation error to zero by tuning per-parameter decays against
    a deliberately noise-labeled validation set; a frozen-hyperparameter
    control arm trains the same weights without any outer updates."""
    out = cfg.resolved_out()
    x = cfg.extra
    half_train = x["overfit.train_n"] // 2
    half_val = x["overfit.val_n"] // 2
    half_test = x["overfit.test_n"] // 2
    ds = x["overfit.data_seed"]
    common = dict(dim=x["overfit.dim"], spread=x["overfit.spread"], radius=x["overfit.radius"])
    train = gen_blobs(2, half_train, seed=ds, **common)
    val = gen_blobs(2, half_val, seed=ds + 1, label_noise=x["overfit.val_label_noise"], **common)
    test = gen_blobs(2, half_test, seed=ds + 2, **common)
    spec = PenalizedModelSpec(
        model="logistic", decay_scope="per_param", init_decay=x["overfit.init_decay"]
    )
    problem = make_penalized(spec, train, val, test)

    header = (
        "iteration", "arm", "train_loss", "val_loss",
        "train_error", "val_error", "test_error",
    )

    def one_seed(seed: int):
        rows = []
        lam0, w0 = problem.init_lam(seed), problem.init_w(seed)
        run = run_ho(
            problem, lam0, w0, cfg.outer_iters, cfg.inner_steps,
            cfg.opt_w(), cfg.opt_lam(),
            cfg.strategy.build().with_default_scale(cfg.opt_w_lr),
            seed=seed, cap=cfg.dense_cap, unroll_cap=cfg.unroll_cap,
        )
        for r in run.records:
            rows.append((r.iteration, "ho", r.train_loss, r.val_loss,
                         1.0 - r.train_acc, 1.0 - r.val_acc, 1.0 - r.test_acc))
        # control: hyperparameters frozen at their initial values
        w, opt = w0, cfg.opt_w()
        for it in range(cfg.outer_iters):
            w, _, opt = inner_optimize(problem, lam0, w, cfg.inner_steps, opt)
            tr_l, tr_a = problem.scorer(lam0, w, problem.train_data)
            va_l, va_a = problem.scorer(lam0, w, problem.val_data)
            _, te_a = problem.scorer(lam0, w, problem.test_data)
            rows.append((it, "frozen", tr_l, va_l, 1.0 - tr_a, 1.0 - va_a, 1.0 - te_a))
        return rows

    all_rows = _map_seeds(one_seed, list(cfg.seeds))
    paths = [write_table(out / "overfit.csv", header, all_rows[0])]
    if len(cfg.seeds) > 1:
        merged = [dict(zip(header, r)) for rows in all_rows for r in rows]
        sum_header, sum_rows = summarize(
            merged, ["iteration", "arm"],
            ["train_loss", "val_loss", "train_error", "val_error", "test_error"],
        )
        paths.append(write_table(out / "overfit_summary.csv", sum_header, sum_rows))
    return paths


def cmd_distill(cfg: ExperimentConfig) -> list[Path]:
    """Learn one synthetic input per class such that a model trained only on
    the synthetic points classifies the real labeled data."""
    out = cfg.resolved_out()
    x = cfg.extra
    spec = DistillationSpec(
        classes=x["distill.classes"],
        per_class=x["distill.per_class"],
        dim=x["distill.dim"],
        inner_decay=x["distill.inner_decay"],
        init_spread=x["distill.init_spread"],
    )
    ds = x["distill.data_seed"]
    labeled = gen_blobs(
        spec.classes, x["distill.labeled_per_class"], dim=spec.dim,
        spread=x["distill.spread"], radius=x["distill.radius"], seed=ds,
    )
    test = gen_blobs(
        spec.classes, x["distill.test_per_class"], dim=spec.dim,
        spread=x["distill.spread"], radius=x["distill.radius"], seed=ds + 1,
    )
    problem = make_distillation(spec, labeled, test)

    header = ("iteration", "train_loss", "val_loss", "val_accuracy", "test_accuracy")

    def one_seed(seed: int):
        lam0, w0 = problem.init_lam(seed), problem.init_w(seed)
        run = run_ho(
            problem, lam0, w0, cfg.outer_iters, cfg.inner_steps,
            cfg.opt_w(), cfg.opt_lam(),
            cfg.strategy.build().with_default_scale(cfg.opt_w_lr),
            seed=seed, cap=cfg.dense_cap, unroll_cap=cfg.unroll_cap,
        )
        rows = [
            (r.iteration, r.train_loss, r.val_loss, r.val_acc, r.test_acc)
            for r in run.records
        ]
        return rows, run.lam

    results = _map_seeds(one_seed, list(cfg.seeds))
    rows0, lam_final = results[0]
    paths = [write_table(out / "distill.csv", header, rows0)]

    feats, labels = distilled_points(spec, lam_final)
    pt_header = [f"f{i}" for i in range(spec.dim)] + ["label"]
    pt_rows = [list(map(float, feats[i])) + [int(labels[i])] for i in range(spec.n_points)]
    paths.append(write_table(out / "distilled_points.csv", pt_header, pt_rows))

    if len(cfg.seeds) > 1:
        merged = [dict(zip(header, r)) for rows, _ in results for r in rows]
        sum_header, sum_rows = summarize(
            merged, ["iteration"],
            ["train_loss", "val_loss", "val_accuracy", "test_accuracy"],
        )
        paths.append(write_table(out / "distill_summary.csv", sum_header, sum_rows))
    return paths


def cmd_split_study(cfg: ExperimentConfig) -> list[Path]:
    """Sweep the train/validation split fraction for few- and
    many-hyperparameter regimes, with and without retraining on the full
    pool at the tuned hyperparameters."""
    out = cfg.resolved_out()
    x = cfg.extra
    pool = gen_blobs(
        x["split.classes"], x["split.pool_per_class"], dim=x["split.dim"],
        spread=x["split.spread"], radius=x["split.radius"],
        label_noise=x["split.label_noise"], noise_scale=x["split.noise_scale"],
        seed=x["split.data_seed"],
    )
    test = gen_blobs(
        x["split.classes"], x["split.test_per_class"], dim=x["split.dim"],
        spread=x["split.spread"], radius=x["split.radius"],
        noise_scale=x["split.noise_scale"], seed=x["split.data_seed"] + 1,
    )
    fractions = list(x["split.fractions"])
    regimes = list(x["split.regimes"])
    for f in fractions:
        if not 0.0 < f < 1.0:
            raise ConfigError(f"split.fractions entries must lie in (0, 1), got {f}")
    for r in regimes:
        if r not in ("global", "per_param"):
            raise ConfigError(f"split.regimes entries must be global|per_param, got {r!r}")
    retrain_steps = x["split.retrain_steps"] or cfg.outer_iters * cfg.inner_steps

    def one_seed(seed: int):
        rows = []
        for frac in fractions:
            split_seed = seed * 10007 + int(round(frac * 1000))
            train, val = split_dataset(pool, frac, split_seed)
            for regime in regimes:
                spec = PenalizedModelSpec(
                    model="logistic", decay_scope=regime,
                    intercept=x["split.intercept"], init_decay=x["split.init_decay"],
                )
                problem = make_penalized(spec, train, val, test)
                lam0, w0 = problem.init_lam(seed), problem.init_w(seed)
                run = run_ho(
                    problem, lam0, w0, cfg.outer_iters, cfg.inner_steps,
                    cfg.opt_w(), cfg.opt_lam(),
                    cfg.strategy.build().with_default_scale(cfg.opt_w_lr),
                    seed=seed, cap=cfg.dense_cap, unroll_cap=cfg.unroll_cap,
                )
                _, acc_no = problem.scorer(run.lam, run.w, problem.test_data)
                rows.append((frac, regime + "_decay", "no", acc_no, seed))

                # retrain from the same seeded init on train+val at tuned rates
                union_problem = make_penalized(spec, concat_datasets(train, val), val, test)
                w_re, opt_re = union_problem.init_w(seed), cfg.opt_w()
                w_re, _, _ = inner_optimize(
                    union_problem, run.lam, w_re, retrain_steps, opt_re, seed
                )
                _, acc_yes = union_problem.scorer(run.lam, w_re, union_problem.test_data)
                rows.append((frac, regime + "_decay", "yes", acc_yes, seed))
        return rows

    all_rows = _map_seeds(one_seed, list(cfg.seeds))
    header = ("validation_fraction", "regime", "retrained", "test_accuracy", "seed")
    flat_rows = [r for rows in all_rows for r in rows]
    paths = [write_table(out / "split.csv", header, flat_rows)]
    merged = [dict(zip(header, r)) for r in flat_rows]
    sum_header, sum_rows = summarize(
        merged, ["validation_fraction", "regime", "retrained"], ["test_accuracy"]
    )
    paths.append(write_table(out / "split_summary.csv", sum_header, sum_rows))
    return paths


def _build_run_problem(cfg: ExperimentConfig):
    x = cfg.extra
    kind = x["problem.kind"]
    if kind == "quadratic":
        spec = random_quadratic(x["problem.m"], x["problem.n"], x["problem.gen_seed"])
        return make_quadratic(spec)
    if kind != "penalized":
        raise ConfigError(f"problem.kind must be quadratic|penalized, got {kind!r}")
    source = x["problem.data"]
    ds = x["problem.data_seed"]
    if source == "blobs":
        data = gen_blobs(
            x["problem.classes"], x["problem.per_class"], dim=x["problem.dim"],
            spread=x["problem.spread"], radius=x["problem.radius"],
            label_noise=x["problem.label_noise"], seed=ds,
        )
    elif source == "regression":
        data = gen_regression(x["problem.n_samples"], x["problem.dim"], x["problem.noise"], ds)
    elif source == "csv":
        target = x["problem.target_col"] or None
        data = load_csv(x["problem.csv_path"], target_col=target)
    else:
        raise ConfigError(f"problem.data must be blobs|regression|csv, got {source!r}")
    rest, test = split_dataset(data, x["problem.test_frac"], ds + 100)
    train, val = split_dataset(rest, x["problem.val_frac"] / (1 - x["problem.test_frac"]), ds + 200)
    model = x["problem.model"]
    spec = PenalizedModelSpec(
        model="linear" if model == "linear_regression" else
              "logistic" if model == "logistic_regression" else model,
        hidden=tuple(x["problem.hidden"]),
        activation=x["problem.activation"],
        decay_scope=x["problem.decay_scope"],
        intercept=x["problem.intercept"],
        init_decay=x["problem.init_decay"],
    )
    return make_penalized(spec, train, val, test)


def cmd_run(cfg: ExperimentConfig) -> list[Path]:
    """Generic driver: run the outer loop on a configured problem and write
    one record file per seed."""
    out = cfg.resolved_out()
    problem = _build_run_problem(cfg)
    if cfg.strategy.kind == "exact_dense" and problem.w_dim > cfg.dense_cap:
        raise ConfigError(
            f"weight dimension {problem.w_dim} exceeds caps.dense = {cfg.dense_cap}"
        )

    def one_seed(seed: int):
        lam0, w0 = problem.init_lam(seed), problem.init_w(seed)
        return run_ho(
            problem, lam0, w0, cfg.outer_iters, cfg.inner_steps,
            cfg.opt_w(), cfg.opt_lam(),
            cfg.strategy.build().with_default_scale(cfg.opt_w_lr),
            seed=seed, cap=cfg.dense_cap, unroll_cap=cfg.unroll_cap,
        )

    runs = _map_seeds(one_seed, list(cfg.seeds))
    paths = []
    for seed, run in zip(cfg.seeds, runs):
        paths.append(write_records(run.records, out / f"run_seed{seed}.csv"))
    if len(cfg.seeds) > 1:
        merged = []
        for run in runs:
            for r in run.records:
                merged.append({
                    "iteration": r.iteration, "train_loss": r.train_loss,
                    "val_loss": r.val_loss, "test_loss": r.test_loss,
                    "fixed_point_residual": r.fixed_point_residual,
                    "hypergrad_norm": r.hypergrad_norm,
                })
        sum_header, sum_rows = summarize(
            merged, ["iteration"],
            ["train_loss", "val_loss", "test_loss", "fixed_point_residual", "hypergrad_norm"],
        )
        paths.append(write_table(out / "run_summary.csv", sum_header, sum_rows))
    return paths


DISPATCH = {
    "accuracy": cmd_accuracy,
    "hessian-viz": cmd_hessian_viz,
    "overfit-val": cmd_overfit,
    "distill": cmd_distill,
    "split-study": cmd_split_study,
    "run": cmd_run,
}
