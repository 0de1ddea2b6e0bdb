"""Config parsing, CSV conventions, seed aggregation, and the experiment
commands at miniature scale."""

import numpy as np
import pytest

from hypergrad.errors import ConfigError
from hypergrad.experiments import (
    RECORD_COLUMNS,
    SCHEMA_LINE,
    cmd_accuracy,
    cmd_distill,
    cmd_hessian_viz,
    cmd_overfit,
    cmd_run,
    cmd_split_study,
    fmt_value,
    neumann_inverse_partial_sums,
    parse_config,
    read_table,
    summarize,
    write_records,
    write_table,
)
from hypergrad.hypergradient import RunRecord


def cfg_file(tmp_path, text, name="exp.cfg"):
    path = tmp_path / name
    path.write_text(text, encoding="utf-8")
    return path


def mini_run_cfg(tmp_path, out, seeds="0", name="run.cfg"):
    return cfg_file(
        tmp_path,
        f"""
        experiment = run
        seeds = {seeds}
        out = {out}
        problem.kind = quadratic
        problem.m = 4
        problem.n = 2
        loop.outer_iters = 8
        loop.inner_steps = 5
        optimizer.weights.rule = sgd
        optimizer.weights.lr = 0.2
        optimizer.hyper.rule = sgd
        optimizer.hyper.lr = 0.05
        strategy.kind = exact_dense
        """,
        name,
    )


# ---------------------------------------------------------------------------
# CSV conventions
# ---------------------------------------------------------------------------


def test_fmt_value_covers_every_cell_type():
    assert fmt_value(True) == "1"
    assert fmt_value(False) == "0"
    assert fmt_value(np.int64(7)) == "7"
    assert fmt_value(1.0 / 3.0) == "0.33333333333333331"
    assert fmt_value("global_decay") == "global_decay"


def test_write_table_puts_the_schema_line_first(tmp_path):
    path = write_table(tmp_path / "t.csv", ("a", "b"), [(1, 2.5)])
    lines = path.read_text(encoding="utf-8").splitlines()
    assert lines[0] == SCHEMA_LINE
    assert lines[1] == "a,b"


def test_floats_round_trip_through_seventeen_digits(tmp_path):
    values = np.random.default_rng(2).standard_normal(64)
    path = write_table(tmp_path / "f.csv", ("x",), [(v,) for v in values])
    _, rows = read_table(path)
    back = np.array([float(r["x"]) for r in rows])
    np.testing.assert_array_equal(back, values)


def test_read_table_skips_comment_lines(tmp_path):
    path = tmp_path / "c.csv"
    path.write_text("# schema=v1\na,b\n# interlude\n1,2\n", encoding="utf-8")
    header, rows = read_table(path)
    assert header == ["a", "b"]
    assert rows == [{"a": "1", "b": "2"}]


def test_write_records_never_persists_wall_clock(tmp_path):
    rec = RunRecord(
        iteration=0, train_loss=1.0, val_loss=2.0, test_loss=3.0,
        train_acc=0.5, val_acc=0.25, test_acc=float("nan"),
        fixed_point_residual=1e-8, hypergrad_norm=0.1,
        wall_ms=123.456, diverged=False,
    )
    path = write_records([rec], tmp_path / "r.csv")
    header, rows = read_table(path)
    assert header == list(RECORD_COLUMNS)
    assert "wall_ms" not in header
    assert rows[0]["diverged"] == "0"
    assert rows[0]["test_acc"] == "nan"


def test_summarize_uses_population_std_and_first_appearance_order():
    rows = [
        {"g": "b", "v": 1.0},
        {"g": "a", "v": 5.0},
        {"g": "b", "v": 3.0},
        {"g": "a", "v": 9.0},
    ]
    header, out = summarize(rows, ["g"], ["v"])
    assert header == ["g", "v_mean", "v_std"]
    assert [line[0] for line in out] == ["b", "a"]  # not sorted
    b, a = out
    np.testing.assert_allclose(b[1:], [2.0, np.std([1.0, 3.0])])
    np.testing.assert_allclose(a[1:], [7.0, np.std([5.0, 9.0])])
    assert a[2] == 2.0  # ddof=0, not the sample std


def test_summarize_with_multiple_key_columns():
    rows = [
        {"f": "0.1", "r": "x", "v": 1.0},
        {"f": "0.1", "r": "y", "v": 2.0},
        {"f": "0.1", "r": "x", "v": 3.0},
    ]
    header, out = summarize(rows, ["f", "r"], ["v"])
    assert [tuple(line[:2]) for line in out] == [("0.1", "x"), ("0.1", "y")]
    np.testing.assert_allclose(out[0][2], 2.0)


# ---------------------------------------------------------------------------
# config parsing
# ---------------------------------------------------------------------------


def test_parse_config_fills_defaults(tmp_path):
    cfg = parse_config(cfg_file(tmp_path, "experiment = run\n"))
    assert cfg.kind == "run"
    assert cfg.seeds == (0,)
    assert cfg.out_dir is None
    assert cfg.opt_w_rule == "adam" and cfg.opt_lam_rule == "rmsprop"
    assert cfg.strategy.kind == "neumann" and cfg.strategy.terms == 5
    assert cfg.strategy.alpha is None and not cfg.strategy.auto_alpha
    assert cfg.extra["problem.kind"] == "quadratic"
    with pytest.raises(ConfigError, match="out"):
        cfg.resolved_out()


def test_parse_config_requires_experiment(tmp_path):
    with pytest.raises(ConfigError, match="experiment"):
        parse_config(cfg_file(tmp_path, "seeds = 0\n"))


def test_parse_config_rejects_unknown_experiment(tmp_path):
    with pytest.raises(ConfigError, match="'training'"):
        parse_config(cfg_file(tmp_path, "experiment = training\n"))


def test_parse_config_rejects_unknown_key_by_name(tmp_path):
    text = "experiment = run\nproblem.shape = 3\n"
    with pytest.raises(ConfigError, match="'problem.shape'.*'run'"):
        parse_config(cfg_file(tmp_path, text))


def test_parse_config_rejects_other_commands_keys(tmp_path):
    text = "experiment = run\naccuracy.step_grid = 1 2\n"
    with pytest.raises(ConfigError, match="'accuracy.step_grid'"):
        parse_config(cfg_file(tmp_path, text))


def test_parse_config_rejects_duplicates_with_line_number(tmp_path):
    text = "experiment = run\nseeds = 0\nseeds = 1\n"
    with pytest.raises(ConfigError, match=":3:.*'seeds'"):
        parse_config(cfg_file(tmp_path, text))


def test_parse_config_rejects_malformed_lines(tmp_path):
    with pytest.raises(ConfigError, match="key = value"):
        parse_config(cfg_file(tmp_path, "experiment = run\njust words\n"))


def test_parse_config_names_the_unparseable_key(tmp_path):
    text = "experiment = run\nloop.outer_iters = soon\n"
    with pytest.raises(ConfigError, match="'loop.outer_iters'"):
        parse_config(cfg_file(tmp_path, text))


def test_parse_config_missing_file():
    with pytest.raises(ConfigError, match="does not exist"):
        parse_config("/nonexistent/exp.cfg")


def test_parse_config_alpha_spellings(tmp_path):
    auto = parse_config(cfg_file(tmp_path, "experiment = run\nstrategy.alpha = auto\n", "a.cfg"))
    assert auto.strategy.auto_alpha and auto.strategy.alpha is None
    fixed = parse_config(cfg_file(tmp_path, "experiment = run\nstrategy.alpha = 0.3\n", "b.cfg"))
    assert fixed.strategy.alpha == 0.3 and not fixed.strategy.auto_alpha
    with pytest.raises(ConfigError, match="alpha"):
        parse_config(cfg_file(tmp_path, "experiment = run\nstrategy.alpha = -1\n", "c.cfg"))


def test_parse_config_validates_loop_and_seeds(tmp_path):
    with pytest.raises(ConfigError, match="seeds"):
        parse_config(cfg_file(tmp_path, "experiment = run\nseeds =\n", "s.cfg"))
    with pytest.raises(ConfigError, match="inner_steps"):
        parse_config(cfg_file(tmp_path, "experiment = run\nloop.inner_steps = 0\n", "l.cfg"))


def test_parse_config_rejects_unknown_strategy_kind(tmp_path):
    with pytest.raises(ConfigError, match="strategy.kind"):
        parse_config(cfg_file(tmp_path, "experiment = run\nstrategy.kind = banded\n"))


def test_parse_config_comments_and_blank_lines(tmp_path):
    text = "# a comment\n\nexperiment = run   # trailing comment\nseeds = 1 2\n"
    cfg = parse_config(cfg_file(tmp_path, text))
    assert cfg.seeds == (1, 2)


def test_shipped_configs_parse():
    from pathlib import Path

    configs = sorted(Path(__file__).resolve().parent.parent.glob("configs/*.cfg"))
    assert configs, "shipped configs are missing"
    for path in configs:
        cfg = parse_config(path)
        assert cfg.kind in (
            "accuracy", "hessian-viz", "overfit-val", "distill", "split-study", "run"
        )


# ---------------------------------------------------------------------------
# dense Neumann partial sums (hessian-viz backbone)
# ---------------------------------------------------------------------------


def test_partial_sums_on_a_diagonal_closed_form():
    h = np.diag([2.0, 4.0])
    alpha = 0.25
    sums = neumann_inverse_partial_sums(h, alpha, [0, 1, 5])
    np.testing.assert_array_equal(sums[0], np.zeros((2, 2)))
    np.testing.assert_allclose(sums[1], alpha * np.eye(2), atol=1e-15)
    # coordinate with a = 4 hits the inverse 0.25 in one term (1 - alpha*a = 0);
    # the a = 2 coordinate approaches 0.5 geometrically
    expected_5 = np.diag([0.5 * (1 - 0.5**5), 0.25])
    np.testing.assert_allclose(sums[5], expected_5, atol=1e-15)


def test_partial_sums_converge_to_the_true_inverse():
    rng = np.random.default_rng(5)
    q, _ = np.linalg.qr(rng.standard_normal((4, 4)))
    h = q @ np.diag([0.8, 1.5, 2.5, 4.0]) @ q.T
    alpha = 0.9 / 4.0
    sums = neumann_inverse_partial_sums(h, alpha, [3, 10, 300])
    inv = np.linalg.inv(h)
    errs = [np.linalg.norm(sums[i] - inv) for i in (3, 10, 300)]
    assert errs[0] > errs[1] > errs[2]
    assert errs[2] < 1e-10


# ---------------------------------------------------------------------------
# commands at miniature scale
# ---------------------------------------------------------------------------


def test_cmd_run_writes_per_seed_records_and_summary(tmp_path):
    cfg = parse_config(mini_run_cfg(tmp_path, tmp_path / "out", seeds="0 1 2"))
    paths = cmd_run(cfg)
    names = [p.name for p in paths]
    assert names == ["run_seed0.csv", "run_seed1.csv", "run_seed2.csv", "run_summary.csv"]
    header, rows = read_table(paths[0])
    assert header == list(RECORD_COLUMNS)
    assert [r["iteration"] for r in rows] == [str(i) for i in range(8)]
    sum_header, sum_rows = read_table(paths[-1])
    assert "train_loss_mean" in sum_header and "train_loss_std" in sum_header
    assert len(sum_rows) == 8


def test_cmd_run_single_seed_skips_the_summary(tmp_path):
    cfg = parse_config(mini_run_cfg(tmp_path, tmp_path / "out"))
    paths = cmd_run(cfg)
    assert [p.name for p in paths] == ["run_seed0.csv"]


def test_cmd_run_is_byte_identical_across_reruns(tmp_path):
    cfg_a = parse_config(mini_run_cfg(tmp_path, tmp_path / "a", seeds="0 1", name="a.cfg"))
    cfg_b = parse_config(mini_run_cfg(tmp_path, tmp_path / "b", seeds="0 1", name="b.cfg"))
    for pa, pb in zip(cmd_run(cfg_a), cmd_run(cfg_b)):
        assert pa.read_bytes() == pb.read_bytes()


def test_threaded_seeds_match_sequential_bytes(tmp_path, monkeypatch):
    cfg_seq = parse_config(mini_run_cfg(tmp_path, tmp_path / "seq", seeds="0 1 2", name="s.cfg"))
    monkeypatch.delenv("HYPERGRAD_THREADS", raising=False)
    seq_paths = cmd_run(cfg_seq)
    cfg_par = parse_config(mini_run_cfg(tmp_path, tmp_path / "par", seeds="0 1 2", name="p.cfg"))
    monkeypatch.setenv("HYPERGRAD_THREADS", "2")
    par_paths = cmd_run(cfg_par)
    for ps, pp in zip(seq_paths, par_paths):
        assert ps.read_bytes() == pp.read_bytes()


def test_cmd_accuracy_layout(tmp_path):
    cfg = parse_config(cfg_file(
        tmp_path,
        f"""
        experiment = accuracy
        out = {tmp_path / 'acc'}
        accuracy.n = 40
        accuracy.dim = 4
        accuracy.val_frac = 0.25
        accuracy.strategies = identity neumann cg exact_dense
        accuracy.step_grid = 1 2 5
        accuracy.fixed_steps = 3
        accuracy.record_every = 2
        loop.outer_iters = 4
        loop.inner_steps = 10
        optimizer.weights.rule = adam
        optimizer.weights.lr = 0.05
        strategy.kind = cg
        strategy.max_iter = 5
        """,
    ))
    (path,) = cmd_accuracy(cfg)
    header, rows = read_table(path)
    assert header == [
        "optimization_iter", "strategy", "inversion_steps",
        "cosine_similarity", "l2_distance",
    ]
    # trajectory blocks at iterations 0, 2, 3 plus the final sweep at 4
    iters = sorted({int(r["optimization_iter"]) for r in rows})
    assert iters == [0, 2, 3, 4]
    final = [r for r in rows if r["optimization_iter"] == "4"]
    assert len(final) == 4 * 3  # strategies x step grid
    for r in rows:
        if r["strategy"] == "exact_dense":
            assert float(r["cosine_similarity"]) == 1.0
            assert float(r["l2_distance"]) == 0.0
    # the neumann error shrinks along the final step grid
    neumann = {int(r["inversion_steps"]): float(r["l2_distance"]) for r in final if r["strategy"] == "neumann"}
    assert neumann[1] >= neumann[5]


def test_cmd_accuracy_enforces_the_dense_cap(tmp_path):
    cfg = parse_config(cfg_file(
        tmp_path,
        f"experiment = accuracy\nout = {tmp_path / 'x'}\ncaps.dense = 2\n",
    ))
    with pytest.raises(ConfigError, match="caps.dense"):
        cmd_accuracy(cfg)


def test_cmd_hessian_viz_writes_bounded_matrices(tmp_path):
    cfg = parse_config(cfg_file(
        tmp_path,
        f"""
        experiment = hessian-viz
        out = {tmp_path / 'viz'}
        hessian.n = 60
        hessian.dim = 5
        hessian.hidden = 2
        hessian.decay = 0.1
        hessian.train_steps = 500
        hessian.terms = 1 3
        optimizer.weights.rule = adam
        optimizer.weights.lr = 0.05
        """,
    ))
    paths = cmd_hessian_viz(cfg)
    assert [p.name for p in paths] == [
        "inv_neumann_1.mat.csv", "inv_neumann_3.mat.csv", "inv_true.mat.csv"
    ]
    for path in paths:
        mat = np.loadtxt(path, delimiter=",", comments="#")
        assert mat.shape[0] == mat.shape[1]
        assert np.all(np.abs(mat) <= 1.0)  # elementwise tanh squashing


def test_cmd_overfit_emits_both_arms(tmp_path):
    cfg = parse_config(cfg_file(
        tmp_path,
        f"""
        experiment = overfit-val
        out = {tmp_path / 'o'}
        overfit.dim = 6
        overfit.train_n = 12
        overfit.val_n = 12
        overfit.test_n = 40
        loop.outer_iters = 6
        loop.inner_steps = 5
        optimizer.weights.rule = adam
        optimizer.weights.lr = 0.05
        optimizer.hyper.rule = rmsprop
        optimizer.hyper.lr = 0.1
        strategy.kind = neumann
        strategy.terms = 3
        strategy.alpha = 0.05
        """,
    ))
    (path,) = cmd_overfit(cfg)
    header, rows = read_table(path)
    assert header == [
        "iteration", "arm", "train_loss", "val_loss",
        "train_error", "val_error", "test_error",
    ]
    arms = {r["arm"] for r in rows}
    assert arms == {"ho", "frozen"}
    assert sum(r["arm"] == "ho" for r in rows) == 6
    assert sum(r["arm"] == "frozen" for r in rows) == 6


def test_cmd_distill_emits_trajectory_and_points(tmp_path):
    cfg = parse_config(cfg_file(
        tmp_path,
        f"""
        experiment = distill
        out = {tmp_path / 'd'}
        distill.classes = 2
        distill.labeled_per_class = 10
        distill.test_per_class = 10
        loop.outer_iters = 5
        loop.inner_steps = 5
        optimizer.weights.rule = adam
        optimizer.weights.lr = 0.1
        optimizer.hyper.rule = rmsprop
        optimizer.hyper.lr = 0.05
        strategy.kind = neumann
        strategy.terms = 3
        strategy.alpha = 0.1
        """,
    ))
    paths = cmd_distill(cfg)
    assert [p.name for p in paths] == ["distill.csv", "distilled_points.csv"]
    header, rows = read_table(paths[0])
    assert header == ["iteration", "train_loss", "val_loss", "val_accuracy", "test_accuracy"]
    assert len(rows) == 5
    pt_header, pt_rows = read_table(paths[1])
    assert pt_header == ["f0", "f1", "label"]
    assert [r["label"] for r in pt_rows] == ["0", "1"]


def test_cmd_split_study_emits_both_regimes_and_summary(tmp_path):
    cfg = parse_config(cfg_file(
        tmp_path,
        f"""
        experiment = split-study
        out = {tmp_path / 's'}
        seeds = 0 1
        split.pool_per_class = 10
        split.test_per_class = 20
        split.dim = 4
        split.fractions = 0.3 0.6
        split.retrain_steps = 20
        loop.outer_iters = 3
        loop.inner_steps = 5
        optimizer.weights.rule = adam
        optimizer.weights.lr = 0.05
        strategy.kind = neumann
        strategy.terms = 3
        strategy.alpha = 0.05
        """,
    ))
    paths = cmd_split_study(cfg)
    assert [p.name for p in paths] == ["split.csv", "split_summary.csv"]
    header, rows = read_table(paths[0])
    assert header == ["validation_fraction", "regime", "retrained", "test_accuracy", "seed"]
    assert len(rows) == 2 * 2 * 2 * 2  # seeds x fractions x regimes x retrained
    assert {r["regime"] for r in rows} == {"global_decay", "per_param_decay"}
    assert {r["retrained"] for r in rows} == {"no", "yes"}
    sum_header, sum_rows = read_table(paths[1])
    assert len(sum_rows) == 2 * 2 * 2  # aggregated over seeds


def test_cmd_run_penalized_csv_source(tmp_path):
    from hypergrad.problems import gen_blobs, save_csv

    data_path = tmp_path / "blobs.csv"
    save_csv(gen_blobs(2, 30, dim=2, seed=4), data_path)
    cfg = parse_config(cfg_file(
        tmp_path,
        f"""
        experiment = run
        out = {tmp_path / 'csvrun'}
        problem.kind = penalized
        problem.model = logistic
        problem.data = csv
        problem.csv_path = {data_path}
        loop.outer_iters = 3
        loop.inner_steps = 5
        optimizer.weights.rule = adam
        optimizer.weights.lr = 0.1
        strategy.kind = neumann
        strategy.terms = 3
        strategy.alpha = 0.1
        """,
    ))
    (path,) = cmd_run(cfg)
    _, rows = read_table(path)
    assert len(rows) == 3
    assert all(np.isfinite(float(r["val_loss"])) for r in rows)


def test_cmd_run_csv_source_requires_a_path(tmp_path):
    text = "experiment = run\nproblem.kind = penalized\nproblem.data = csv\n"
    with pytest.raises(ConfigError, match="csv_path"):
        parse_config(cfg_file(tmp_path, text))
