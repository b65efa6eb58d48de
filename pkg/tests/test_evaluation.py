"""Stratified splits, the linear probe, and the evaluation reports."""

import numpy as np
import pytest

from sngcl.errors import InputError
from sngcl.evaluation import (
    ProbeConfig,
    SplitSpec,
    accuracy,
    evaluate_embeddings,
    make_split,
    run_ablation,
    train_probe,
)
from sngcl.rng import stream_rng
from sngcl.training import TrainConfig


def labeled_population(seed=0, per_class=(60, 45, 80), unlabeled=15):
    rng = np.random.default_rng(seed)
    labels = np.concatenate(
        [np.full(n, c) for c, n in enumerate(per_class)] + [np.full(unlabeled, -1)]
    )
    rng.shuffle(labels)
    return labels


def test_split_spec_requires_exactly_one_validation_size():
    with pytest.raises(InputError):
        SplitSpec(20)
    with pytest.raises(InputError):
        SplitSpec(20, val_total=10, val_per_class=5)
    with pytest.raises(InputError):
        SplitSpec(0, val_total=10)
    SplitSpec(20, val_total=500)
    SplitSpec(20, val_per_class=30)


def test_make_split_stratified_sizes_and_disjointness():
    labels = labeled_population()
    split = make_split(labels, 3, SplitSpec(10, val_total=25), stream_rng(0, "split"))
    assert split.train_idx.size == 30
    assert split.val_idx.size == 25
    assert split.test_idx.size == (60 + 45 + 80) - 30 - 25
    # exactly train_per_class of each class in train
    assert np.bincount(labels[split.train_idx], minlength=3).tolist() == [10, 10, 10]
    combined = np.concatenate([split.train_idx, split.val_idx, split.test_idx])
    assert len(set(combined)) == combined.size
    for part in (split.train_idx, split.val_idx, split.test_idx):
        assert np.all(np.diff(part) > 0)  # sorted, unique


def test_make_split_never_selects_unlabeled_nodes():
    labels = labeled_population(unlabeled=40)
    split = make_split(labels, 3, SplitSpec(5, val_total=12), stream_rng(1, "split"))
    for part in (split.train_idx, split.val_idx, split.test_idx):
        assert np.all(labels[part] >= 0)


def test_make_split_per_class_validation():
    labels = labeled_population()
    split = make_split(labels, 3, SplitSpec(10, val_per_class=8), stream_rng(2, "split"))
    assert np.bincount(labels[split.val_idx], minlength=3).tolist() == [8, 8, 8]


def test_make_split_is_deterministic_per_rng():
    labels = labeled_population()
    spec = SplitSpec(10, val_total=25)
    a = make_split(labels, 3, spec, stream_rng(5, "split"))
    b = make_split(labels, 3, spec, stream_rng(5, "split"))
    c = make_split(labels, 3, spec, stream_rng(6, "split"))
    np.testing.assert_array_equal(a.train_idx, b.train_idx)
    np.testing.assert_array_equal(a.test_idx, b.test_idx)
    assert not np.array_equal(a.train_idx, c.train_idx)


def test_make_split_names_the_deficient_class():
    labels = np.array([0, 0, 0, 1, 1])
    with pytest.raises(InputError, match="class 1"):
        make_split(labels, 2, SplitSpec(3, val_total=0), stream_rng(0, "split"))


def test_make_split_rejects_oversized_validation_total():
    labels = np.array([0, 0, 1, 1])
    with pytest.raises(InputError, match="val_total"):
        make_split(labels, 2, SplitSpec(1, val_total=5), stream_rng(0, "split"))


def test_canonical_citation_protocol_sizes():
    # 7 classes, 2708 nodes: 140 train / 500 val / 2068 test.
    rng = np.random.default_rng(0)
    labels = rng.integers(0, 7, size=2708)
    split = make_split(labels, 7, SplitSpec(20, val_total=500), stream_rng(0, "split"))
    assert (split.train_idx.size, split.val_idx.size, split.test_idx.size) == (140, 500, 2068)


def test_probe_separates_gaussian_blobs():
    rng = np.random.default_rng(1)
    x = np.vstack([
        rng.standard_normal((40, 3)) * 0.1 + [3, 0, 0],
        rng.standard_normal((40, 3)) * 0.1 + [0, 3, 0],
        rng.standard_normal((40, 3)) * 0.1 + [0, 0, 3],
    ])
    y = np.repeat([0, 1, 2], 40)
    probe = train_probe(x, y, 3)
    assert accuracy(probe.predict(x), y) == 1.0


def test_probe_is_deterministic():
    rng = np.random.default_rng(2)
    x = rng.standard_normal((30, 4))
    y = rng.integers(0, 3, size=30)
    a = train_probe(x, y, 3)
    b = train_probe(x, y, 3)
    assert a.weights.tobytes() == b.weights.tobytes()
    assert a.bias.tobytes() == b.bias.tobytes()


def test_probe_matches_scalar_reference_implementation():
    # Tiny problem, few steps: compare against a per-sample transcription of
    # softmax regression with L2 on the weights only.
    x = np.array([[1.0, 0.0], [0.0, 1.0], [1.0, 1.0], [-1.0, 0.5]])
    y = np.array([0, 1, 1, 0])
    cfg = ProbeConfig(lr=0.1, epochs=5, l2=0.01)

    w = np.zeros((2, 2))
    b = np.zeros(2)
    for _ in range(cfg.epochs):
        gw = np.zeros_like(w)
        gb = np.zeros_like(b)
        for i in range(4):
            logits = x[i] @ w + b
            p = np.exp(logits - logits.max())
            p /= p.sum()
            p[y[i]] -= 1.0
            gw += np.outer(x[i], p) / 4
            gb += p / 4
        w -= cfg.lr * (gw + cfg.l2 * w)
        b -= cfg.lr * gb

    probe = train_probe(x, y, 2, cfg)
    np.testing.assert_allclose(probe.weights, w, atol=1e-12)
    np.testing.assert_allclose(probe.bias, b, atol=1e-12)


def test_probe_loss_trajectory_is_recorded_and_non_increasing():
    rng = np.random.default_rng(3)
    x = rng.standard_normal((50, 6))
    y = rng.integers(0, 4, size=50)  # unlearnable labels still descend smoothly
    probe = train_probe(x, y, 4)
    assert probe.losses.shape == (301,)
    assert np.all(np.isfinite(probe.losses))
    assert np.all(np.diff(probe.losses) <= 1e-12)
    # from zero init the first value is exactly log(n_classes)
    assert probe.losses[0] == pytest.approx(np.log(4))


def test_probe_config_accepts_a_seed():
    # the fit is deterministic, so the seed changes nothing today
    x = np.eye(4)
    y = np.array([0, 1, 0, 1])
    a = train_probe(x, y, 2, ProbeConfig(seed=0))
    b = train_probe(x, y, 2, ProbeConfig(seed=9))
    assert a.weights.tobytes() == b.weights.tobytes()


def test_probe_input_checks():
    with pytest.raises(InputError):
        train_probe(np.zeros((3, 2)), np.zeros(2, dtype=int), 2)
    with pytest.raises(InputError):
        train_probe(np.zeros((0, 2)), np.zeros(0, dtype=int), 2)


def test_accuracy_counts_exact_matches():
    assert accuracy(np.array([1, 2, 3, 4]), np.array([1, 0, 3, 0])) == 0.5
    with pytest.raises(InputError):
        accuracy(np.array([1]), np.array([1, 2]))
    with pytest.raises(InputError):
        accuracy(np.array([], dtype=int), np.array([], dtype=int))


def test_evaluate_embeddings_report_contents():
    rng = np.random.default_rng(3)
    labels = np.repeat([0, 1], 60)
    emb = rng.standard_normal((120, 4)) + labels[:, None] * 3.0
    report = evaluate_embeddings(
        emb, labels, 2, SplitSpec(10, val_total=20), seeds=[0, 1, 2]
    )
    assert [r.seed for r in report.rows] == [0, 1, 2]
    tests = np.array([r.acc_test for r in report.rows])
    assert report.mean_test == pytest.approx(tests.mean())
    assert report.std_test == pytest.approx(tests.std(ddof=1))
    assert not report.degenerate
    assert report.mean_test > 0.9  # trivially separable

    text = report.to_tsv()
    lines = text.strip().split("\n")
    assert lines[0] == "seed\tacc_val\tacc_test"
    assert lines[-2].startswith("mean\t")
    assert lines[-1].startswith("std\t")
    assert float(lines[1].split("\t")[2]) == report.rows[0].acc_test


def test_evaluate_embeddings_flags_collapsed_embeddings():
    labels = np.repeat([0, 1], 30)
    emb = np.ones((60, 3))
    report = evaluate_embeddings(
        emb, labels, 2, SplitSpec(5, val_total=10), seeds=[0]
    )
    assert report.degenerate


def test_evaluate_embeddings_single_seed_has_zero_std():
    rng = np.random.default_rng(4)
    labels = np.repeat([0, 1], 30)
    emb = rng.standard_normal((60, 3))
    report = evaluate_embeddings(emb, labels, 2, SplitSpec(5, val_total=10), seeds=[7])
    assert report.std_test == 0.0 and report.std_val == 0.0


def test_evaluate_embeddings_input_checks():
    with pytest.raises(InputError, match="seed"):
        evaluate_embeddings(np.zeros((4, 2)), np.zeros(4, dtype=int), 1,
                            SplitSpec(1, val_total=0), seeds=[])
    with pytest.raises(InputError, match="labels"):
        evaluate_embeddings(np.zeros((4, 2)), np.zeros(3, dtype=int), 1,
                            SplitSpec(1, val_total=0), seeds=[0])


def test_run_ablation_covers_all_modes_and_seeds(sbm_tiny):
    config = TrainConfig(epochs=3, encoder_dims=[16, 8, 4], predictor_dims=[4, 6, 4])
    report = run_ablation(
        sbm_tiny, config, train_seeds=[0, 1],
        spec=SplitSpec(5, val_total=10),
    )
    assert len(report.rows) == 6
    modes = [s.view_mode for s in report.summaries]
    assert modes == ["both", "global-only", "local-only"]
    for summary in report.summaries:
        seeds = [r.seed for r in report.rows if r.view_mode == summary.view_mode]
        assert seeds == [0, 1]
        assert 0.0 <= summary.mean_test <= 1.0
    assert report.mean_test("both") == report.summaries[0].mean_test
    with pytest.raises(InputError):
        report.mean_test("sideways")


def test_run_ablation_requires_labels_and_seeds(sbm_tiny):
    config = TrainConfig(epochs=1, encoder_dims=[16, 4, 2], predictor_dims=[2, 2])
    with pytest.raises(InputError, match="seed"):
        run_ablation(sbm_tiny, config, train_seeds=[], spec=SplitSpec(5, val_total=10))
    from sngcl.graph import build_graph

    unlabeled = build_graph([(0, 1)], np.zeros((2, 16)))
    with pytest.raises(InputError, match="labeled"):
        run_ablation(unlabeled, config, train_seeds=[0], spec=SplitSpec(5, val_total=10))
