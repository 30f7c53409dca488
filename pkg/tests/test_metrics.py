import numpy as np
import pytest

from holofilter.metrics import (REPORT_CSV_HEADER, ConfusionMatrix, LabelSetPR,
                                label_set_pr, present_labels)


def counting_oracle(predicted, truth, num_classes, ignore_label=255):
    """Per-pixel loop counter, independent of the bincount path."""
    counts = np.zeros((num_classes, num_classes), dtype=np.int64)
    for p, t in zip(np.asarray(predicted).ravel(), np.asarray(truth).ravel()):
        if p == ignore_label or t == ignore_label:
            continue
        counts[t, p] += 1
    return counts


def formula_oracle(counts):
    """Direct evaluation of the four metric formulas from raw counts."""
    counts = np.asarray(counts, dtype=np.int64)
    c = counts.shape[0]
    diag = [counts[i, i] for i in range(c)]
    t = [counts[i, :].sum() for i in range(c)]
    pred = [counts[:, i].sum() for i in range(c)]
    pacc = sum(diag) / sum(t)
    accs = [diag[i] / t[i] for i in range(c) if t[i] > 0]
    macc = sum(accs) / len(accs)
    ius = {i: diag[i] / (t[i] + pred[i] - diag[i])
           for i in range(c) if t[i] + pred[i] - diag[i] > 0}
    miu = sum(ius.values()) / len(ius)
    fwiu = sum(t[i] * iu for i, iu in ius.items()) / sum(t)
    return pacc, macc, miu, fwiu


def random_maps(rng, num_classes, shape=(32, 32), ignore_frac=0.1):
    truth = rng.integers(0, num_classes, size=shape)
    predicted = rng.integers(0, num_classes, size=shape)
    mask = rng.random(shape) < ignore_frac
    truth = np.where(mask, 255, truth)
    return predicted, truth


def test_accumulate_diagonal_only():
    truth = np.arange(16).reshape(4, 4) % 3
    cm = ConfusionMatrix(3).accumulate(truth, truth)
    assert np.array_equal(cm.counts, np.diag(np.diag(cm.counts)))
    assert cm.counts.sum() == 16


def test_accumulate_cross_counts():
    cm = ConfusionMatrix(2).accumulate(np.ones((2, 5), dtype=int),
                                       np.zeros((2, 5), dtype=int))
    assert cm.counts[0, 1] == 10
    assert cm.counts.sum() == 10


def test_accumulate_matches_loop_oracle():
    rng = np.random.default_rng(0)
    predicted, truth = random_maps(rng, 5)
    cm = ConfusionMatrix(5).accumulate(predicted, truth)
    assert np.array_equal(cm.counts, counting_oracle(predicted, truth, 5))


def test_accumulate_rejects_mismatched_shapes_and_labels():
    cm = ConfusionMatrix(3)
    with pytest.raises(ValueError):
        cm.accumulate(np.zeros((2, 2), int), np.zeros((2, 3), int))
    with pytest.raises(ValueError):
        cm.accumulate(np.full((2, 2), 3), np.zeros((2, 2), int))
    with pytest.raises(ValueError):
        cm.accumulate(np.zeros((2, 2), int), np.full((2, 2), -1))


def test_ignore_label_excluded_both_ways():
    predicted = np.array([[0, 255], [1, 1]])
    truth = np.array([[0, 0], [255, 1]])
    cm = ConfusionMatrix(2).accumulate(predicted, truth)
    assert cm.counts.sum() == 2
    assert cm.counts[0, 0] == 1 and cm.counts[1, 1] == 1


def test_hand_checked_metrics():
    report = ConfusionMatrix(2, [[3, 1], [0, 4]]).compute()
    assert report.pixel_acc == 0.875
    assert report.mean_acc == 0.875
    assert report.mean_iu == 0.775
    assert report.fw_iu == 0.775
    assert report.per_class_iu == [0.75, 0.8]
    assert report.valid_classes == 2


def test_perfect_prediction_scores_one():
    counts = np.diag([7, 11, 2])
    report = ConfusionMatrix(3, counts).compute()
    assert (report.pixel_acc, report.mean_acc, report.mean_iu, report.fw_iu) \
        == (1.0, 1.0, 1.0, 1.0)


def test_compute_matches_formula_oracle():
    rng = np.random.default_rng(1)
    for _ in range(20):
        counts = rng.integers(0, 50, size=(6, 6))
        counts[rng.integers(0, 6)] = 0  # an absent class
        if counts.sum() == 0:
            continue
        report = ConfusionMatrix(6, counts).compute()
        pacc, macc, miu, fwiu = formula_oracle(counts)
        assert report.pixel_acc == pytest.approx(pacc, abs=1e-12)
        assert report.mean_acc == pytest.approx(macc, abs=1e-12)
        assert report.mean_iu == pytest.approx(miu, abs=1e-12)
        assert report.fw_iu == pytest.approx(fwiu, abs=1e-12)


def test_compute_rejects_empty_matrix():
    with pytest.raises(ValueError):
        ConfusionMatrix(4).compute()


def test_merge_equals_joint_accumulation():
    rng = np.random.default_rng(2)
    pairs = [random_maps(rng, 4) for _ in range(6)]
    joint = ConfusionMatrix(4)
    for predicted, truth in pairs:
        joint.accumulate(predicted, truth)
    merged = ConfusionMatrix(4)
    for predicted, truth in pairs[:3]:
        merged.accumulate(predicted, truth)
    other = ConfusionMatrix(4)
    for predicted, truth in pairs[3:]:
        other.accumulate(predicted, truth)
    merged = merged.merge(other)
    assert np.array_equal(merged.counts, joint.counts)
    r1, r2 = merged.compute(), joint.compute()
    assert (r1.pixel_acc, r1.mean_acc, r1.mean_iu, r1.fw_iu) \
        == (r2.pixel_acc, r2.mean_acc, r2.mean_iu, r2.fw_iu)


def test_merge_commutes():
    rng = np.random.default_rng(3)
    a = ConfusionMatrix(3, rng.integers(0, 9, size=(3, 3)))
    b = ConfusionMatrix(3, rng.integers(0, 9, size=(3, 3)))
    assert np.array_equal(a.merge(b).counts, b.merge(a).counts)


def test_metrics_invariant_under_class_permutation():
    rng = np.random.default_rng(4)
    predicted, truth = random_maps(rng, 5)
    perm = rng.permutation(5)
    relabel = np.concatenate([perm, [255] * 251])  # ignore maps to itself
    base = ConfusionMatrix(5).accumulate(predicted, truth).compute()
    permuted = ConfusionMatrix(5).accumulate(relabel[predicted],
                                             relabel[truth]).compute()
    for field in ("pixel_acc", "mean_acc", "mean_iu", "fw_iu"):
        assert abs(getattr(base, field) - getattr(permuted, field)) < 1e-12


def test_per_class_iu_bounded_by_per_class_accuracy():
    rng = np.random.default_rng(5)
    counts = rng.integers(0, 30, size=(5, 5))
    report = ConfusionMatrix(5, counts).compute()
    for i, iu in enumerate(report.per_class_iu):
        t_i = counts[i].sum()
        if iu is None or t_i == 0:
            continue
        # exact integer cross-check: n_ii * t_i <= n_ii * union_i
        union = t_i + counts[:, i].sum() - counts[i, i]
        assert counts[i, i] * t_i <= counts[i, i] * union
        assert iu <= counts[i, i] / t_i


def test_label_set_pr_cases():
    assert label_set_pr({1, 2}, {1, 2}) == LabelSetPR(1.0, 1.0)
    pr = label_set_pr({2, 3, 7, 9}, {1, 2, 3})
    assert pr.precision == 0.5
    assert pr.recall == pytest.approx(2 / 3)
    assert label_set_pr(set(), {1}) == LabelSetPR(0.0, 0.0)


def test_label_set_pr_superset_recalls_everything():
    assert label_set_pr({0, 1, 2, 3}, {1, 2}).recall == 1.0


def test_label_set_pr_rejects_empty_truth():
    with pytest.raises(ValueError):
        label_set_pr({1}, set())


def test_present_labels():
    labels = np.array([[0, 2], [255, 2]])
    assert present_labels(labels, 255) == {0, 2}
    assert present_labels(labels) == {0, 2, 255}


def test_csv_row_format():
    report = ConfusionMatrix(2, [[3, 1], [0, 4]]).compute()
    assert REPORT_CSV_HEADER == "pAcc,mAcc,mIU,fwIU,valid_classes"
    assert report.csv_row() == "0.875000,0.875000,0.775000,0.775000,2"
