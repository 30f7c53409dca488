"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

Run with ``pytest tests/test_acceptance.py -v -s`` to see the per-criterion
lines. Tolerances and runtime budgets are pinned here, not configurable.
"""

import time
from contextlib import contextmanager

import numpy as np

from holofilter import fileio, gradcheck
from holofilter import network as N
from holofilter.cli import main
from holofilter.contamination import make_noisy_scoremaps, run_grid
from holofilter.filtering import hard_filter_argmax
from holofilter.metrics import ConfusionMatrix


@contextmanager
def criterion(num, name, budget_s=None):
    start = time.perf_counter()
    try:
        yield
    except Exception:
        print(f"\n[acceptance] criterion {num} ({name}): FAIL")
        raise
    elapsed = time.perf_counter() - start
    print(f"\n[acceptance] criterion {num} ({name}): PASS ({elapsed:.1f}s)")
    if budget_s is not None:
        assert elapsed < budget_s, f"runtime {elapsed:.1f}s exceeds {budget_s}s"


# ---------------------------------------------------------------------------
# criterion 1: metric oracle equivalence


def brute_force_counts(predicted, truth, num_classes, ignore_label=255):
    counts = np.zeros((num_classes, num_classes), dtype=np.int64)
    for p, t in zip(predicted.ravel(), truth.ravel()):
        if p == ignore_label or t == ignore_label:
            continue
        counts[t, p] += 1
    return counts


def formula_metrics(counts):
    c = counts.shape[0]
    diag = [int(counts[i, i]) for i in range(c)]
    t = [int(counts[i, :].sum()) for i in range(c)]
    pred = [int(counts[:, i].sum()) for i in range(c)]
    pacc = sum(diag) / sum(t)
    accs = [diag[i] / t[i] for i in range(c) if t[i] > 0]
    ius = {i: diag[i] / (t[i] + pred[i] - diag[i])
           for i in range(c) if t[i] + pred[i] - diag[i] > 0}
    macc = sum(accs) / len(accs)
    miu = sum(ius.values()) / len(ius)
    fwiu = sum(t[i] * iu for i, iu in ius.items()) / sum(t)
    return pacc, macc, miu, fwiu


def test_criterion_1_metric_oracle_equivalence():
    with criterion(1, "metric oracle equivalence", budget_s=5.0):
        rng = np.random.default_rng(100)
        for _ in range(200):
            c = int(rng.integers(2, 9))
            truth = rng.integers(0, c, size=(32, 32))
            predicted = rng.integers(0, c, size=(32, 32))
            truth[rng.random((32, 32)) < 0.08] = 255
            predicted[rng.random((32, 32)) < 0.02] = 255
            cm = ConfusionMatrix(c).accumulate(predicted, truth)
            want_counts = brute_force_counts(predicted, truth, c)
            assert np.array_equal(cm.counts, want_counts)
            report = cm.compute()
            pacc, macc, miu, fwiu = formula_metrics(want_counts)
            assert abs(report.pixel_acc - pacc) < 1e-12
            assert abs(report.mean_acc - macc) < 1e-12
            assert abs(report.mean_iu - miu) < 1e-12
            assert abs(report.fw_iu - fwiu) < 1e-12


# ---------------------------------------------------------------------------
# criterion 2: hand-checked metrics


def test_criterion_2_hand_checked_metrics():
    with criterion(2, "hand-checked metrics"):
        report = ConfusionMatrix(2, [[3, 1], [0, 4]]).compute()
        assert report.pixel_acc == 0.875
        assert report.mean_acc == 0.875
        assert report.mean_iu == 0.775
        assert report.fw_iu == 0.775


# ---------------------------------------------------------------------------
# criterion 3: pixel-accuracy monotonicity under superset filtering


def test_criterion_3_superset_filtering_monotonicity():
    with criterion(3, "superset filtering never lowers pAcc"):
        rng = np.random.default_rng(200)
        violations = 0
        for _ in range(100):
            c = int(rng.integers(4, 9))
            h, w = (int(v) for v in rng.integers(6, 16, size=2))
            scores = rng.normal(size=(h, w, c))
            truth = rng.integers(0, c, size=(h, w))
            truth_set = {int(v) for v in np.unique(truth)}
            extras = {int(v) for v in rng.choice(c, size=int(rng.integers(0, 3)))}
            superset = truth_set | extras
            plain = ConfusionMatrix(c).accumulate(
                np.argmax(scores, axis=-1), truth).compute().pixel_acc
            filtered = ConfusionMatrix(c).accumulate(
                hard_filter_argmax(scores, superset), truth).compute().pixel_acc
            violations += filtered < plain
        assert violations == 0


# ---------------------------------------------------------------------------
# criterion 4: contamination grid shape


def test_criterion_4_contamination_grid_shape():
    with criterion(4, "recall dominates, precision is flat", budget_s=60.0):
        data = make_noisy_scoremaps(100, 20, 20, num_classes=24,
                                    labels_per_image=12, margin=4.0, noise=3.0,
                                    absent_penalty=4.0, seed=7)
        levels = [float(v) for v in range(11)]
        removal_sweep = run_grid(data, add_counts=[0.0], remove_counts=levels,
                                 seed=3)
        mius = [rec.report.mean_iu for rec in removal_sweep]
        assert all(a >= b for a, b in zip(mius, mius[1:])), \
            f"mean IU not non-increasing over removals: {mius}"

        addition_sweep = run_grid(data, add_counts=levels, remove_counts=[0.0],
                                  seed=3)
        paccs = [rec.report.pixel_acc for rec in addition_sweep]
        spread = max(paccs) - min(paccs)
        drop = removal_sweep[0].report.pixel_acc - removal_sweep[-1].report.pixel_acc
        assert drop > 0
        assert spread < 0.1 * drop, \
            f"pAcc spread {spread:.4f} is not < 10% of removal drop {drop:.4f}"


# ---------------------------------------------------------------------------
# criterion 5: gradient verification


def test_criterion_5_gradient_verification():
    with criterion(5, "gradient checks", budget_s=120.0):
        primitives = ("sigmoid", "logit", "relu", "softmax_channel", "conv2d",
                      "global_max_pool", "bilinear_upsample")
        for name in primitives:
            err = gradcheck.check_op(name, seed=0)
            assert err < 1e-6, f"{name}: {err:.3e}"
        composite = gradcheck.check_op("soft_filter", seed=0)
        assert composite < 1e-4, f"soft_filter: {composite:.3e}"

        errors, holistic_path = gradcheck.check_network(seed=0, image_size=16)
        for name, err in errors.items():
            assert err < 1e-3, f"{name}: {err:.3e}"
        assert holistic_path > 0.0, "no gradient reaches the patch head " \
                                    "through the soft filter"


# ---------------------------------------------------------------------------
# criterion 6: training smoke and variant ordering (via the CLI)

TRAIN_SEED = 3
TRAIN_SETTINGS = {
    "classes": 5, "images": 25, "image_size": 32, "val_images": 16,
    "feature_channels": 8, "hidden_channels": 16, "epochs": 8,
    "learning_rate": 0.015, "momentum": 0.99,
}


def write_train_config(tmp_path):
    path = tmp_path / "train.cfg"
    path.write_text("".join(f"{k}={v}\n" for k, v in TRAIN_SETTINGS.items()))
    return path


def train_config():
    return N.NetworkConfig(num_classes=TRAIN_SETTINGS["classes"],
                           feature_channels=TRAIN_SETTINGS["feature_channels"],
                           hidden_channels=TRAIN_SETTINGS["hidden_channels"],
                           epochs=TRAIN_SETTINGS["epochs"],
                           learning_rate=TRAIN_SETTINGS["learning_rate"],
                           momentum=TRAIN_SETTINGS["momentum"])


def run_train_toy(tmp_path, variant, tag=""):
    log = tmp_path / f"{variant}{tag}.csv"
    ckpt = tmp_path / f"ckpt_{variant}{tag}"
    code = main(["train-toy", "--variant", variant,
                 "--config", str(write_train_config(tmp_path)),
                 "--seed", str(TRAIN_SEED),
                 "--out-checkpoint", str(ckpt), "--log", str(log)])
    assert code == 0
    return log, ckpt


def final_val_miu(log_path):
    last = log_path.read_text().splitlines()[-1]
    return float(last.rsplit(",", 1)[1])


def test_criterion_6_training_smoke_and_ordering(tmp_path):
    with criterion(6, "200-step training halves loss; gt filter >= baseline",
                   budget_s=300.0):
        # 25 images x 8 epochs = 200 batch-1 steps
        _, ckpt = run_train_toy(tmp_path, "holistic")
        config = train_config()
        dataset = N.make_shapes_dataset(TRAIN_SETTINGS["images"],
                                        TRAIN_SETTINGS["image_size"],
                                        TRAIN_SETTINGS["image_size"],
                                        config.num_classes, seed=TRAIN_SEED)
        init_loss = N.dataset_loss(N.init_params(config, TRAIN_SEED), config,
                                   dataset, "holistic").total
        trained = N.NetworkParams(fileio.load_checkpoint(ckpt), {})
        final_loss = N.dataset_loss(trained, config, dataset, "holistic").total
        assert final_loss <= 0.5 * init_loss, \
            f"loss only fell {init_loss:.4f} -> {final_loss:.4f}"

        gt_log, _ = run_train_toy(tmp_path, "holistic_gt")
        base_log, _ = run_train_toy(tmp_path, "baseline")
        gt_miu = final_val_miu(gt_log)
        base_miu = final_val_miu(base_log)
        assert gt_miu >= base_miu, \
            f"gt-filtered val mIU {gt_miu:.4f} < baseline {base_miu:.4f}"


# ---------------------------------------------------------------------------
# criterion 7: determinism and formats


def test_criterion_7_determinism_and_formats(tmp_path):
    with criterion(7, "deterministic replays and bit-exact formats"):
        # contaminate-grid byte-identical replay
        scores_dir = tmp_path / "scores"
        truth_dir = tmp_path / "truth"
        scores_dir.mkdir()
        truth_dir.mkdir()
        data = make_noisy_scoremaps(6, 10, 10, num_classes=12,
                                    labels_per_image=6, seed=4)
        for i, sms in enumerate(data):
            fileio.write_tensor(scores_dir / f"i{i}.hstn", sms.scores)
            fileio.write_label_map(truth_dir / f"i{i}.pgm", sms.truth)
        grid_args = ["contaminate-grid", "--scores-dir", str(scores_dir),
                     "--truth-dir", str(truth_dir), "--np-list", "0,2",
                     "--nr-list", "0,1,2", "--seed", "11"]
        csvs, ppms = [], []
        for tag in ("x", "y"):
            csv = tmp_path / f"grid_{tag}.csv"
            ppm = tmp_path / f"grid_{tag}.ppm"
            assert main(grid_args + ["--csv", str(csv),
                                     "--heatmap", str(ppm)]) == 0
            csvs.append(csv.read_bytes())
            ppms.append(ppm.read_bytes())
        assert csvs[0] == csvs[1]
        assert ppms[0] == ppms[1]

        # train-toy byte-identical replay (short run)
        cfg = tmp_path / "short.cfg"
        cfg.write_text("classes=4\nimages=5\nimage_size=16\nval_images=3\n"
                       "feature_channels=5\nhidden_channels=8\nepochs=2\n"
                       "learning_rate=0.01\n")
        logs = []
        for tag in ("x", "y"):
            log = tmp_path / f"train_{tag}.csv"
            assert main(["train-toy", "--variant", "holistic", "--config",
                         str(cfg), "--seed", "2",
                         "--out-checkpoint", str(tmp_path / f"ck_{tag}"),
                         "--log", str(log)]) == 0
            logs.append(log.read_bytes())
        assert logs[0] == logs[1]

        # container and netpbm round trips are bit-exact
        rng = np.random.default_rng(12)
        tensor_a = tmp_path / "t_a.hstn"
        tensor_b = tmp_path / "t_b.hstn"
        fileio.write_tensor(tensor_a, rng.normal(size=(4, 3, 2)))
        fileio.write_tensor(tensor_b, fileio.read_tensor(tensor_a))
        assert tensor_a.read_bytes() == tensor_b.read_bytes()

        labels = rng.integers(0, 300, size=(7, 5))
        pgm_a, pgm_b = tmp_path / "l_a.pgm", tmp_path / "l_b.pgm"
        fileio.write_label_map(pgm_a, labels)
        fileio.write_label_map(pgm_b, fileio.read_label_map(pgm_a))
        assert pgm_a.read_bytes() == pgm_b.read_bytes()

        rgb = rng.integers(0, 256, size=(5, 4, 3), dtype=np.uint8)
        ppm_a, ppm_b = tmp_path / "r_a.ppm", tmp_path / "r_b.ppm"
        fileio.write_ppm(ppm_a, rgb, comments=["round trip"])
        fileio.write_ppm(ppm_b, fileio.read_ppm(ppm_a), comments=["round trip"])
        assert ppm_a.read_bytes() == ppm_b.read_bytes()
