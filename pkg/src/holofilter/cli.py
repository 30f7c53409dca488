"""Command-line front end.

Every subcommand is a thin adapter over the library: it parses and validates
its inputs, calls the corresponding functions, and serializes the result.
All randomness is controlled by explicit --seed flags; failures exit nonzero
with a single-line diagnostic.
"""

from __future__ import annotations

import argparse
import os
import sys

import numpy as np

from . import fileio, gradcheck, network
from .contamination import (DEFAULT_GRID, GRID_CSV_HEADER, render_surface,
                            run_grid)
from .filtering import (ScoreMapSet, filter_then_upsample, hard_filter_argmax,
                        soft_filter)
from .metrics import REPORT_CSV_HEADER, ConfusionMatrix


class CliError(Exception):
    """User-facing failure; rendered as one line on stderr."""


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise CliError(f"{self.prog}: {message}")


def _float_list(text):
    try:
        return [float(part) for part in text.split(",") if part.strip() != ""]
    except ValueError:
        raise CliError(f"expected comma-separated numbers, got {text!r}")


def _paired_files(directory, suffix):
    if not os.path.isdir(directory):
        raise CliError(f"not a directory: {directory}")
    names = sorted(f for f in os.listdir(directory) if f.endswith(suffix))
    if not names:
        raise CliError(f"no {suffix} files in {directory}")
    return names


def _write_lines(path, lines):
    with open(path, "w") as fh:
        fh.write("".join(line + "\n" for line in lines))


def _cmd_eval(args):
    pred_names = _paired_files(args.pred_dir, ".pgm")
    truth_names = _paired_files(args.truth_dir, ".pgm")
    if pred_names != truth_names:
        raise CliError("prediction and truth directories hold different file names")
    cm = ConfusionMatrix(args.classes)
    for name in pred_names:
        pred = fileio.read_label_map(os.path.join(args.pred_dir, name))
        truth = fileio.read_label_map(os.path.join(args.truth_dir, name))
        cm.accumulate(pred, truth, args.ignore)
    lines = [REPORT_CSV_HEADER, cm.compute().csv_row()]
    if args.csv:
        _write_lines(args.csv, lines)
    print("\n".join(lines))
    return 0


def _cmd_filter_hard(args):
    scores = fileio.read_tensor(args.scores)
    with open(args.labels_file) as fh:
        tokens = fh.read().split()
    if not tokens:
        raise CliError(f"no labels in {args.labels_file}")
    try:
        allowed = {int(t) for t in tokens}
    except ValueError:
        raise CliError(f"labels file {args.labels_file} must hold integers")
    fileio.write_label_map(args.out, hard_filter_argmax(scores, allowed))
    return 0


def _cmd_filter_soft(args):
    seg = fileio.read_tensor(args.scores)
    conf = fileio.read_tensor(args.conf)
    if conf.ndim != 1:
        raise CliError(f"confidence tensor must be rank 1, got rank {conf.ndim}")
    if args.upsample:
        out_h, out_w = args.upsample
        result = filter_then_upsample(seg, conf, out_h, out_w, args.eps,
                                      upsample_first=args.filter_after_upsample)
    else:
        if args.filter_after_upsample:
            raise CliError("--filter-after-upsample requires --upsample")
        result = soft_filter(seg, conf, args.eps)
    fileio.write_tensor(args.out, result)
    return 0


def _load_scoremaps(scores_dir, truth_dir):
    score_names = _paired_files(scores_dir, ".hstn")
    stems = [os.path.splitext(n)[0] for n in score_names]
    data = []
    for name, stem in zip(score_names, stems):
        truth_path = os.path.join(truth_dir, stem + ".pgm")
        if not os.path.exists(truth_path):
            raise CliError(f"missing truth map {truth_path}")
        scores = fileio.read_tensor(os.path.join(scores_dir, name))
        if scores.ndim != 3:
            raise CliError(f"{name}: score tensors must be rank 3")
        data.append(ScoreMapSet(scores, fileio.read_label_map(truth_path)))
    return data


def _cmd_contaminate_grid(args):
    data = _load_scoremaps(args.scores_dir, args.truth_dir)
    add_counts = args.np_list if args.np_list is not None else list(DEFAULT_GRID)
    remove_counts = args.nr_list if args.nr_list is not None else list(DEFAULT_GRID)
    records = run_grid(data, add_counts, remove_counts, seed=args.seed,
                       ignore_label=args.ignore)
    _write_lines(args.csv, [GRID_CSV_HEADER] + [r.csv_row() for r in records])
    if args.heatmap:
        baseline_cm = ConfusionMatrix(data[0].num_classes)
        for sms in data:
            baseline_cm.accumulate(np.argmax(sms.scores, axis=-1), sms.truth,
                                   args.ignore)
        baseline = baseline_cm.compute().mean_iu
        rgb, meta = render_surface(records, "mean_iu", cell_px=args.cell_px,
                                   baseline=baseline)
        fileio.write_ppm(args.heatmap, rgb, comments=[
            f"metric=mean_iu min={meta['min']:.6f} max={meta['max']:.6f}",
            f"baseline_unfiltered={baseline:.6f}",
        ])
    return 0


def _cmd_gradcheck(args):
    if (args.op is None) == (not args.full_net):
        raise CliError("choose exactly one of --op NAME or --full-net")
    failed = False
    if args.full_net:
        tol = args.tol if args.tol is not None else gradcheck.NETWORK_TOL
        errors, holistic_path = gradcheck.check_network(seed=args.seed)
        for name, err in errors.items():
            status = "PASS" if err < tol else "FAIL"
            failed |= err >= tol
            print(f"{name}: max_rel_err={err:.3e} tol={tol:.1e} {status}")
        path_ok = holistic_path > 0.0
        failed |= not path_ok
        print(f"holistic_branch_grad: max_abs={holistic_path:.3e} "
              f"{'PASS' if path_ok else 'FAIL'}")
    else:
        tol = args.tol if args.tol is not None else gradcheck.op_tolerance(args.op)
        err = gradcheck.check_op(args.op, seed=args.seed)
        failed = err >= tol
        print(f"{args.op}: max_rel_err={err:.3e} tol={tol:.1e} "
              f"{'FAIL' if failed else 'PASS'}")
    return 1 if failed else 0


_TRAIN_KEYS = {
    "classes": int, "feature_channels": int, "downsample": int,
    "kernel_size": int, "dilation": int, "hidden_channels": int,
    "patch_size": int, "loss_balance": float, "learning_rate": float,
    "momentum": float, "epochs": int, "eps": float, "ignore_label": int,
    "augment": bool, "skip_fusion": bool, "images": int, "image_size": int,
    "val_images": int,
}

_TRAIN_DEFAULTS = {
    "classes": 5, "images": 25, "image_size": 32, "val_images": 16,
    "feature_channels": 8, "hidden_channels": 16, "epochs": 8,
}


def _parse_config_file(path):
    values = {}
    try:
        with open(path) as fh:
            lines = fh.readlines()
    except OSError as exc:
        raise CliError(f"cannot read config file: {exc}")
    for lineno, raw in enumerate(lines, start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise CliError(f"{path}:{lineno}: expected key=value, got {line!r}")
        key, _, value = line.partition("=")
        values[key.strip()] = value.strip()
    return values


def _coerce(key, raw):
    kind = _TRAIN_KEYS[key]
    if kind is bool:
        lowered = str(raw).lower()
        if lowered in ("1", "true", "yes"):
            return True
        if lowered in ("0", "false", "no"):
            return False
        raise CliError(f"config key {key}: expected a boolean, got {raw!r}")
    try:
        return kind(raw)
    except (TypeError, ValueError):
        raise CliError(f"config key {key}: expected {kind.__name__}, got {raw!r}")


def _build_train_settings(args):
    settings = dict(_TRAIN_DEFAULTS)
    if args.config:
        for key, raw in _parse_config_file(args.config).items():
            if key not in _TRAIN_KEYS:
                raise CliError(f"unknown config key {key!r}")
            settings[key] = _coerce(key, raw)
    for key in ("classes", "epochs", "images", "image_size", "learning_rate"):
        flag = getattr(args, key)
        if flag is not None:
            settings[key] = _coerce(key, flag)
    images = settings.pop("images")
    image_size = settings.pop("image_size")
    val_images = settings.pop("val_images")
    settings["num_classes"] = settings.pop("classes")
    try:
        config = network.NetworkConfig(**settings)
    except ValueError as exc:
        raise CliError(str(exc))
    if images < 1 or val_images < 0 or image_size < 8:
        raise CliError("need images >= 1, val_images >= 0, image_size >= 8")
    return config, images, image_size, val_images


def _cmd_train_toy(args):
    config, images, image_size, val_images = _build_train_settings(args)
    dataset = network.make_shapes_dataset(images, image_size, image_size,
                                          config.num_classes, seed=args.seed)
    val_data = None
    if val_images:
        val_data = network.make_shapes_dataset(val_images, image_size, image_size,
                                               config.num_classes,
                                               seed=args.seed + 0x7A1)
    params, log = network.train(dataset, config, seed=args.seed,
                                variant=args.variant, val_data=val_data)
    fileio.save_checkpoint(args.out_checkpoint, params.weights)
    lines = ["epoch,seg_loss,cls_loss,total_loss,val_mIU"]
    for entry in log:
        val = "" if entry.val_mean_iu is None else f"{entry.val_mean_iu:.6f}"
        lines.append(f"{entry.epoch},{entry.seg_loss:.6f},{entry.cls_loss:.6f},"
                     f"{entry.total_loss:.6f},{val}")
    _write_lines(args.log, lines)
    final = log[-1] if log else None
    if final is not None:
        print(f"trained {args.variant} for {config.epochs} epochs: "
              f"final total loss {final.total_loss:.6f}")
    return 0


def _cmd_render(args):
    labels = fileio.read_label_map(args.labels)
    rgb = fileio.render_labels(labels, palette_seed=args.palette_seed,
                               ignore_label=args.ignore)
    fileio.write_ppm(args.out, rgb)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="holofilter",
                     description="Holistic label filtering for semantic "
                                 "segmentation: metrics, filters, contamination "
                                 "grids, and a toy two-stream network.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("eval", help="score predictions against truth label maps")
    p.add_argument("--pred-dir", required=True)
    p.add_argument("--truth-dir", required=True)
    p.add_argument("--classes", type=int, required=True)
    p.add_argument("--ignore", type=int, default=255)
    p.add_argument("--csv", help="also write the CSV to this file")
    p.set_defaults(func=_cmd_eval)

    p = sub.add_parser("filter-hard", help="argmax restricted to a label set")
    p.add_argument("--scores", required=True, help="score tensor (.hstn)")
    p.add_argument("--labels-file", required=True,
                   help="text file of allowed label ids")
    p.add_argument("--out", required=True, help="output label map (.pgm)")
    p.set_defaults(func=_cmd_filter_hard)

    p = sub.add_parser("filter-soft", help="differentiable holistic filter")
    p.add_argument("--scores", required=True)
    p.add_argument("--conf", required=True, help="confidence tensor (.hstn)")
    p.add_argument("--eps", type=float, default=1e-7)
    p.add_argument("--out", required=True)
    p.add_argument("--upsample", nargs=2, type=int, metavar=("H", "W"))
    p.add_argument("--filter-after-upsample", action="store_true",
                   help="upsample first, then filter (costlier order)")
    p.set_defaults(func=_cmd_filter_soft)

    p = sub.add_parser("contaminate-grid",
                       help="sweep label-set contamination and hard-filter")
    p.add_argument("--scores-dir", required=True)
    p.add_argument("--truth-dir", required=True)
    p.add_argument("--np-list", type=_float_list,
                   help="comma-separated added-label counts (default full grid)")
    p.add_argument("--nr-list", type=_float_list,
                   help="comma-separated removed-label counts (default full grid)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--csv", required=True)
    p.add_argument("--heatmap", help="also write a mean-IU heatmap (.ppm)")
    p.add_argument("--ignore", type=int, default=255)
    p.add_argument("--cell-px", type=int, default=12)
    p.set_defaults(func=_cmd_contaminate_grid)

    p = sub.add_parser("gradcheck", help="finite-difference gradient checks")
    p.add_argument("--op", choices=sorted(gradcheck.OP_NAMES))
    p.add_argument("--full-net", action="store_true",
                   help="check the training objective against every weight tensor")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--tol", type=float)
    p.set_defaults(func=_cmd_gradcheck)

    p = sub.add_parser("train-toy", help="train the toy network on shapes data")
    p.add_argument("--variant", choices=network.VARIANTS, required=True)
    p.add_argument("--config", help="key=value settings file (flags win)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out-checkpoint", required=True, help="checkpoint directory")
    p.add_argument("--log", required=True, help="epoch log CSV path")
    p.add_argument("--classes", type=int)
    p.add_argument("--epochs", type=int)
    p.add_argument("--images", type=int)
    p.add_argument("--image-size", type=int, dest="image_size")
    p.add_argument("--learning-rate", type=float, dest="learning_rate")
    p.set_defaults(func=_cmd_train_toy)

    p = sub.add_parser("render", help="color-code a label map as PPM")
    p.add_argument("--labels", required=True, help="input label map (.pgm)")
    p.add_argument("--out", required=True, help="output image (.ppm)")
    p.add_argument("--palette-seed", type=int, default=0)
    p.add_argument("--ignore", type=int, default=255)
    p.set_defaults(func=_cmd_render)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (ValueError, OSError) as exc:
        message = " ".join(str(exc).split())
        print(f"error: {message}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
