"""Training the toy two-stream network on the colored-shapes dataset.

Three variants share the same initialization and data order:

- ``baseline``      segmentation stream only, no filtering;
- ``holistic``      the full two-stream net, trained through the soft filter
                    with both losses;
- ``holistic_gt``   the filter driven by oracle image-level labels, an upper
                    bound on what a perfect holistic branch could deliver.

Writes color renders of one validation image's truth and predictions.
"""

import os

import numpy as np

from holofilter import NetworkConfig, evaluate, make_shapes_dataset, predict, train
from holofilter.fileio import render_labels, write_ppm

OUT_DIR = os.path.join(os.path.dirname(__file__), "out")
SEED = 3


def main():
    os.makedirs(OUT_DIR, exist_ok=True)
    config = NetworkConfig(num_classes=5, feature_channels=8,
                           hidden_channels=16, epochs=8, learning_rate=0.015,
                           momentum=0.99)
    train_data = make_shapes_dataset(25, 32, 32, config.num_classes, seed=SEED)
    val_data = make_shapes_dataset(16, 32, 32, config.num_classes,
                                   seed=SEED + 0x7A1)
    print(f"25 train / 16 val images, {config.epochs} epochs of batch-1 SGD "
          f"(momentum {config.momentum})\n")

    results = {}
    for variant in ("baseline", "holistic", "holistic_gt"):
        params, log = train(train_data, config, seed=SEED, variant=variant,
                            val_data=val_data)
        results[variant] = params
        curve = " ".join(f"{e.val_mean_iu:.3f}" for e in log)
        print(f"{variant:<12} final loss {log[-1].total_loss:.4f}  "
              f"val mIU per epoch: {curve}")

    print("\nfinal validation metrics:")
    for variant, params in results.items():
        report = evaluate(params, config, val_data, variant)
        print(f"  {variant:<12} pAcc {report.pixel_acc:.4f}  "
              f"mIU {report.mean_iu:.4f}")

    sample = val_data[0]
    write_ppm(os.path.join(OUT_DIR, "val0_truth.ppm"),
              render_labels(sample.truth))
    for variant, params in results.items():
        rgb = render_labels(predict(params, config, sample, variant))
        write_ppm(os.path.join(OUT_DIR, f"val0_{variant}.ppm"), rgb)
    print(f"\nwrote truth/prediction renders for one validation image "
          f"to {OUT_DIR}")


if __name__ == "__main__":
    main()
