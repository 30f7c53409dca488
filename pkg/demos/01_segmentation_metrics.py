"""Scoring a segmentation: confusion matrix, the four metrics, label-set PR.

Builds a tiny prediction/truth pair by hand, walks through what each metric
measures, and shows that per-image matrices merge into the dataset matrix.
"""

import numpy as np

from holofilter import ConfusionMatrix, label_set_pr
from holofilter.metrics import REPORT_CSV_HEADER, present_labels


def main():
    truth = np.array([
        [0, 0, 1, 1],
        [0, 0, 1, 1],
        [2, 2, 2, 2],
        [2, 2, 2, 2],
    ])
    predicted = np.array([
        [0, 0, 1, 1],
        [0, 1, 1, 1],
        [2, 2, 2, 0],
        [2, 2, 2, 2],
    ])

    cm = ConfusionMatrix(3).accumulate(predicted, truth)
    print("confusion matrix (rows = truth, cols = predicted):")
    print(cm.counts)

    report = cm.compute()
    print("\npixel accuracy   :", round(report.pixel_acc, 4))
    print("mean accuracy    :", round(report.mean_acc, 4))
    print("mean IU          :", round(report.mean_iu, 4))
    print("freq-weighted IU :", round(report.fw_iu, 4))
    print("per-class IU     :", [round(v, 4) for v in report.per_class_iu])
    print("\nCSV form:")
    print(REPORT_CSV_HEADER)
    print(report.csv_row())

    # image-level label sets: what the holistic side of the pipeline scores
    pr = label_set_pr(present_labels(predicted), present_labels(truth))
    print("\nlabel-set precision:", pr.precision, "recall:", pr.recall)

    # per-image matrices merge exactly into the joint matrix, so evaluation
    # parallelizes over images
    top = ConfusionMatrix(3).accumulate(predicted[:2], truth[:2])
    bottom = ConfusionMatrix(3).accumulate(predicted[2:], truth[2:])
    merged = top.merge(bottom)
    print("\nmerge equals joint accumulation:",
          bool(np.array_equal(merged.counts, cm.counts)))


if __name__ == "__main__":
    main()
