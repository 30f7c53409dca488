"""Holistic label filtering for semantic segmentation.

Library layout:

- ``tensor``: dense-map ops (conv, pooling, upsampling, activations) with
  matching vector-Jacobian products and a finite-difference gradient checker.
- ``metrics``: confusion-matrix accumulation, pixel/mean accuracy, mean and
  frequency-weighted IU, label-set precision/recall.
- ``filtering``: hard label-set filtering and the differentiable soft filter.
- ``contamination``: seeded degradation of ground-truth label sets and the
  precision/recall sweep of hard filtering over its grid.
- ``network``: toy two-stream segmentation network with both losses and a
  batch-1 momentum-SGD training loop.
- ``fileio``: tensor container, PGM/PPM codecs, checkpoints, label rendering.
- ``gradcheck``: standard gradient-check instances for every op and the net.
- ``cli``: the ``holofilter`` command-line tool.
"""

from .contamination import (ContaminationSpec, GridRecord, contaminate,
                            make_noisy_scoremaps, render_surface, run_grid)
from .filtering import (GT_CONFIDENCE, ScoreMapSet, filter_then_upsample,
                        gt_confidence, hard_filter_argmax, soft_filter,
                        soft_filter_backward, threshold_labels)
from .metrics import (ConfusionMatrix, LabelSetPR, MetricReport, label_set_pr,
                      present_labels)
from .network import (NetworkConfig, NetworkParams, TrainSample, augment,
                      classification_loss, evaluate, forward,
                      gt_classification_map, init_params, loss_and_grads,
                      make_shapes_dataset, predict, segmentation_loss,
                      sgd_step, total_loss, train)
from .tensor import (NEG_MASK, GradPair, bilinear_upsample, conv2d, grad_check,
                     global_max_pool, logit, relu, sigmoid, softmax_channel)

__version__ = "0.1.0"
