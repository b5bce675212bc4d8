"""Training-side reference losses: BCE + DICE mask loss and token NLL.

These mirror the objective a segmentation model would be fine-tuned with so
offline experiments can score candidate masks the same way. Probabilities are
clamped to [1e-7, 1 - 1e-7] before any logarithm.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

PROB_EPS = 1e-7
DICE_EPS = 1.0


@dataclass(frozen=True)
class LossConfig:
    """Loss weights; text and mask terms combine as a weighted sum."""

    lambda_txt: float = 1.0
    lambda_mask: float = 1.0
    lambda_bce: float = 2.0
    lambda_dice: float = 0.5

    def __post_init__(self):
        weights = (self.lambda_txt, self.lambda_mask,
                   self.lambda_bce, self.lambda_dice)
        if any(w < 0 for w in weights):
            raise ValueError("loss weights must be nonnegative")
        if all(w == 0 for w in weights):
            raise ValueError("at least one loss weight must be positive")


def bce_loss(pred: np.ndarray, target: np.ndarray) -> float:
    """Mean binary cross-entropy; pred in [0, 1], target boolean."""
    pred = np.asarray(pred, dtype=np.float64)
    target = np.asarray(target, dtype=bool)
    if pred.shape != target.shape:
        raise ValueError("pred and target shapes must match")
    if pred.size == 0:
        raise ValueError("empty prediction")
    if pred.min() < 0.0 or pred.max() > 1.0:
        raise ValueError("pred values must lie in [0, 1]")
    p = np.clip(pred, PROB_EPS, 1.0 - PROB_EPS)
    t = target.astype(np.float64)
    return float(np.mean(-(t * np.log(p) + (1.0 - t) * np.log(1.0 - p))))


def dice_loss(pred: np.ndarray, target: np.ndarray) -> float:
    """1 - DICE overlap with additive smoothing DICE_EPS."""
    pred = np.asarray(pred, dtype=np.float64)
    target = np.asarray(target, dtype=bool)
    if pred.shape != target.shape:
        raise ValueError("pred and target shapes must match")
    if pred.size == 0:
        raise ValueError("empty prediction")
    if pred.min() < 0.0 or pred.max() > 1.0:
        raise ValueError("pred values must lie in [0, 1]")
    t = target.astype(np.float64)
    overlap = 2.0 * float(np.sum(pred * t)) + DICE_EPS
    total = float(np.sum(pred)) + float(np.sum(t)) + DICE_EPS
    return 1.0 - overlap / total


def mask_loss(pred: np.ndarray, target: np.ndarray,
              config: LossConfig | None = None) -> float:
    """Weighted BCE + DICE mask objective."""
    config = config or LossConfig()
    return (config.lambda_bce * bce_loss(pred, target)
            + config.lambda_dice * dice_loss(pred, target))


def text_loss(distributions: np.ndarray, targets: np.ndarray) -> float:
    """Mean negative log-likelihood of the target token per step.

    distributions is (T, V) with rows summing to 1 within 1e-6; targets is
    (T,) of indices into the vocabulary axis.
    """
    dists = np.asarray(distributions, dtype=np.float64)
    targets = np.asarray(targets)
    if dists.ndim != 2 or targets.ndim != 1 or dists.shape[0] != targets.shape[0]:
        raise ValueError("need one distribution row per target")
    if dists.shape[0] == 0:
        raise ValueError("empty sequence")
    if dists.min() < 0.0:
        raise ValueError("distributions must be nonnegative")
    sums = dists.sum(axis=1)
    if np.max(np.abs(sums - 1.0)) > 1e-6:
        raise ValueError("each distribution must sum to 1 within 1e-6")
    if targets.min() < 0 or targets.max() >= dists.shape[1]:
        raise ValueError("target index out of range")
    p = np.clip(dists[np.arange(dists.shape[0]), targets],
                PROB_EPS, 1.0 - PROB_EPS)
    return float(np.mean(-np.log(p)))


def combined_loss(txt: float, mask: float,
                  config: LossConfig | None = None) -> float:
    """lambda_txt * text loss + lambda_mask * mask loss."""
    config = config or LossConfig()
    return config.lambda_txt * txt + config.lambda_mask * mask
