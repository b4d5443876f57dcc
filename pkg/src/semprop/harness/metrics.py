"""Scoring of class-probability maps against ground-truth class maps.

All four metrics treat the prediction as a stack of per-class probability
images with data range 1.0 and the truth as its one-hot counterpart:

* accuracy: mean over cells of argmax(prediction) == truth, ties broken
  toward the lowest class index;
* binary cross entropy: natural-log convention, probabilities clamped to
  [1e-7, 1 - 1e-7], summed over classes and averaged over cells;
* PSNR: 10 log10(1 / MSE) over all cells and classes, +inf for a perfect
  prediction (serialized as the string "inf");
* SSIM: uniform sliding windows of side min(8, image side), standard
  stabilizers C1 = 0.01^2 and C2 = 0.03^2, computed per class channel and
  averaged over channels.

An independently coded reference implementation lives in
tools/reference_metrics.py and the test suite holds the two to 1e-9.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..errors import DomainError

__all__ = ["MetricsRecord", "compute_metrics", "one_hot"]

BCE_CLAMP = 1e-7
SSIM_C1 = 0.01**2
SSIM_C2 = 0.03**2
SSIM_WINDOW = 8


@dataclass(frozen=True)
class MetricsRecord:
    accuracy: float
    psnr: float
    ssim: float
    bce: float
    mse: float

    def as_dict(self):
        return {
            "accuracy": self.accuracy,
            "psnr": "inf" if math.isinf(self.psnr) else self.psnr,
            "ssim": self.ssim,
            "bce": self.bce,
            "mse": self.mse,
        }


def one_hot(truth: np.ndarray, k: int) -> np.ndarray:
    """(R, C, k) one-hot encoding of a 1-based class map."""
    truth = np.asarray(truth)
    if truth.min() < 1 or truth.max() > k:
        raise DomainError("truth labels must lie in [1, k]")
    out = np.zeros(truth.shape + (k,))
    rows, cols = np.indices(truth.shape)
    out[rows, cols, truth - 1] = 1.0
    return out


def _ssim_channel(a: np.ndarray, b: np.ndarray) -> float:
    win = min(SSIM_WINDOW, a.shape[0], a.shape[1])
    va = np.lib.stride_tricks.sliding_window_view(a, (win, win))
    vb = np.lib.stride_tricks.sliding_window_view(b, (win, win))
    mu_a = va.mean(axis=(2, 3))
    mu_b = vb.mean(axis=(2, 3))
    var_a = (va**2).mean(axis=(2, 3)) - mu_a**2
    var_b = (vb**2).mean(axis=(2, 3)) - mu_b**2
    cov = (va * vb).mean(axis=(2, 3)) - mu_a * mu_b
    num = (2 * mu_a * mu_b + SSIM_C1) * (2 * cov + SSIM_C2)
    den = (mu_a**2 + mu_b**2 + SSIM_C1) * (var_a + var_b + SSIM_C2)
    return float((num / den).mean())


def compute_metrics(pred: np.ndarray, truth: np.ndarray) -> MetricsRecord:
    """Score an (R, C, k) probability map against an (R, C) 1-based truth map."""
    pred = np.asarray(pred, dtype=float)
    truth = np.asarray(truth)
    if pred.ndim != 3 or truth.shape != pred.shape[:2]:
        raise DomainError(
            f"pred must be (R, C, k) with truth (R, C); got {pred.shape} and {truth.shape}"
        )
    k = pred.shape[2]
    hot = one_hot(truth, k)

    accuracy = float((np.argmax(pred, axis=2) + 1 == truth).mean())

    clamped = np.clip(pred, BCE_CLAMP, 1.0 - BCE_CLAMP)
    per_cell = -(hot * np.log(clamped) + (1.0 - hot) * np.log(1.0 - clamped)).sum(axis=2)
    bce = float(per_cell.mean())

    mse = float(((pred - hot) ** 2).mean())
    psnr = math.inf if mse == 0.0 else 10.0 * math.log10(1.0 / mse)

    ssim = float(np.mean([_ssim_channel(pred[:, :, c], hot[:, :, c]) for c in range(k)]))

    return MetricsRecord(accuracy=accuracy, psnr=psnr, ssim=ssim, bce=bce, mse=mse)
