#!/usr/bin/env python3
"""Reference scorer for class-probability maps, coded independently of the
package: plain-Python loops, no numpy.

Definitions (must stay in lockstep with the harness scorer):
accuracy by lowest-index argmax; binary cross entropy in natural log with
probabilities clamped to [1e-7, 1-1e-7], summed over classes, averaged
over cells; PSNR = 10 log10(1/MSE) over all cells and classes with inf
for a perfect prediction; SSIM with uniform sliding windows of side
min(8, rows, cols), stabilizers 0.01^2 and 0.03^2, per class channel,
averaged.

Usage: reference_metrics.py pred.json truth.json
where pred.json holds a nested [rows][cols][classes] probability list and
truth.json a [rows][cols] list of 1-based labels.
"""

import json
import math
import sys

CLAMP = 1e-7
C1 = 0.01**2
C2 = 0.03**2


def accuracy(pred, truth):
    hits = 0
    cells = 0
    for r in range(len(truth)):
        for c in range(len(truth[0])):
            probs = pred[r][c]
            best = 0
            for i in range(1, len(probs)):
                if probs[i] > probs[best]:
                    best = i
            hits += int(best + 1 == truth[r][c])
            cells += 1
    return hits / cells


def bce(pred, truth):
    total = 0.0
    cells = 0
    for r in range(len(truth)):
        for c in range(len(truth[0])):
            cell = 0.0
            for i, p in enumerate(pred[r][c]):
                p = min(max(p, CLAMP), 1.0 - CLAMP)
                y = 1.0 if truth[r][c] == i + 1 else 0.0
                cell -= y * math.log(p) + (1.0 - y) * math.log(1.0 - p)
            total += cell
            cells += 1
    return total / cells


def mse(pred, truth):
    total = 0.0
    n = 0
    for r in range(len(truth)):
        for c in range(len(truth[0])):
            for i, p in enumerate(pred[r][c]):
                y = 1.0 if truth[r][c] == i + 1 else 0.0
                total += (p - y) ** 2
                n += 1
    return total / n


def psnr(pred, truth):
    m = mse(pred, truth)
    if m == 0.0:
        return math.inf
    return 10.0 * math.log10(1.0 / m)


def _window_stats(img, r0, c0, win):
    mean = 0.0
    for r in range(r0, r0 + win):
        for c in range(c0, c0 + win):
            mean += img[r][c]
    mean /= win * win
    var = 0.0
    for r in range(r0, r0 + win):
        for c in range(c0, c0 + win):
            var += (img[r][c] - mean) ** 2
    return mean, var / (win * win)


def _window_cov(a, b, mean_a, mean_b, r0, c0, win):
    cov = 0.0
    for r in range(r0, r0 + win):
        for c in range(c0, c0 + win):
            cov += (a[r][c] - mean_a) * (b[r][c] - mean_b)
    return cov / (win * win)


def ssim(pred, truth):
    rows = len(truth)
    cols = len(truth[0])
    k = len(pred[0][0])
    win = min(8, rows, cols)
    channel_scores = []
    for i in range(k):
        a = [[pred[r][c][i] for c in range(cols)] for r in range(rows)]
        b = [[1.0 if truth[r][c] == i + 1 else 0.0 for c in range(cols)] for r in range(rows)]
        total = 0.0
        count = 0
        for r0 in range(rows - win + 1):
            for c0 in range(cols - win + 1):
                mean_a, var_a = _window_stats(a, r0, c0, win)
                mean_b, var_b = _window_stats(b, r0, c0, win)
                cov = _window_cov(a, b, mean_a, mean_b, r0, c0, win)
                num = (2 * mean_a * mean_b + C1) * (2 * cov + C2)
                den = (mean_a**2 + mean_b**2 + C1) * (var_a + var_b + C2)
                total += num / den
                count += 1
        channel_scores.append(total / count)
    return sum(channel_scores) / k


def score(pred, truth):
    return {
        "accuracy": accuracy(pred, truth),
        "psnr": psnr(pred, truth),
        "ssim": ssim(pred, truth),
        "bce": bce(pred, truth),
        "mse": mse(pred, truth),
    }


def main(argv):
    if len(argv) != 3:
        print(__doc__)
        return 2
    with open(argv[1]) as fh:
        pred = json.load(fh)
    with open(argv[2]) as fh:
        truth = json.load(fh)
    out = score(pred, truth)
    print(json.dumps({k: ("inf" if v == math.inf else v) for k, v in out.items()}, indent=2))
    return 0


if __name__ == "__main__":
    sys.exit(main(sys.argv))
