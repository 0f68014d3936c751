"""Brute-force reference implementations used to cross-check the fast paths.

Everything here is written with explicit Python loops and no shared code
with the implementations it verifies. These references back both the test
suite and the ``hoilab oracle`` command.
"""

from __future__ import annotations

import math

import numpy as np


def conv2d_loop(x: np.ndarray, kernel: np.ndarray) -> np.ndarray:
    """Nested-loop same-padded convolution of H×W×C_in with k×k×C_in×C_out."""
    h, w, c_in = x.shape
    k = kernel.shape[0]
    c_out = kernel.shape[3]
    pad = k // 2
    out = np.zeros((h, w, c_out))
    for i in range(h):
        for j in range(w):
            for co in range(c_out):
                acc = 0.0
                for di in range(k):
                    for dj in range(k):
                        ii, jj = i + di - pad, j + dj - pad
                        if 0 <= ii < h and 0 <= jj < w:
                            for ci in range(c_in):
                                acc += x[ii, jj, ci] * kernel[di, dj, ci, co]
                out[i, j, co] = acc
    return out


def bilinear_at(fm: np.ndarray, y: float, x: float) -> np.ndarray:
    """Bilinear sample of an H×W×C map at continuous (y, x), border-clamped."""
    h, w = fm.shape[:2]
    y = min(max(y, 0.0), h - 1.0)
    x = min(max(x, 0.0), w - 1.0)
    y0, x0 = int(math.floor(y)), int(math.floor(x))
    y1, x1 = min(y0 + 1, h - 1), min(x0 + 1, w - 1)
    fy, fx = y - y0, x - x0
    return (
        fm[y0, x0] * (1 - fy) * (1 - fx)
        + fm[y0, x1] * (1 - fy) * fx
        + fm[y1, x0] * fy * (1 - fx)
        + fm[y1, x1] * fy * fx
    )


def roi_align_loop(
    fm: np.ndarray, box, out_size: int = 3, samples_per_bin: int = 2
) -> np.ndarray:
    """Loop reference for box pooling with half-pixel sample geometry."""
    h, w, c = fm.shape
    x1, y1, x2, y2 = (min(max(float(v), 0.0), 1.0) for v in box)
    s, n = out_size, samples_per_bin
    out = np.zeros((s, s, c))
    for i in range(s):
        for j in range(s):
            acc = np.zeros(c)
            for a in range(n):
                for b in range(n):
                    yn = y1 + (i + (a + 0.5) / n) / s * (y2 - y1)
                    xn = x1 + (j + (b + 0.5) / n) / s * (x2 - x1)
                    acc += bilinear_at(fm, yn * h - 0.5, xn * w - 0.5)
            out[i, j] = acc / (n * n)
    return out


def layer_norm_loop(
    x: np.ndarray, gain: np.ndarray, bias: np.ndarray, eps: float = 1e-5
) -> np.ndarray:
    """Row-by-row mean/variance normalization from the written-out formula."""
    flat = x.reshape(-1, x.shape[-1])
    out = np.zeros_like(flat)
    d = flat.shape[1]
    for r in range(flat.shape[0]):
        mu = sum(flat[r]) / d
        var = sum((v - mu) ** 2 for v in flat[r]) / d
        for c in range(d):
            out[r, c] = (flat[r, c] - mu) / math.sqrt(var + eps) * gain[c] + bias[c]
    return out.reshape(x.shape)


def attention_loop(q: np.ndarray, k: np.ndarray, v: np.ndarray) -> np.ndarray:
    """Single-head unprojected attention: softmax(q·kᵀ/√d)·v, by loops."""
    n_q, d = q.shape
    n_k = k.shape[0]
    out = np.zeros((n_q, d))
    for i in range(n_q):
        logits = [sum(q[i, t] * k[j, t] for t in range(d)) / math.sqrt(d) for j in range(n_k)]
        m = max(logits)
        weights = [math.exp(l - m) for l in logits]
        z = sum(weights)
        for j in range(n_k):
            out[i] += (weights[j] / z) * v[j]
    return out


def iou_scalar(box_a, box_b) -> float:
    """Intersection over union of two [x1, y1, x2, y2] boxes."""
    ix1 = max(box_a[0], box_b[0])
    iy1 = max(box_a[1], box_b[1])
    ix2 = min(box_a[2], box_b[2])
    iy2 = min(box_a[3], box_b[3])
    iw = max(0.0, ix2 - ix1)
    ih = max(0.0, iy2 - iy1)
    inter = iw * ih
    area_a = (box_a[2] - box_a[0]) * (box_a[3] - box_a[1])
    area_b = (box_b[2] - box_b[0]) * (box_b[3] - box_b[1])
    union = area_a + area_b - inter
    return inter / union if union > 0 else 0.0


def focal_term(p: float, y: int, alpha: float, gamma: float) -> float:
    """One focal binary cross-entropy term, straight from the definition."""
    p = min(max(p, 1e-12), 1.0 - 1e-12)
    if y == 1:
        return -alpha * (1.0 - p) ** gamma * math.log(p)
    return -(1.0 - alpha) * p**gamma * math.log(1.0 - p)


def average_precision_loop(scored_flags) -> float:
    """All-points AP from (score, is_tp) pairs plus the gt count.

    ``scored_flags`` is (entries, n_gt) where entries are already matched
    (score, tp) pairs in any order.
    """
    entries, n_gt = scored_flags
    if n_gt == 0:
        return float("nan")
    ordered = sorted(entries, key=lambda e: -e[0])
    tps = 0
    points = []
    for rank, (_, tp) in enumerate(ordered, start=1):
        tps += int(tp)
        points.append((tps / n_gt, tps / rank))
    ap = 0.0
    prev_recall = 0.0
    for idx, (recall, _) in enumerate(points):
        if recall > prev_recall:
            best = max(p for r, p in points[idx:])
            ap += (recall - prev_recall) * best
            prev_recall = recall
    return ap


def evaluate_category_loop(predictions, gts, iou_threshold: float) -> float:
    """Quadratic matcher + explicit PR curve for one category.

    ``predictions``: list of (score, scene, pair_index, human_box, object_box).
    ``gts``: list of (scene, human_box, object_box).
    Ties are broken by (scene, pair_index); a prediction matches the
    unmatched ground truth of its scene maximizing min(IoU_h, IoU_o) among
    those with both IoUs strictly above the threshold.
    """
    if not gts:
        return float("nan")
    order = sorted(
        range(len(predictions)),
        key=lambda i: (-predictions[i][0], predictions[i][1], predictions[i][2]),
    )
    used = [False] * len(gts)
    entries = []
    for i in order:
        score, scene, _, hbox, obox = predictions[i]
        best_gt, best_min_iou = -1, -1.0
        for g, (gscene, ghbox, gobox) in enumerate(gts):
            if used[g] or gscene != scene:
                continue
            iou_h = iou_scalar(hbox, ghbox)
            iou_o = iou_scalar(obox, gobox)
            if iou_h > iou_threshold and iou_o > iou_threshold:
                m = min(iou_h, iou_o)
                if m > best_min_iou:
                    best_min_iou, best_gt = m, g
        if best_gt >= 0:
            used[best_gt] = True
            entries.append((score, True))
        else:
            entries.append((score, False))
    return average_precision_loop((entries, len(gts)))
