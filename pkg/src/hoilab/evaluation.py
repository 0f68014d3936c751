"""Inference score fusion, greedy pair matching, and seen/unseen mAP."""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .categories import CategorySpace, ZeroShotSplit
from .errors import InvalidArgumentError
from .model import ModelConfig, forward_pass, interaction_scores
from .tensor import ParamStore

DEFAULT_SIZE_BANDS = (
    ("small", 0.0, 0.01),
    ("medium", 0.01, 0.09),
    ("large", 0.09, 1.0 + 1e-9),
)


def iou(box_a, box_b) -> float:
    """Intersection over union of [x1, y1, x2, y2] boxes."""
    ix = max(0.0, min(box_a[2], box_b[2]) - max(box_a[0], box_b[0]))
    iy = max(0.0, min(box_a[3], box_b[3]) - max(box_a[1], box_b[1]))
    inter = ix * iy
    area_a = (box_a[2] - box_a[0]) * (box_a[3] - box_a[1])
    area_b = (box_b[2] - box_b[0]) * (box_b[3] - box_b[1])
    union = area_a + area_b - inter
    return inter / union if union > 0.0 else 0.0


@dataclass(frozen=True)
class Prediction:
    """One scored pair/category hypothesis within a scene."""

    score: float
    scene: int
    pair: int
    category: int
    human_box: tuple
    object_box: tuple


@dataclass(frozen=True)
class GroundTruth:
    scene: int
    category: int
    human_box: tuple
    object_box: tuple


@dataclass
class APReport:
    """Per-category APs plus seen/unseen/full means and size-band APs.

    ``size_ap`` maps (band, role) to a mean AP or None when the band holds
    no ground truth at all.
    """

    per_category: dict[int, float]
    n_gt: dict[int, int]
    map_seen: float
    map_unseen: float
    map_full: float
    size_ap: dict[tuple[str, str], float | None] = field(default_factory=dict)


def fuse_scores(scores: np.ndarray, human_conf: np.ndarray, object_conf: np.ndarray, lam: float) -> np.ndarray:
    """Suppress overconfident pairs: S · S_H^λ · S_O^λ, broadcast over categories."""
    if lam < 0:
        raise InvalidArgumentError(f"lambda must be ≥ 0, got {lam}")
    scores = np.asarray(scores, dtype=np.float64)
    h = np.asarray(human_conf, dtype=np.float64).reshape(-1, 1)
    o = np.asarray(object_conf, dtype=np.float64).reshape(-1, 1)
    return scores * np.power(h, lam) * np.power(o, lam)


def average_precision(tp_flags, n_gt: int) -> float:
    """All-points PR integration over already-ranked true-positive flags."""
    if n_gt == 0:
        return float("nan")
    tp = np.cumsum(np.asarray(tp_flags, dtype=np.float64))
    ranks = np.arange(1, len(tp) + 1, dtype=np.float64)
    recall = tp / n_gt
    precision = tp / ranks
    # monotone envelope from the right, then area under recall steps
    ap = 0.0
    prev_recall = 0.0
    if len(precision):
        envelope = np.maximum.accumulate(precision[::-1])[::-1]
        for r, p in zip(recall, envelope):
            if r > prev_recall:
                ap += (r - prev_recall) * p
                prev_recall = r
    return float(ap)


def match_and_ap(
    predictions: list[Prediction],
    gts: list[GroundTruth],
    iou_threshold: float = 0.5,
) -> float:
    """Greedy-match one category's ranked predictions and integrate AP.

    Prediction order is score-descending with (scene, pair) tie-breaks; a
    prediction is a true positive when both boxes overlap an unmatched
    ground truth of its scene strictly above the threshold, taking the
    candidate with the largest min(IoU_h, IoU_o).
    """
    if not 0.0 < iou_threshold < 1.0:
        raise InvalidArgumentError(f"iou threshold {iou_threshold} outside (0, 1)")
    if not gts:
        return float("nan")
    ranked = sorted(predictions, key=lambda p: (-p.score, p.scene, p.pair))
    matched = [False] * len(gts)
    flags = []
    for pred in ranked:
        best, best_overlap = -1, -1.0
        for g, gt in enumerate(gts):
            if matched[g] or gt.scene != pred.scene:
                continue
            iou_h = iou(pred.human_box, gt.human_box)
            iou_o = iou(pred.object_box, gt.object_box)
            if iou_h > iou_threshold and iou_o > iou_threshold:
                overlap = min(iou_h, iou_o)
                if overlap > best_overlap:
                    best, best_overlap = g, overlap
        if best >= 0:
            matched[best] = True
            flags.append(1)
        else:
            flags.append(0)
    return average_precision(flags, len(gts))


def _mean_over(per_category, members) -> float:
    values = [per_category[c] for c in members if c in per_category]
    return float(np.mean(values)) if values else float("nan")


def compute_report(
    predictions: list[Prediction],
    gts: list[GroundTruth],
    space: CategorySpace,
    split: ZeroShotSplit,
    iou_threshold: float = 0.5,
    size_bands=DEFAULT_SIZE_BANDS,
) -> APReport:
    """Group by category, match, and aggregate seen/unseen/full and size APs."""
    preds_by_cat: dict[int, list[Prediction]] = {}
    for p in predictions:
        preds_by_cat.setdefault(p.category, []).append(p)
    gts_by_cat: dict[int, list[GroundTruth]] = {}
    for g in gts:
        gts_by_cat.setdefault(g.category, []).append(g)

    per_category = {}
    n_gt = {}
    for cat, cat_gts in sorted(gts_by_cat.items()):
        per_category[cat] = match_and_ap(
            preds_by_cat.get(cat, []), cat_gts, iou_threshold
        )
        n_gt[cat] = len(cat_gts)

    report = APReport(
        per_category=per_category,
        n_gt=n_gt,
        map_seen=_mean_over(per_category, split.seen_sorted()),
        map_unseen=_mean_over(per_category, split.unseen_sorted()),
        map_full=_mean_over(per_category, sorted(per_category)),
    )
    for band, lo, hi in size_bands:
        for role in ("human", "object"):
            report.size_ap[(band, role)] = _band_ap(
                preds_by_cat, gts_by_cat, role, lo, hi, iou_threshold
            )
    return report


def _band_ap(preds_by_cat, gts_by_cat, role: str, lo: float, hi: float, iou_threshold: float):
    """Mean AP over categories restricted to gts whose role-box area is in band."""

    def area(gt):
        box = gt.human_box if role == "human" else gt.object_box
        return (box[2] - box[0]) * (box[3] - box[1])

    values = []
    any_gt = False
    for cat, cat_gts in sorted(gts_by_cat.items()):
        banded = [g for g in cat_gts if lo <= area(g) < hi]
        if not banded:
            continue
        any_gt = True
        values.append(match_and_ap(preds_by_cat.get(cat, []), banded, iou_threshold))
    if not any_gt:
        return None  # absent, not zero
    return float(np.mean(values))


def collect_predictions(
    params: ParamStore,
    cfg: ModelConfig,
    space: CategorySpace,
    scenes,
    detections_per_scene,
    lam: float,
) -> tuple[list[Prediction], list[GroundTruth]]:
    """Run inference over scenes and flatten every (pair, category) score."""
    predictions: list[Prediction] = []
    gts: list[GroundTruth] = []
    for scene_idx, (scene, detections) in enumerate(zip(scenes, detections_per_scene)):
        for inst in scene.instances:
            gts.append(
                GroundTruth(scene_idx, inst.category_index, inst.human_box, inst.object_box)
            )
        if not detections:
            continue
        seq, index = forward_pass(scene.pixels, detections, params, cfg, space)
        if index.n_pairs == 0:
            continue
        raw = interaction_scores(seq.pair_tokens, params, cfg, space).data
        human_conf = np.array([detections[u].confidence for u, _ in index.pairs])
        object_conf = np.array([detections[v].confidence for _, v in index.pairs])
        fused = fuse_scores(raw, human_conf, object_conf, lam)
        for pair_idx, (u, v) in enumerate(index.pairs):
            hbox, obox = detections[u].box, detections[v].box
            for cat in range(space.n_categories):
                predictions.append(
                    Prediction(float(fused[pair_idx, cat]), scene_idx, pair_idx, cat, hbox, obox)
                )
    return predictions, gts


def evaluate(
    params: ParamStore,
    cfg: ModelConfig,
    space: CategorySpace,
    scenes,
    detections_per_scene,
    split: ZeroShotSplit,
    lam: float = 1.0,
    iou_threshold: float = 0.5,
    size_bands=DEFAULT_SIZE_BANDS,
) -> APReport:
    """Full evaluation pass: inference, fusion, matching, aggregation."""
    predictions, gts = collect_predictions(
        params, cfg, space, scenes, detections_per_scene, lam
    )
    return compute_report(predictions, gts, space, split, iou_threshold, size_bands)


# -- report serialization -----------------------------------------------------


def _fmt(value) -> str:
    if value is None or (isinstance(value, float) and np.isnan(value)):
        return ""
    return f"{value:.6f}"


def write_report_csv(path, report: APReport, space: CategorySpace, split: ZeroShotSplit, digest: str):
    lines = [f"# hoilab-report v1 digest={digest}", "category,set,ap,n_gt"]
    for cat in sorted(report.per_category):
        membership = "unseen" if cat in split.unseen else "seen"
        lines.append(
            f"{space.category_name(cat)},{membership},{_fmt(report.per_category[cat])},{report.n_gt[cat]}"
        )
    lines.append("# summary")
    lines.append("metric,value")
    lines.append(f"map_unseen,{_fmt(report.map_unseen)}")
    lines.append(f"map_seen,{_fmt(report.map_seen)}")
    lines.append(f"map_full,{_fmt(report.map_full)}")
    for band, _, _ in DEFAULT_SIZE_BANDS:
        for role in ("human", "object"):
            value = report.size_ap.get((band, role))
            lines.append(f"ap_{band}_{role},{_fmt(value)}")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")


def write_report_json(path, report: APReport, space: CategorySpace, split: ZeroShotSplit, digest: str):
    def clean(v):
        if v is None or (isinstance(v, float) and np.isnan(v)):
            return None
        return v

    payload = {
        "digest": digest,
        "categories": [
            {
                "name": space.category_name(cat),
                "set": "unseen" if cat in split.unseen else "seen",
                "ap": clean(report.per_category[cat]),
                "n_gt": report.n_gt[cat],
            }
            for cat in sorted(report.per_category)
        ],
        "summary": {
            "map_unseen": clean(report.map_unseen),
            "map_seen": clean(report.map_seen),
            "map_full": clean(report.map_full),
            **{
                f"ap_{band}_{role}": clean(report.size_ap.get((band, role)))
                for band, _, _ in DEFAULT_SIZE_BANDS
                for role in ("human", "object")
            },
        },
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")
