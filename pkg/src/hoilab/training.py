"""Label assignment, focal binary cross-entropy, AdamW, and the train loop."""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from . import tensor as T
from .categories import CategorySpace, ZeroShotSplit, filter_annotations
from .errors import InvalidArgumentError, NonFiniteError
from .evaluation import evaluate, iou
from .model import (
    ModelConfig,
    enumerate_pairs,
    forward_pass,
    init_params,
    interaction_scores,
)
from .tensor import ParamStore, Tensor

__all__ = [
    "AdamW",
    "FocalConfig",
    "TrainResult",
    "TrainSettings",
    "assign_labels",
    "focal_bce",
    "iou",
    "train",
    "train_step",
]


@dataclass(frozen=True)
class FocalConfig:
    alpha: float = 0.25
    gamma: float = 2.0
    iou_threshold: float = 0.5

    def __post_init__(self):
        if not 0.0 <= self.alpha <= 1.0:
            raise InvalidArgumentError(f"alpha {self.alpha} outside [0, 1]")
        if self.gamma < 0.0:
            raise InvalidArgumentError(f"gamma {self.gamma} must be ≥ 0")
        if not 0.0 < self.iou_threshold < 1.0:
            raise InvalidArgumentError(
                f"iou_threshold {self.iou_threshold} outside (0, 1)"
            )


def assign_labels(pairs, detections, instances, n_categories: int, cfg: FocalConfig) -> np.ndarray:
    """Binary targets: Y[i, c] = 1 iff some ground truth of category c has
    both boxes overlapping pair i strictly above the threshold and the
    detection's object class matches the ground truth's object class."""
    labels = np.zeros((pairs.n_pairs, n_categories))
    for i, (u, v) in enumerate(pairs.pairs):
        human_box = detections[u].box
        object_box = detections[v].box
        object_class = detections[v].class_index
        for inst in instances:
            if inst.object_class != object_class:
                continue
            if (
                iou(human_box, inst.human_box) > cfg.iou_threshold
                and iou(object_box, inst.object_box) > cfg.iou_threshold
            ):
                labels[i, inst.category_index] = 1.0
    return labels


def focal_bce(scores: Tensor, labels: np.ndarray, cfg: FocalConfig) -> Tensor:
    """Mean focal binary cross-entropy over every matrix entry.

    Positive entries contribute −α·(1−p)^γ·ln p, negatives
    −(1−α)·p^γ·ln(1−p), with p clamped away from {0, 1} by 1e-12.
    """
    labels = np.asarray(labels, dtype=np.float64)
    if scores.shape != labels.shape:
        raise InvalidArgumentError(
            f"scores shape {scores.shape} != labels shape {labels.shape}"
        )
    p = T.clip(scores, 1e-12, 1.0 - 1e-12)
    pos = T.mul(T.power(1.0 - p, cfg.gamma), T.log(p)) * (-cfg.alpha)
    neg = T.mul(T.power(p, cfg.gamma), T.log(1.0 - p)) * (-(1.0 - cfg.alpha))
    return T.tmean(labels * pos + (1.0 - labels) * neg)


class AdamW:
    """Adaptive moments with decoupled weight decay over trainable entries."""

    def __init__(self, store: ParamStore, lr=1e-3, weight_decay=1e-4, beta1=0.9, beta2=0.999, eps=1e-8):
        self.store = store
        self.lr = lr
        self.weight_decay = weight_decay
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.step_count = 0
        self.m = {name: np.zeros_like(t.data) for name, t in store.trainable()}
        self.v = {name: np.zeros_like(t.data) for name, t in store.trainable()}

    def step(self):
        self.step_count += 1
        b1, b2 = self.beta1, self.beta2
        bias1 = 1.0 - b1**self.step_count
        bias2 = 1.0 - b2**self.step_count
        for name, p in self.store.trainable():
            g = p.grad if p.grad is not None else 0.0
            self.m[name] = b1 * self.m[name] + (1 - b1) * g
            self.v[name] = b2 * self.v[name] + (1 - b2) * np.square(g)
            m_hat = self.m[name] / bias1
            v_hat = self.v[name] / bias2
            p.data = p.data - self.lr * (
                m_hat / (np.sqrt(v_hat) + self.eps) + self.weight_decay * p.data
            )


def _first_nonfinite(node: Tensor) -> str:
    """Name the earliest graph node carrying NaN/inf, for diagnostics."""
    from .tensor import _toposort

    for n in _toposort(node):
        if not np.isfinite(n.data).all():
            return n.op
    return node.op


def train_step(
    params: ParamStore,
    optimizer: AdamW,
    scene,
    detections,
    seen_columns: np.ndarray,
    model_cfg: ModelConfig,
    focal_cfg: FocalConfig,
    space: CategorySpace,
) -> float:
    """One forward/backward/update on a scene with at least one pair.

    The loss is computed over seen-category columns only; unseen rows of
    the embedding table receive no direct training signal.
    """
    seq, index = forward_pass(scene.pixels, detections, params, model_cfg, space)
    if index.n_pairs == 0:
        raise InvalidArgumentError("train_step requires at least one pair")
    scores = interaction_scores(seq.pair_tokens, params, model_cfg, space)
    labels = assign_labels(index, detections, scene.instances, space.n_categories, focal_cfg)
    seen_scores = T.getitem(scores, (slice(None), seen_columns))
    loss = focal_bce(seen_scores, labels[:, seen_columns], focal_cfg)
    value = loss.item()
    if not np.isfinite(value):
        raise NonFiniteError(f"non-finite loss; first bad tensor op: {_first_nonfinite(loss)}")
    params.zero_grads()
    loss.backward()
    optimizer.step()
    return value


@dataclass(frozen=True)
class TrainSettings:
    epochs: int = 10
    lr: float = 1e-3
    weight_decay: float = 1e-4
    seed: int = 0
    val_fraction: float = 0.2
    lambda_infer: float = 1.0


@dataclass
class LogRow:
    epoch: int
    mean_loss: float
    val_map_seen: float
    val_map_unseen: float
    wall_seconds: float


@dataclass
class TrainResult:
    params: ParamStore  # best-by-validation weights
    final_params: ParamStore
    log: list[LogRow]
    skipped_scenes: int
    best_epoch: int = 0


def train(
    scenes,
    detections_per_scene,
    space: CategorySpace,
    split: ZeroShotSplit,
    model_cfg: ModelConfig,
    focal_cfg: FocalConfig,
    settings: TrainSettings,
    init_seed: int | None = None,
) -> TrainResult:
    """Epoch loop over seen-category training labels with a held-out tail.

    The last ``val_fraction`` of scenes (by position) are validation: their
    labels are never filtered and never trained on. The best checkpoint by
    validation full mAP is retained.
    """
    if not scenes:
        raise InvalidArgumentError("training needs a nonempty dataset")
    n_val = int(round(len(scenes) * settings.val_fraction))
    n_train = len(scenes) - n_val
    if n_train < 1:
        raise InvalidArgumentError("val_fraction leaves no training scenes")
    train_scenes = filter_annotations(scenes[:n_train], split)
    train_dets = detections_per_scene[:n_train]
    val_scenes = scenes[n_train:]
    val_dets = detections_per_scene[n_train:]

    params = init_params(model_cfg, space, seed=settings.seed if init_seed is None else init_seed)
    optimizer = AdamW(params, lr=settings.lr, weight_decay=settings.weight_decay)
    seen_columns = np.array(split.seen_sorted(), dtype=np.intp)
    shuffle_rng = np.random.default_rng(np.random.SeedSequence([settings.seed, 7]))

    best = params.clone()
    best_score = -np.inf
    best_epoch = 0
    log: list[LogRow] = []
    skipped = 0

    for epoch in range(settings.epochs):
        started = time.perf_counter()
        order = shuffle_rng.permutation(n_train)
        losses = []
        for scene_idx in order:
            scene = train_scenes[scene_idx]
            detections = train_dets[scene_idx]
            if enumerate_pairs(detections, space.human_index).n_pairs == 0:
                skipped += 1
                continue
            losses.append(
                train_step(
                    params, optimizer, scene, detections, seen_columns, model_cfg, focal_cfg, space
                )
            )
        mean_loss = float(np.mean(losses)) if losses else float("nan")

        if val_scenes:
            report = evaluate(
                params,
                model_cfg,
                space,
                val_scenes,
                val_dets,
                split,
                lam=settings.lambda_infer,
                iou_threshold=focal_cfg.iou_threshold,
            )
            val_seen, val_unseen = report.map_seen, report.map_unseen
            val_full = report.map_full
        else:
            val_seen = val_unseen = val_full = float("nan")

        log.append(
            LogRow(epoch, mean_loss, val_seen, val_unseen, time.perf_counter() - started)
        )
        score = -np.inf if np.isnan(val_full) else val_full
        if score > best_score:
            best_score = score
            best = params.clone()
            best_epoch = epoch

    if settings.epochs == 0 or best_score == -np.inf:
        best = params.clone()
        best_epoch = max(0, settings.epochs - 1)
    return TrainResult(
        params=best,
        final_params=params,
        log=log,
        skipped_scenes=skipped,
        best_epoch=best_epoch,
    )


def write_training_log(path, log: list[LogRow]):
    lines = ["epoch,mean_loss,val_map_seen,val_map_unseen,wall_seconds"]
    for row in log:
        lines.append(
            f"{row.epoch},{_log_fmt(row.mean_loss)},{_log_fmt(row.val_map_seen)},"
            f"{_log_fmt(row.val_map_unseen)},{row.wall_seconds:.3f}"
        )
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")


def _log_fmt(value: float) -> str:
    return "" if np.isnan(value) else f"{value:.6f}"
