"""Check suites: finite-difference gradients and brute-force oracle equivalence.

These back the ``gradcheck`` and ``oracle`` CLI commands and the acceptance
tests. Every oracle comparison pits a vectorized implementation against the
independent loop references in :mod:`hoilab.oracles`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import oracles
from . import tensor as T
from .categories import CategorySpace, build_split
from .evaluation import GroundTruth, Prediction, fuse_scores, iou, match_and_ap
from .gradcheck import grad_check
from .model import (
    ModelConfig,
    enumerate_pairs,
    forward_pass,
    init_params,
    interaction_scores,
)
from .nn import layer_norm, multi_head_cross_attention
from .scenes import Detection, Scene, Entity, seeded_rng
from .tensor import Tensor
from .training import FocalConfig, assign_labels, focal_bce

GRAD_TOL = 1e-4
ORACLE_TOL = 1e-9
EXACT_TOL = 1e-12


@dataclass(frozen=True)
class CheckResult:
    name: str
    error: float
    tolerance: float

    @property
    def passed(self) -> bool:
        return self.error <= self.tolerance

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        return f"{status}  {self.name:<28} max_err={self.error:.3e}  tol={self.tolerance:.0e}"


# -- gradient checks -----------------------------------------------------------


def _attention_params(d: int, rng) -> dict:
    p = {}
    for name in ("wq", "wk", "wv", "wo"):
        p[name] = Tensor(rng.normal(0, 0.3, size=(d, d)), requires_grad=True)
    for name in ("bq", "bk", "bv", "bo"):
        p[name] = Tensor(rng.normal(0, 0.1, size=d), requires_grad=True)
    return p


def tiny_model_config() -> ModelConfig:
    """Compact full architecture used by the end-to-end gradient check."""
    return ModelConfig(
        image_size=32,
        patch_size=8,
        embed_dim=16,
        layers=2,
        heads=2,
        adapter_dim=8,
        adapter_heads=2,
        n_queries=2,
        kernel_sizes=(1, 3),
        text_dim=8,
        det_dim=8,
        roi_size=2,
        roi_samples=1,
    )


def two_pair_scene(det_dim: int, image_size: int):
    """A fixed scene with one human and two objects (exactly two pairs)."""
    rng = seeded_rng("gradcheck-scene")
    pixels = rng.uniform(0.0, 1.0, size=(image_size, image_size, 3)).astype(np.float32)
    human_box = (0.10, 0.15, 0.45, 0.60)
    obj_a = (0.55, 0.20, 0.85, 0.55)
    obj_b = (0.20, 0.65, 0.55, 0.95)
    entities = (Entity(human_box, 0), Entity(obj_a, 1), Entity(obj_b, 2))
    scene = Scene(pixels=pixels, entities=entities, instances=(), image_size=image_size)
    detections = [
        Detection(human_box, 0, 0.95, rng.normal(size=det_dim)),
        Detection(obj_a, 1, 0.90, rng.normal(size=det_dim)),
        Detection(obj_b, 2, 0.85, rng.normal(size=det_dim)),
    ]
    labels = np.zeros((2, 9))
    labels[0, 3] = 1.0  # pair (human, obj_a) carries one positive category
    return scene, detections, labels


def full_loss_gradcheck(eps: float = 1e-5) -> float:
    """Finite-difference check of the complete training loss.

    Gates are randomized away from their zero init so gradient flows
    through every adapter rather than short-circuiting at the residual.
    """
    cfg = tiny_model_config()
    space = CategorySpace.full(("person", "cup", "ball"), ("hold", "push", "wash"))
    params = init_params(cfg, space, seed=0)
    gate_rng = seeded_rng("gradcheck-gates")
    for name, t in params.trainable():
        if name.endswith(".gate"):
            t.data[:] = gate_rng.normal(0.0, 0.1, size=t.data.shape)
    scene, detections, labels = two_pair_scene(cfg.det_dim, cfg.image_size)
    focal = FocalConfig()

    def loss():
        seq, index = forward_pass(scene.pixels, detections, params, cfg, space)
        scores = interaction_scores(seq.pair_tokens, params, cfg, space)
        return focal_bce(scores, labels[: index.n_pairs], focal)

    trainable = dict(params.trainable())
    return grad_check(loss, trainable, eps=eps)


def gradcheck_suite(eps: float = 1e-5) -> list[CheckResult]:
    """Per-primitive checks plus the full-model loss check."""
    results = []
    rng = np.random.default_rng(0)

    x = Tensor(rng.normal(size=(4, 4, 2)), requires_grad=True)
    k = Tensor(rng.normal(size=(3, 3, 2, 2)), requires_grad=True)
    results.append(
        CheckResult(
            "conv2d", grad_check(lambda: T.conv2d(x, k), {"x": x, "k": k}, eps=eps), GRAD_TOL
        )
    )

    xn = Tensor(rng.normal(size=(3, 6)), requires_grad=True)
    g = Tensor(rng.normal(size=6), requires_grad=True)
    b = Tensor(rng.normal(size=6), requires_grad=True)
    results.append(
        CheckResult(
            "layer_norm",
            grad_check(lambda: layer_norm(xn, g, b), {"x": xn, "g": g, "b": b}, eps=eps),
            GRAD_TOL,
        )
    )

    attn = _attention_params(4, rng)
    q = Tensor(rng.normal(size=(3, 4)), requires_grad=True)
    kk = Tensor(rng.normal(size=(5, 4)), requires_grad=True)
    v = Tensor(rng.normal(size=(5, 4)), requires_grad=True)
    results.append(
        CheckResult(
            "attention",
            grad_check(
                lambda: multi_head_cross_attention(q, kk, v, 2, attn),
                {"q": q, "k": kk, "v": v, **attn},
                eps=eps,
            ),
            GRAD_TOL,
        )
    )

    fm = Tensor(rng.normal(size=(5, 5, 2)), requires_grad=True)
    results.append(
        CheckResult(
            "roi_align",
            grad_check(
                lambda: T.roi_align(fm, [0.1, 0.2, 0.8, 0.9], 3, 2), {"fm": fm}, eps=eps
            ),
            GRAD_TOL,
        )
    )

    logits = Tensor(rng.normal(size=(2, 4)), requires_grad=True)
    y = (rng.uniform(size=(2, 4)) > 0.5).astype(float)
    focal = FocalConfig()
    results.append(
        CheckResult(
            "focal_bce",
            grad_check(
                lambda: focal_bce(T.sigmoid(logits), y, focal), {"x": logits}, eps=eps
            ),
            GRAD_TOL,
        )
    )

    results.append(CheckResult("full_loss", full_loss_gradcheck(eps=eps), GRAD_TOL))
    return results


# -- oracle equivalence ----------------------------------------------------------


def oracle_suite(seed: int = 0) -> list[CheckResult]:
    results = []
    rng = np.random.default_rng(seed)

    err = 0.0
    for k_size, c_out in ((1, 2), (3, 1), (5, 2)):
        x = rng.normal(size=(5, 5, 2))
        kern = rng.normal(size=(k_size, k_size, 2, c_out))
        fast = T.conv2d(Tensor(x), Tensor(kern)).data
        slow = oracles.conv2d_loop(x, kern)
        err = max(err, float(np.abs(fast - slow).max()))
    results.append(CheckResult("conv2d_vs_loop", err, ORACLE_TOL))

    err = 0.0
    for _ in range(5):
        fm = rng.normal(size=(6, 7, 3))
        x1, y1 = rng.uniform(0, 0.5, size=2)
        box = [x1, y1, x1 + rng.uniform(0.2, 0.5), y1 + rng.uniform(0.2, 0.5)]
        fast = T.roi_align(Tensor(fm), box, 3, 2).data
        slow = oracles.roi_align_loop(fm, box, 3, 2)
        err = max(err, float(np.abs(fast - slow).max()))
    results.append(CheckResult("roi_align_vs_bilinear", err, ORACLE_TOL))

    eye = np.eye(4)
    zero = np.zeros(4)
    identity = {
        "wq": Tensor(eye), "wk": Tensor(eye), "wv": Tensor(eye), "wo": Tensor(eye),
        "bq": Tensor(zero), "bk": Tensor(zero), "bv": Tensor(zero), "bo": Tensor(zero),
    }
    err = 0.0
    for _ in range(5):
        q, k, v = rng.normal(size=(3, 4)), rng.normal(size=(5, 4)), rng.normal(size=(5, 4))
        fast = multi_head_cross_attention(Tensor(q), Tensor(k), Tensor(v), 1, identity).data
        err = max(err, float(np.abs(fast - oracles.attention_loop(q, k, v)).max()))
    results.append(CheckResult("attention_vs_softmax_loop", err, ORACLE_TOL))

    err = 0.0
    for _ in range(5):
        x = rng.normal(size=(4, 6))
        g, b = rng.normal(size=6), rng.normal(size=6)
        fast = layer_norm(Tensor(x), Tensor(g), Tensor(b)).data
        err = max(err, float(np.abs(fast - oracles.layer_norm_loop(x, g, b)).max()))
    results.append(CheckResult("layer_norm_vs_formula", err, ORACLE_TOL))

    err = 0.0
    for _ in range(50):
        predictions, gts = _random_instance_set(rng)
        fast = match_and_ap(predictions, gts, 0.5)
        slow = oracles.evaluate_category_loop(
            [(p.score, p.scene, p.pair, p.human_box, p.object_box) for p in predictions],
            [(g.scene, g.human_box, g.object_box) for g in gts],
            0.5,
        )
        err = max(err, abs(fast - slow))
    results.append(CheckResult("evaluator_vs_bruteforce", err, ORACLE_TOL))

    # closed-form spot values
    err = max(
        abs(iou((0, 0, 2, 2), (1, 1, 3, 3)) - 1.0 / 7.0),
        abs(iou((0.1, 0.1, 0.5, 0.5), (0.1, 0.1, 0.5, 0.5)) - 1.0),
        iou((0, 0, 0.2, 0.2), (0.5, 0.5, 0.9, 0.9)),
    )
    results.append(CheckResult("iou_closed_form", err, EXACT_TOL))

    focal = FocalConfig(alpha=0.25, gamma=2.0)
    loss = focal_bce(Tensor(np.array([[0.5]])), np.array([[1.0]]), focal).item()
    results.append(
        CheckResult(
            "focal_closed_form", abs(loss - 0.25 * 0.25 * math.log(2.0)), EXACT_TOL
        )
    )

    fused = fuse_scores(np.array([[0.8]]), np.array([0.9]), np.array([0.7]), 2.8)
    err = abs(float(fused[0, 0]) - 0.8 * 0.9**2.8 * 0.7**2.8)
    s = rng.uniform(size=(3, 4))
    err = max(err, float(np.abs(fuse_scores(s, rng.uniform(size=3), rng.uniform(size=3), 0.0) - s).max()))
    results.append(CheckResult("fuse_closed_form", err, EXACT_TOL))

    return results


def _random_instance_set(rng):
    def rand_box():
        x1, y1 = rng.uniform(0, 0.6, size=2)
        w, h = rng.uniform(0.1, 0.4, size=2)
        return (float(x1), float(y1), float(min(x1 + w, 1.0)), float(min(y1 + h, 1.0)))

    gts = [
        GroundTruth(int(rng.integers(0, 2)), 0, rand_box(), rand_box())
        for _ in range(rng.integers(1, 6))
    ]
    predictions = []
    for i in range(rng.integers(0, 11)):
        if gts and rng.uniform() < 0.6:
            base = gts[rng.integers(0, len(gts))]
            hbox = tuple(float(np.clip(v + rng.normal(0, 0.03), 0, 1)) for v in base.human_box)
            obox = tuple(float(np.clip(v + rng.normal(0, 0.03), 0, 1)) for v in base.object_box)
            scene = base.scene
        else:
            hbox, obox, scene = rand_box(), rand_box(), int(rng.integers(0, 2))
        predictions.append(Prediction(float(rng.uniform()), scene, i, 0, hbox, obox))
    return predictions, gts
