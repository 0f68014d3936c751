"""Shared builders for model-level tests: a small space, config, and scenes."""

import numpy as np
import pytest

from hoilab.categories import CategorySpace
from hoilab.model import ModelConfig, init_params
from hoilab.scenes import Detection, DetectorNoise, SceneSpec, generate_scene, simulate_detections


def small_space() -> CategorySpace:
    return CategorySpace.full(("person", "cup", "ball"), ("hold", "push", "wash"))


def small_config(**overrides) -> ModelConfig:
    defaults = dict(
        image_size=32,
        patch_size=8,
        embed_dim=32,
        layers=2,
        heads=4,
        adapter_dim=8,
        adapter_heads=2,
        n_queries=2,
        kernel_sizes=(1, 3),
        text_dim=8,
        det_dim=8,
        roi_size=2,
        roi_samples=2,
    )
    defaults.update(overrides)
    return ModelConfig(**defaults)


def small_scene_spec(space=None, **overrides) -> SceneSpec:
    defaults = dict(
        space=space or small_space(),
        image_size=32,
        patch_size=8,
        max_humans=1,
        max_objects=2,
    )
    defaults.update(overrides)
    return SceneSpec(**defaults)


def make_detection(box, class_index, confidence, det_dim=8, seed=0) -> Detection:
    rng = np.random.default_rng(seed)
    return Detection(tuple(box), class_index, confidence, rng.normal(size=det_dim))


def scene_with_detections(seed=0, spec=None, noise=None, n_classes=3):
    spec = spec or small_scene_spec()
    noise = noise or DetectorNoise(feature_dim=8)
    scene = generate_scene(spec, seed)
    dets = simulate_detections(scene, noise, seed, n_classes=n_classes)
    return scene, dets


@pytest.fixture
def space():
    return small_space()


@pytest.fixture
def cfg():
    return small_config()


@pytest.fixture
def params(cfg, space):
    return init_params(cfg, space, seed=0)
