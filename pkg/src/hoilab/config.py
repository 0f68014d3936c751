"""Flat key=value run configuration with a content digest.

Precedence is defaults ← file ← command-line overrides. The digest covers
every semantic key (paths and the force flag are excluded so artifacts
produced from the same experiment setup are interchangeable regardless of
where they were written).
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, fields

from .categories import CategorySpace
from .errors import ConfigError, ParseError
from .model import ModelConfig
from .scenes import DetectorNoise, SceneSpec
from .training import FocalConfig, TrainSettings

# keys that never influence the digest
PATH_KEYS = frozenset(
    {"out_dir", "run_dir", "data", "eval_data", "checkpoint", "split_file", "force_digest"}
)


@dataclass
class RunConfig:
    # label universe
    objects: tuple[str, ...] = ("person", "cup", "ball")
    verbs: tuple[str, ...] = ("hold", "push", "wash")

    # scene synthesis
    image_size: int = 64
    patch_size: int = 8
    max_humans: int = 1
    max_objects: int = 3
    cue_scale: float = 0.3
    interact_prob: float = 0.7
    train_scenes: int = 120
    eval_scenes: int = 60
    data_seed: int = 0

    # detector oracle
    box_jitter: float = 0.01
    class_flip: float = 0.02
    miss_rate: float = 0.03
    feature_noise: float = 0.02
    det_dim: int = 32

    # model
    embed_dim: int = 64
    layers: int = 4
    heads: int = 4
    adapter_dim: int = 16
    adapter_heads: int = 4
    n_queries: int = 4
    kernel_sizes: tuple[int, ...] = (1, 3, 5)
    text_dim: int = 32
    roi_size: int = 3
    roi_samples: int = 2
    use_locality: bool = True
    use_interaction: bool = True
    isolate_pair_tokens: bool = False
    gate_init: float = 0.1

    # zero-shot split
    split_setting: str = "UC"
    split_k: int = 2
    split_seed: int = 0

    # training
    epochs: int = 10
    lr: float = 1e-3
    weight_decay: float = 1e-4
    focal_alpha: float = 0.25
    focal_gamma: float = 2.0
    iou_threshold: float = 0.5
    lambda_infer: float = 1.0
    seed: int = 0
    val_fraction: float = 0.2

    # ablation
    ablate_seeds: int = 3

    # paths / IO (excluded from the digest)
    out_dir: str = "runs"
    run_dir: str = ""
    data: str = ""
    eval_data: str = ""
    checkpoint: str = ""
    split_file: str = ""
    force_digest: bool = False

    # -- derived views ------------------------------------------------------

    def category_space(self) -> CategorySpace:
        if "person" not in self.objects:
            raise ConfigError("objects must include 'person' (the human class)")
        return CategorySpace.full(
            self.objects, self.verbs, human_index=self.objects.index("person")
        )

    def scene_spec(self, space: CategorySpace | None = None) -> SceneSpec:
        return SceneSpec(
            space=space or self.category_space(),
            image_size=self.image_size,
            patch_size=self.patch_size,
            max_humans=self.max_humans,
            max_objects=self.max_objects,
            cue_scale=self.cue_scale,
            interact_prob=self.interact_prob,
        )

    def detector_noise(self) -> DetectorNoise:
        return DetectorNoise(
            box_jitter=self.box_jitter,
            class_flip=self.class_flip,
            miss=self.miss_rate,
            feature_dim=self.det_dim,
            feature_noise=self.feature_noise,
        )

    def model_config(self, **overrides) -> ModelConfig:
        values = dict(
            image_size=self.image_size,
            patch_size=self.patch_size,
            embed_dim=self.embed_dim,
            layers=self.layers,
            heads=self.heads,
            adapter_dim=self.adapter_dim,
            adapter_heads=self.adapter_heads,
            n_queries=self.n_queries,
            kernel_sizes=self.kernel_sizes,
            text_dim=self.text_dim,
            det_dim=self.det_dim,
            roi_size=self.roi_size,
            roi_samples=self.roi_samples,
            use_locality=self.use_locality,
            use_interaction=self.use_interaction,
            isolate_pair_tokens=self.isolate_pair_tokens,
            gate_init=self.gate_init,
        )
        values.update(overrides)
        return ModelConfig(**values)

    def focal_config(self) -> FocalConfig:
        return FocalConfig(
            alpha=self.focal_alpha,
            gamma=self.focal_gamma,
            iou_threshold=self.iou_threshold,
        )

    def train_settings(self, **overrides) -> TrainSettings:
        values = dict(
            epochs=self.epochs,
            lr=self.lr,
            weight_decay=self.weight_decay,
            seed=self.seed,
            val_fraction=self.val_fraction,
            lambda_infer=self.lambda_infer,
        )
        values.update(overrides)
        return TrainSettings(**values)

    # -- canonical form -------------------------------------------------------

    def as_items(self) -> list[tuple[str, str]]:
        return [(f.name, _render(getattr(self, f.name))) for f in fields(self)]

    def digest(self) -> str:
        payload = "\n".join(
            f"{key}={value}" for key, value in sorted(self.as_items()) if key not in PATH_KEYS
        )
        return hashlib.sha256(payload.encode()).hexdigest()[:16]

    def write(self, path):
        with open(path, "w", encoding="utf-8") as fh:
            for key, value in self.as_items():
                fh.write(f"{key}={value}\n")


def _render(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, tuple):
        return ",".join(str(v) for v in value)
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _parse_value(key: str, raw: str, current):
    raw = raw.strip()
    if isinstance(current, bool):
        lowered = raw.lower()
        if lowered in ("true", "1", "yes"):
            return True
        if lowered in ("false", "0", "no"):
            return False
        raise ValueError(f"expected a boolean for {key}, got {raw!r}")
    if isinstance(current, int):
        return int(raw)
    if isinstance(current, float):
        return float(raw)
    if isinstance(current, tuple):
        if not raw:
            return ()
        parts = [p.strip() for p in raw.split(",")]
        if current and isinstance(current[0], int):
            return tuple(int(p) for p in parts)
        return tuple(parts)
    return raw


def load_config(path=None, overrides=()) -> RunConfig:
    """Resolve defaults ← file ← overrides; reject unknown keys."""
    cfg = RunConfig()
    known = {f.name for f in fields(cfg)}

    if path is not None:
        with open(path, encoding="utf-8") as fh:
            for line_no, line in enumerate(fh, start=1):
                stripped = line.strip()
                if not stripped or stripped.startswith("#"):
                    continue
                if "=" not in stripped:
                    raise ParseError(f"expected key=value, got {stripped!r}", line=line_no)
                key, _, raw = stripped.partition("=")
                key = key.strip()
                if key not in known:
                    raise ConfigError(f"unknown config key {key!r}")
                try:
                    value = _parse_value(key, raw, getattr(cfg, key))
                except ValueError as exc:
                    raise ParseError(str(exc), line=line_no) from exc
                setattr(cfg, key, value)

    for item in overrides:
        if "=" not in item:
            raise ConfigError(f"override must be key=value, got {item!r}")
        key, _, raw = item.partition("=")
        key = key.strip()
        if key not in known:
            raise ConfigError(f"unknown config key {key!r}")
        try:
            value = _parse_value(key, raw, getattr(cfg, key))
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
        setattr(cfg, key, value)
    return cfg
