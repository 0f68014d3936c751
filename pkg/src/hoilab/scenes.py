"""Synthetic interaction scenes, a controllable detector oracle, dataset files.

A scene renders human and object glyphs on a flat background. Each
interacting pair additionally carries a small "cue" mark inside the object
box whose color and position encode the verb; a dimmed twin mark sits on
the interacting human. The verb of an instance is therefore a function of
local cue pixels, never of global layout: masking the cue makes the verb
undecidable, and identical layouts with different verbs differ in cue
pixels only.
"""

from __future__ import annotations

import hashlib
import io
from dataclasses import dataclass, field, replace

import numpy as np

from .categories import CategorySpace
from .errors import GenerationError, InvalidArgumentError, ParseError

LAYOUT_RETRIES = 60
# entities snap to a 3×3 slot grid with two size tiers. Layouts therefore
# repeat across scenes, so box geometry alone cannot predict the verb and
# the local cue mark is the only channel that can
SLOT_GRID = 3
SLOT_SPAN = 0.32
SLOT_MARGIN = 0.02
BOX_TIERS = (0.30, 0.24)
BACKGROUND = 0.92
HUMAN_COLOR = (0.24, 0.24, 0.32)
CUE_MATCH_TOL = 0.05
INTERACT_PROB = 0.7

# saturated palette reserved for verb marks; entity colors stay muted.
# each verb has BOTH a distinct mark color (appearance channel) and a
# distinct position inside the object box (locality channel). With several
# simultaneous interactions per scene, attributing a mark to the right
# pair requires box-aligned local reading, not global color pooling
CUE_COLORS = (
    (1.0, 0.12, 0.08),
    (0.1, 1.0, 0.12),
    (0.12, 0.25, 1.0),
    (1.0, 0.95, 0.1),
    (1.0, 0.1, 0.95),
    (0.1, 1.0, 0.95),
    (1.0, 0.55, 0.1),
    (0.55, 0.1, 1.0),
)
MAX_VERBS = len(CUE_COLORS)


def seeded_rng(*keys) -> np.random.Generator:
    """Deterministic generator from a tuple of ints/strings."""
    ints = []
    for key in keys:
        if isinstance(key, str):
            digest = hashlib.sha256(key.encode()).digest()
            ints.append(int.from_bytes(digest[:8], "little"))
        else:
            ints.append(int(key) & 0xFFFFFFFFFFFFFFFF)
    return np.random.default_rng(np.random.SeedSequence(ints))


@dataclass(frozen=True)
class Instance:
    """One ground-truth interaction: boxes, object class, verb."""

    human_box: tuple[float, float, float, float]
    object_box: tuple[float, float, float, float]
    object_class: int
    verb: int
    human_entity: int
    object_entity: int
    category_index: int


@dataclass(frozen=True)
class Entity:
    box: tuple[float, float, float, float]
    class_index: int


@dataclass(frozen=True)
class Scene:
    """Rendered pixels plus ground truth. Pixels are float32 in [0, 1]."""

    pixels: np.ndarray  # image_size × image_size × 3
    entities: tuple[Entity, ...]
    instances: tuple[Instance, ...]
    image_size: int

    def with_instances(self, instances) -> "Scene":
        return replace(self, instances=tuple(instances))


@dataclass(frozen=True)
class Detection:
    """One detector output: box, class, confidence, feature vector."""

    box: tuple[float, float, float, float]
    class_index: int
    confidence: float
    feature: np.ndarray

    def __post_init__(self):
        x1, y1, x2, y2 = self.box
        if not (x1 < x2 and y1 < y2):
            raise InvalidArgumentError(f"detection box {self.box} is degenerate")
        if not 0.0 <= self.confidence <= 1.0:
            raise InvalidArgumentError(f"confidence {self.confidence} outside [0, 1]")


@dataclass(frozen=True)
class DetectorNoise:
    box_jitter: float = 0.0
    class_flip: float = 0.0
    miss: float = 0.0
    feature_dim: int = 32
    feature_noise: float = 0.0

    def __post_init__(self):
        for name in ("class_flip", "miss"):
            p = getattr(self, name)
            if not 0.0 <= p <= 1.0:
                raise InvalidArgumentError(f"{name}={p} outside [0, 1]")


@dataclass(frozen=True)
class SceneSpec:
    """Everything that parameterizes scene synthesis."""

    space: CategorySpace
    image_size: int = 64
    patch_size: int = 8
    max_humans: int = 1
    max_objects: int = 3
    cue_scale: float = 0.3
    frequency_weights: tuple[float, ...] = ()
    interact_prob: float = INTERACT_PROB

    def __post_init__(self):
        if self.image_size % self.patch_size != 0:
            raise InvalidArgumentError(
                f"image_size {self.image_size} not divisible by patch_size {self.patch_size}"
            )
        if self.space.n_verbs > MAX_VERBS:
            raise InvalidArgumentError(
                f"at most {MAX_VERBS} verbs supported, got {self.space.n_verbs}"
            )
        weights = self.frequency_weights
        if not weights:
            object.__setattr__(
                self, "frequency_weights", (1.0,) * self.space.n_categories
            )
        elif len(weights) != self.space.n_categories:
            raise InvalidArgumentError(
                f"{len(weights)} frequency weights for {self.space.n_categories} categories"
            )


# -- cue grammar ------------------------------------------------------------


def cue_anchor(verb: int, n_verbs: int) -> tuple[float, float]:
    """Verb-specific relative position inside a box (object-agnostic)."""
    angle = 2.0 * np.pi * verb / max(n_verbs, 1)
    return 0.5 + 0.3 * np.cos(angle), 0.5 + 0.3 * np.sin(angle)


def cue_rect(box, verb: int, spec: SceneSpec) -> tuple[int, int, int, int]:
    """Integer pixel rectangle (x0, y0, x1, y1), exclusive upper bounds."""
    x1, y1, x2, y2 = box
    size_px = spec.image_size
    w = (x2 - x1) * size_px
    h = (y2 - y1) * size_px
    side = int(round(np.clip(spec.cue_scale * min(w, h), 2, spec.patch_size)))
    ax, ay = cue_anchor(verb, spec.space.n_verbs)
    cx = (x1 + ax * (x2 - x1)) * size_px
    cy = (y1 + ay * (y2 - y1)) * size_px
    x0 = int(np.clip(round(cx - side / 2), 0, size_px - side))
    y0 = int(np.clip(round(cy - side / 2), 0, size_px - side))
    return x0, y0, x0 + side, y0 + side


def entity_palette(n_objects: int) -> np.ndarray:
    """Muted, deterministic per-class colors that cannot match cue colors."""
    rng = seeded_rng("entity-palette", n_objects)
    hues = (np.arange(n_objects) * 0.618034 + rng.uniform(0, 1)) % 1.0
    colors = np.empty((n_objects, 3))
    for i, hue in enumerate(hues):
        colors[i] = _hsv_to_rgb(hue, 0.5, 0.72)
    return colors


def _hsv_to_rgb(h, s, v):
    i = int(h * 6.0) % 6
    f = h * 6.0 - int(h * 6.0)
    p, q, t = v * (1 - s), v * (1 - f * s), v * (1 - (1 - f) * s)
    return [(v, t, p), (q, v, p), (p, v, t), (p, q, v), (t, p, v), (v, p, q)][i]


def _pixel_rect(box, size):
    x1, y1, x2, y2 = box
    return (
        int(round(x1 * size)),
        int(round(y1 * size)),
        max(int(round(x1 * size)) + 2, int(round(x2 * size))),
        max(int(round(y1 * size)) + 2, int(round(y2 * size))),
    )


def _rects_intersect(a, b) -> bool:
    return not (a[2] <= b[0] or b[2] <= a[0] or a[3] <= b[1] or b[3] <= a[1])


def _draw_entity(img, entity: Entity, spec: SceneSpec, palette):
    size = spec.image_size
    x0, y0, x1, y1 = _pixel_rect(entity.box, size)
    if entity.class_index == spec.space.human_index:
        color = np.array(HUMAN_COLOR, dtype=np.float32)
        # T-shaped glyph: head block over a torso column
        w, h = x1 - x0, y1 - y0
        head_h = max(1, h // 3)
        img[y0 : y0 + head_h, x0:x1] = color
        torso_w = max(2, w // 3)
        tx = x0 + (w - torso_w) // 2
        img[y0 + head_h : y1, tx : tx + torso_w] = color
    else:
        color = palette[entity.class_index].astype(np.float32)
        img[y0:y1, x0:x1] = color
        img[y0:y1, x0] = color * 0.55
        img[y0:y1, x1 - 1] = color * 0.55
        img[y0, x0:x1] = color * 0.55
        img[y1 - 1, x0:x1] = color * 0.55


def generate_scene(spec: SceneSpec, seed: int) -> Scene:
    """Render one labeled scene, deterministic in (spec, seed).

    Layouts are resampled until no cue rectangle intersects another entity
    box or another cue; a bounded number of attempts guards against
    unsatisfiable specs.
    """
    rng = seeded_rng("scene", seed)
    space = spec.space
    palette = entity_palette(space.n_objects)
    weights = np.asarray(spec.frequency_weights, dtype=np.float64)
    if weights.sum() <= 0:
        raise InvalidArgumentError("frequency weights sum to zero")
    weights = weights / weights.sum()
    object_marginal = np.zeros(space.n_objects)
    for (o, _), w in zip(space.categories, weights):
        object_marginal[o] += w

    for _ in range(LAYOUT_RETRIES):
        scene = _try_layout(spec, rng, palette, weights, object_marginal)
        if scene is not None:
            return scene
    raise GenerationError(
        f"could not satisfy cue placement constraints in {LAYOUT_RETRIES} layouts"
    )


def _slot_box(slot: int, tier: int) -> tuple[float, float, float, float]:
    row, col = divmod(slot, SLOT_GRID)
    side = BOX_TIERS[tier]
    inset = (SLOT_SPAN - side) / 2
    x1 = SLOT_MARGIN + col * SLOT_SPAN + inset
    y1 = SLOT_MARGIN + row * SLOT_SPAN + inset
    return (x1, y1, x1 + side, y1 + side)


def _try_layout(spec, rng, palette, weights, object_marginal):
    space = spec.space
    n_humans = int(rng.integers(1, spec.max_humans + 1)) if spec.max_humans > 0 else 0
    n_objects = int(rng.integers(1, spec.max_objects + 1)) if spec.max_objects > 0 else 0

    n_slots = SLOT_GRID * SLOT_GRID
    total = n_humans + n_objects
    if total > n_slots:
        raise GenerationError(f"{total} entities exceed the {n_slots} placement slots")
    slots = rng.choice(n_slots, size=total, replace=False)
    boxes = [
        _slot_box(int(slot), int(rng.integers(0, len(BOX_TIERS)))) for slot in slots
    ]

    entities = [Entity(boxes[i], space.human_index) for i in range(n_humans)]
    for j in range(n_objects):
        marginal = object_marginal / object_marginal.sum()
        cls = int(rng.choice(space.n_objects, p=marginal))
        entities.append(Entity(boxes[n_humans + j], cls))

    # each object interacts with at most one human so its cue is unambiguous
    instances = []
    cue_rects = []
    if n_humans > 0:
        for j in range(n_objects):
            if rng.uniform() >= spec.interact_prob:
                continue
            obj = entities[n_humans + j]
            partner = int(rng.integers(0, n_humans))
            conditional = np.array(
                [
                    weights[c] if space.categories[c][0] == obj.class_index else 0.0
                    for c in range(space.n_categories)
                ]
            )
            if conditional.sum() <= 0:
                continue  # class has no category mass; leave it a distractor
            cat = int(rng.choice(space.n_categories, p=conditional / conditional.sum()))
            verb = space.categories[cat][1]
            instances.append(
                Instance(
                    human_box=entities[partner].box,
                    object_box=obj.box,
                    object_class=obj.class_index,
                    verb=verb,
                    human_entity=partner,
                    object_entity=n_humans + j,
                    category_index=cat,
                )
            )
            cue_rects.append(cue_rect(obj.box, verb, spec))

    # cue rectangles may not touch any foreign entity box or another cue
    size = spec.image_size
    entity_rects = [_pixel_rect(e.box, size) for e in entities]
    for inst, rect in zip(instances, cue_rects):
        for idx, erect in enumerate(entity_rects):
            if idx != inst.object_entity and _rects_intersect(rect, erect):
                return None
    for i in range(len(cue_rects)):
        for j in range(i + 1, len(cue_rects)):
            if _rects_intersect(cue_rects[i], cue_rects[j]):
                return None

    img = np.full((size, size, 3), BACKGROUND, dtype=np.float32)
    for entity in entities:
        _draw_entity(img, entity, spec, palette)
    for inst in instances:  # dimmed twin mark on the interacting human
        hx0, hy0, hx1, hy1 = cue_rect(inst.human_box, inst.verb, spec)
        img[hy0:hy1, hx0:hx1] = np.array(CUE_COLORS[inst.verb], dtype=np.float32) * 0.5
    for inst, rect in zip(instances, cue_rects):  # cues drawn last, on top
        x0, y0, x1, y1 = rect
        img[y0:y1, x0:x1] = np.array(CUE_COLORS[inst.verb], dtype=np.float32)

    return Scene(
        pixels=img,
        entities=tuple(entities),
        instances=tuple(instances),
        image_size=size,
    )


def decode_verb(pixels: np.ndarray, object_box, spec: SceneSpec) -> int | None:
    """Rule extraction: read the verb off an object's cue mark, if present.

    Scans every verb's candidate cue rectangle inside the object box and
    returns the unique verb whose full-intensity cue color fills it, or
    None when no (or more than one) verb matches.
    """
    matches = []
    for verb in range(spec.space.n_verbs):
        x0, y0, x1, y1 = cue_rect(object_box, verb, spec)
        patch = pixels[y0:y1, x0:x1].astype(np.float64)
        target = np.array(CUE_COLORS[verb])
        if patch.size and np.abs(patch - target).max() < CUE_MATCH_TOL:
            matches.append(verb)
    return matches[0] if len(matches) == 1 else None


def mask_cue(pixels: np.ndarray, object_box, verb: int, spec: SceneSpec) -> np.ndarray:
    """Return a copy with the instance's cue painted over with background."""
    out = pixels.copy()
    x0, y0, x1, y1 = cue_rect(object_box, verb, spec)
    out[y0:y1, x0:x1] = BACKGROUND
    return out


# -- detector oracle ----------------------------------------------------------


def class_feature_table(n_classes: int, dim: int) -> np.ndarray:
    """Fixed random per-class embeddings shared by every dataset."""
    rng = seeded_rng("detector-class-embedding", n_classes, dim)
    table = rng.normal(size=(n_classes, dim))
    return table / np.linalg.norm(table, axis=1, keepdims=True)


def geometry_projection(dim: int) -> np.ndarray:
    rng = seeded_rng("detector-geometry-projection", dim)
    return rng.normal(0.0, 0.5, size=(4, dim))


def simulate_detections(
    scene: Scene, noise: DetectorNoise, seed: int, n_classes: int
) -> list[Detection]:
    """Detector oracle: per-entity drop/jitter/flip with a synthetic feature.

    Confidence is 1 − mean|box jitter| − 0.3·flipped, clamped to [0, 1].
    The feature is the reported class's fixed embedding plus a fixed
    projection of the box geometry plus optional Gaussian noise.
    """
    rng = seeded_rng("detections", seed)
    class_table = class_feature_table(n_classes, noise.feature_dim)
    geom_proj = geometry_projection(noise.feature_dim)
    detections = []
    for entity in scene.entities:
        if rng.uniform() < noise.miss:
            continue
        deltas = rng.normal(0.0, noise.box_jitter, size=4) if noise.box_jitter > 0 else np.zeros(4)
        box = np.clip(np.asarray(entity.box) + deltas, 0.0, 1.0)
        box = _repair_box(box)
        flipped = rng.uniform() < noise.class_flip
        cls = entity.class_index
        if flipped and n_classes > 1:
            others = [c for c in range(n_classes) if c != cls]
            cls = int(others[rng.integers(0, len(others))])
        confidence = float(np.clip(1.0 - np.abs(deltas).mean() - (0.3 if flipped else 0.0), 0.0, 1.0))
        cx = (box[0] + box[2]) / 2
        cy = (box[1] + box[3]) / 2
        geometry = np.array([cx, cy, box[2] - box[0], box[3] - box[1]])
        feature = class_table[cls] + geometry @ geom_proj
        if noise.feature_noise > 0:
            feature = feature + rng.normal(0.0, noise.feature_noise, size=feature.shape)
        detections.append(
            Detection(tuple(float(v) for v in box), cls, confidence, feature)
        )
    return detections


def _repair_box(box, min_extent=0.01):
    """Force x1 < x2 and y1 < y2 after jitter/clamping."""
    x1, y1, x2, y2 = box
    if x2 - x1 < min_extent:
        cx = np.clip((x1 + x2) / 2, min_extent / 2, 1 - min_extent / 2)
        x1, x2 = cx - min_extent / 2, cx + min_extent / 2
    if y2 - y1 < min_extent:
        cy = np.clip((y1 + y2) / 2, min_extent / 2, 1 - min_extent / 2)
        y1, y2 = cy - min_extent / 2, cy + min_extent / 2
    return np.array([x1, y1, x2, y2])


# -- dataset files -------------------------------------------------------------

DATASET_MAGIC = "hoilab-dataset"
DATASET_VERSION = 1


def write_dataset(path, scenes, detections_per_scene, spec_digest: str, pixel_format="raw32"):
    """Serialize scenes plus their detections.

    Layout: a header line
        ``hoilab-dataset v1 digest=<hex> scenes=<n> pixfmt=<raw32|hex16>``
    then per scene a ``scene`` stanza line, a pixel payload (raw
    little-endian float32 after a byte-count line, or one hex line),
    and one line per entity / instance / detection. All numbers are
    ``repr`` round-trippable.
    """
    if pixel_format not in ("raw32", "hex16"):
        raise InvalidArgumentError(f"unknown pixel format {pixel_format!r}")
    if len(scenes) != len(detections_per_scene):
        raise InvalidArgumentError("scene and detection list lengths differ")
    with open(path, "wb") as fh:
        header = (
            f"{DATASET_MAGIC} v{DATASET_VERSION} digest={spec_digest} "
            f"scenes={len(scenes)} pixfmt={pixel_format}\n"
        )
        fh.write(header.encode())
        for idx, (scene, dets) in enumerate(zip(scenes, detections_per_scene)):
            fh.write(
                f"scene {idx} size={scene.image_size} entities={len(scene.entities)} "
                f"instances={len(scene.instances)} detections={len(dets)}\n".encode()
            )
            payload = np.ascontiguousarray(scene.pixels, dtype="<f4").tobytes()
            if pixel_format == "raw32":
                fh.write(f"pixels {len(payload)}\n".encode())
                fh.write(payload)
                fh.write(b"\n")
            else:
                fh.write(b"pixels hex " + payload.hex().encode() + b"\n")
            for e in scene.entities:
                fh.write(
                    f"entity {e.class_index} {_boxs(e.box)}\n".encode()
                )
            for inst in scene.instances:
                fh.write(
                    f"instance {inst.human_entity} {inst.object_entity} "
                    f"{inst.object_class} {inst.verb} {inst.category_index} "
                    f"{_boxs(inst.human_box)} {_boxs(inst.object_box)}\n".encode()
                )
            for det in dets:
                feat = np.ascontiguousarray(det.feature, dtype="<f8").tobytes().hex()
                fh.write(
                    f"detection {det.class_index} {det.confidence!r} "
                    f"{_boxs(det.box)} {feat}\n".encode()
                )


def _boxs(box) -> str:
    return " ".join(repr(float(v)) for v in box)


class _Reader:
    """Line reader that tracks byte offsets for error reporting."""

    def __init__(self, fh: io.BufferedReader):
        self.fh = fh
        self.offset = 0

    def line(self) -> str:
        start = self.offset
        raw = self.fh.readline()
        if not raw:
            raise ParseError("unexpected end of file", offset=start)
        self.offset += len(raw)
        try:
            return raw.decode().rstrip("\n")
        except UnicodeDecodeError as exc:
            raise ParseError("undecodable line", offset=start) from exc

    def exactly(self, n: int) -> bytes:
        start = self.offset
        data = self.fh.read(n)
        if len(data) != n:
            raise ParseError(
                f"expected {n} payload bytes, got {len(data)}", offset=start
            )
        self.offset += n
        return data


def read_dataset(path):
    """Parse a dataset file; returns (scenes, detections, digest).

    Malformed input raises :class:`ParseError` carrying the byte offset.
    """
    with open(path, "rb") as fh:
        reader = _Reader(fh)
        header = reader.line()
        fields = header.split()
        if (
            len(fields) != 5
            or fields[0] != DATASET_MAGIC
            or fields[1] != f"v{DATASET_VERSION}"
        ):
            raise ParseError("bad dataset header", offset=0)
        try:
            digest = _field(fields[2], "digest")
            n_scenes = int(_field(fields[3], "scenes"))
            pixfmt = _field(fields[4], "pixfmt")
        except ValueError as exc:
            raise ParseError(f"bad header field: {exc}", offset=0) from exc
        if pixfmt not in ("raw32", "hex16"):
            raise ParseError(f"unknown pixel format {pixfmt!r}", offset=0)

        scenes, detections = [], []
        for expected_idx in range(n_scenes):
            scenes_offset = reader.offset
            parts = reader.line().split()
            if len(parts) != 6 or parts[0] != "scene":
                raise ParseError("expected scene stanza", offset=scenes_offset)
            try:
                idx = int(parts[1])
                size = int(_field(parts[2], "size"))
                n_entities = int(_field(parts[3], "entities"))
                n_instances = int(_field(parts[4], "instances"))
                n_dets = int(_field(parts[5], "detections"))
            except ValueError as exc:
                raise ParseError(f"bad scene stanza: {exc}", offset=scenes_offset) from exc
            if idx != expected_idx:
                raise ParseError(
                    f"scene index {idx}, expected {expected_idx}", offset=scenes_offset
                )

            pix_offset = reader.offset
            pixline = reader.line().split(" ", 2)
            if pixline[0] != "pixels":
                raise ParseError("expected pixels line", offset=pix_offset)
            if pixfmt == "raw32":
                try:
                    nbytes = int(pixline[1])
                except (IndexError, ValueError) as exc:
                    raise ParseError("bad pixel byte count", offset=pix_offset) from exc
                payload = reader.exactly(nbytes)
                if reader.exactly(1) != b"\n":
                    raise ParseError("missing newline after pixels", offset=reader.offset - 1)
            else:
                if len(pixline) != 3 or pixline[1] != "hex":
                    raise ParseError("bad hex pixels line", offset=pix_offset)
                try:
                    payload = bytes.fromhex(pixline[2])
                except ValueError as exc:
                    raise ParseError("bad hex payload", offset=pix_offset) from exc
            expected_bytes = size * size * 3 * 4
            if len(payload) != expected_bytes:
                raise ParseError(
                    f"pixel payload is {len(payload)} bytes, expected {expected_bytes}",
                    offset=pix_offset,
                )
            pixels = np.frombuffer(payload, dtype="<f4").reshape(size, size, 3).copy()

            entities = []
            for _ in range(n_entities):
                off = reader.offset
                parts = reader.line().split()
                if len(parts) != 6 or parts[0] != "entity":
                    raise ParseError("expected entity line", offset=off)
                try:
                    entities.append(
                        Entity(tuple(float(v) for v in parts[2:6]), int(parts[1]))
                    )
                except ValueError as exc:
                    raise ParseError(f"bad entity line: {exc}", offset=off) from exc

            instances = []
            for _ in range(n_instances):
                off = reader.offset
                parts = reader.line().split()
                if len(parts) != 14 or parts[0] != "instance":
                    raise ParseError("expected instance line", offset=off)
                try:
                    instances.append(
                        Instance(
                            human_box=tuple(float(v) for v in parts[6:10]),
                            object_box=tuple(float(v) for v in parts[10:14]),
                            object_class=int(parts[3]),
                            verb=int(parts[4]),
                            human_entity=int(parts[1]),
                            object_entity=int(parts[2]),
                            category_index=int(parts[5]),
                        )
                    )
                except ValueError as exc:
                    raise ParseError(f"bad instance line: {exc}", offset=off) from exc

            dets = []
            for _ in range(n_dets):
                off = reader.offset
                parts = reader.line().split()
                if len(parts) != 8 or parts[0] != "detection":
                    raise ParseError("expected detection line", offset=off)
                try:
                    feature = np.frombuffer(bytes.fromhex(parts[7]), dtype="<f8").copy()
                    dets.append(
                        Detection(
                            tuple(float(v) for v in parts[3:7]),
                            int(parts[1]),
                            float(parts[2]),
                            feature,
                        )
                    )
                except (ValueError, InvalidArgumentError) as exc:
                    raise ParseError(f"bad detection line: {exc}", offset=off) from exc

            scenes.append(
                Scene(
                    pixels=pixels,
                    entities=tuple(entities),
                    instances=tuple(instances),
                    image_size=size,
                )
            )
            detections.append(dets)
        return scenes, detections, digest


def _field(token: str, name: str) -> str:
    key, _, value = token.partition("=")
    if key != name or not value:
        raise ValueError(f"expected {name}=<value>, got {token!r}")
    return value
