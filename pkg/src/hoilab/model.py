"""The detection model: pair tokens refined through a frozen ViT whose layers
are each fronted by a locality adapter (patch tokens) and an interaction
adapter (pair tokens), scored against compositional text embeddings.

The backbone and the text tables/mixer are frozen random stand-ins for a
pretrained encoder; every behavioral invariant here is weight-agnostic.
Parameters are initialized from per-name seeded streams, so the same seed
yields identical shared weights whether or not adapters are enabled.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import tensor as T
from .categories import CategorySpace
from .errors import (
    DigestMismatchError,
    InvalidArgumentError,
    InvalidStateError,
    ParseError,
)
from .nn import batched_cross_attention, ffn, layer_norm, linear, multi_head_cross_attention
from .scenes import Detection, seeded_rng
from .tensor import ParamStore, Tensor


@dataclass(frozen=True)
class ModelConfig:
    image_size: int = 64
    patch_size: int = 8
    embed_dim: int = 64
    layers: int = 4
    heads: int = 4
    adapter_dim: int = 16
    adapter_heads: int = 4
    n_queries: int = 4
    kernel_sizes: tuple[int, ...] = (1, 3, 5)
    text_dim: int = 32
    det_dim: int = 32
    roi_size: int = 3
    roi_samples: int = 2
    use_locality: bool = True
    use_interaction: bool = True
    isolate_pair_tokens: bool = False
    # 0.0 gives exact identity at init but starves adapter internals of
    # gradient (they see loss only through the gate); a small nonzero value
    # bootstraps learning at desk scale
    gate_init: float = 0.1

    def __post_init__(self):
        if self.image_size % self.patch_size != 0:
            raise InvalidArgumentError("image_size must be divisible by patch_size")
        if self.embed_dim % self.heads != 0:
            raise InvalidArgumentError("embed_dim must be divisible by heads")
        if self.adapter_dim % self.adapter_heads != 0:
            raise InvalidArgumentError("adapter_dim must be divisible by adapter_heads")
        if self.adapter_dim >= self.embed_dim:
            raise InvalidArgumentError("adapter_dim must be smaller than embed_dim")
        if any(k % 2 == 0 or k < 1 for k in self.kernel_sizes):
            raise InvalidArgumentError("kernel sizes must be odd and positive")
        if self.n_queries < 1:
            raise InvalidArgumentError("n_queries must be ≥ 1")

    @property
    def grid(self) -> int:
        return self.image_size // self.patch_size

    @property
    def n_patches(self) -> int:
        return self.grid * self.grid


@dataclass(frozen=True)
class PairIndex:
    """All valid (human, other) detection index pairs, lexicographic."""

    pairs: tuple[tuple[int, int], ...]

    @property
    def n_pairs(self) -> int:
        return len(self.pairs)


@dataclass
class TokenSequence:
    """Per-layer transformer state: [pair tokens; CLS; patch grid]."""

    pair_tokens: Tensor  # N_pair × D
    cls_token: Tensor  # 1 × D
    patch_tokens: Tensor  # (H·W) × D
    grid: tuple[int, int]
    layer_index: int


# -- parameter initialization -------------------------------------------------


def _rng_for(seed: int, name: str) -> np.random.Generator:
    return seeded_rng(seed, "param", name)


def _add(store, name, shape, seed, trainable, std):
    if std == 0.0:
        data = np.zeros(shape)
    else:
        data = _rng_for(seed, name).normal(0.0, std, size=shape)
    store.add(name, data, trainable)


def _add_zeros(store, name, shape, trainable):
    store.add(name, np.zeros(shape), trainable)


def _add_ffn(store, name, d_in, d_out, seed, trainable, std=None, hidden=None):
    # fan-in scaling by default keeps signal magnitude through deep chains
    hidden = max(d_in, d_out) if hidden is None else hidden
    _add(store, f"{name}.w1", (d_in, hidden), seed, trainable, std or d_in**-0.5)
    _add_zeros(store, f"{name}.b1", (hidden,), trainable)
    _add(store, f"{name}.w2", (hidden, d_out), seed, trainable, std or hidden**-0.5)
    _add_zeros(store, f"{name}.b2", (d_out,), trainable)


def _add_linear(store, name, d_in, d_out, seed, trainable, std=None):
    _add(store, f"{name}.w", (d_in, d_out), seed, trainable, std or d_in**-0.5)
    _add_zeros(store, f"{name}.b", (d_out,), trainable)


def _add_attention(store, name, d, seed, trainable, std=None):
    for proj in ("wq", "wk", "wv", "wo"):
        _add(store, f"{name}.{proj}", (d, d), seed, trainable, std or d**-0.5)
    for bias in ("bq", "bk", "bv", "bo"):
        _add_zeros(store, f"{name}.{bias}", (d,), trainable)


def _add_layer_norm(store, name, d, trainable):
    store.add(f"{name}.g", np.ones(d), trainable)
    store.add(f"{name}.b", np.zeros(d), trainable)


def init_params(cfg: ModelConfig, space: CategorySpace, seed: int = 0) -> ParamStore:
    """Create every model parameter; adapters start gated to identity."""
    store = ParamStore()
    d = cfg.embed_dim
    da = cfg.adapter_dim
    backbone_std = 1.0 / np.sqrt(d)

    # frozen ViT stand-in
    patch_dim = cfg.patch_size * cfg.patch_size * 3
    _add(store, "backbone.patch.w", (patch_dim, d), seed, False, 0.02)
    _add_zeros(store, "backbone.patch.b", (d,), False)
    _add(store, "backbone.pos", (1 + cfg.n_patches, d), seed, False, 0.02)
    _add(store, "backbone.cls", (1, d), seed, False, 0.02)
    for l in range(cfg.layers):
        blk = f"backbone.l{l:02d}"
        _add_layer_norm(store, f"{blk}.ln1", d, False)
        _add_attention(store, f"{blk}.attn", d, seed, False, backbone_std)
        _add_layer_norm(store, f"{blk}.ln2", d, False)
        _add(store, f"{blk}.mlp.w1", (d, 4 * d), seed, False, backbone_std)
        _add_zeros(store, f"{blk}.mlp.b1", (4 * d,), False)
        _add(store, f"{blk}.mlp.w2", (4 * d, d), seed, False, 0.5 * backbone_std)
        _add_zeros(store, f"{blk}.mlp.b2", (d,), False)

    # pair-token construction (trainable)
    _add_ffn(store, "pair.ffn", 2 * cfg.det_dim, d, seed, True, hidden=d)
    _add_linear(store, "pair.box", 8, d, seed, True)

    for l in range(cfg.layers):
        if cfg.use_locality:
            p = f"loc{l:02d}"
            _add_ffn(store, f"{p}.down", d, da, seed, True)
            _add_ffn(store, f"{p}.layout", 5 + cfg.text_dim, da, seed, True)
            _add(store, f"{p}.null", (da,), seed, True, da**-0.5)
            _add_ffn(store, f"{p}.fuse", da, da, seed, True)
            _add_layer_norm(store, f"{p}.ln", da, True)
            for k in cfg.kernel_sizes:
                _add(store, f"{p}.conv{k}.w", (k, k, da, da), seed, True, (k * k * da) ** -0.5)
                _add_zeros(store, f"{p}.conv{k}.b", (da,), True)
            _add_ffn(store, f"{p}.merge", da, da, seed, True)
            _add_ffn(store, f"{p}.up", da, d, seed, True)
            store.add(f"{p}.gate", np.full(d, cfg.gate_init), True)
        if cfg.use_interaction:
            p = f"inter{l:02d}"
            _add_ffn(store, f"{p}.region", d, da, seed, True)
            _add(store, f"{p}.queries", (cfg.n_queries, da), seed, True, da**-0.5)
            _add_attention(store, f"{p}.ctx", da, seed, True)
            _add_attention(store, f"{p}.pattern", da, seed, True)
            _add_ffn(store, f"{p}.token", d, da, seed, True)
            _add_attention(store, f"{p}.read", da, seed, True)
            _add_ffn(store, f"{p}.fuse", 2 * da, d, seed, True)
            store.add(f"{p}.gate", np.full(d, cfg.gate_init), True)

    # frozen text tables/mixer + trainable prompt offset and temperature
    for table, count in (("objects", space.n_objects), ("verbs", space.n_verbs)):
        rows = _rng_for(seed, f"text.{table}").normal(size=(count, cfg.text_dim))
        rows /= np.linalg.norm(rows, axis=1, keepdims=True)
        store.add(f"text.{table}", rows, False)
    _add_ffn(
        store,
        "text.mixer",
        2 * cfg.text_dim,
        d,
        seed,
        False,
        1.0 / np.sqrt(2 * cfg.text_dim),
        hidden=d,
    )
    _add_zeros(store, "text.prompt", (2 * cfg.text_dim,), True)
    store.add("text.log_tau", np.zeros(1), True)  # τ = exp(·) stays positive
    return store


# -- pairing and token construction ------------------------------------------


def set_gates(params: ParamStore, value: float):
    """Overwrite every adapter gate, e.g. 0.0 for the exact-identity state."""
    for name, t in params.trainable():
        if name.endswith(".gate"):
            t.data[:] = value


def enumerate_pairs(detections: list[Detection], human_class: int) -> PairIndex:
    """Every ordered (u, v) with u a human detection and u ≠ v."""
    pairs = tuple(
        (u, v)
        for u in range(len(detections))
        if detections[u].class_index == human_class
        for v in range(len(detections))
        if v != u
    )
    return PairIndex(pairs)


def construct_pair_tokens(
    detections: list[Detection], index: PairIndex, params: ParamStore, cfg: ModelConfig
) -> Tensor:
    """Project concatenated detector features of each pair, plus a learned
    encoding of the pair's box geometry."""
    feats = np.zeros((index.n_pairs, 2 * cfg.det_dim))
    boxes = np.zeros((index.n_pairs, 8))
    for i, (u, v) in enumerate(index.pairs):
        if detections[u].feature.shape != (cfg.det_dim,):
            raise InvalidArgumentError(
                f"detector feature has shape {detections[u].feature.shape}, "
                f"expected ({cfg.det_dim},)"
            )
        feats[i, : cfg.det_dim] = detections[u].feature
        feats[i, cfg.det_dim :] = detections[v].feature
        boxes[i, :4] = detections[u].box
        boxes[i, 4:] = detections[v].box
    tokens = ffn(Tensor(feats), params.subset("pair.ffn"))
    return tokens + linear(Tensor(boxes), params.subset("pair.box"))


def embed_patches(
    pixels: np.ndarray,
    detections: list[Detection],
    params: ParamStore,
    cfg: ModelConfig,
    space: CategorySpace,
) -> tuple[TokenSequence, PairIndex]:
    """Layer-0 state: patchify + position embeddings, CLS, pair tokens."""
    size = cfg.image_size
    if pixels.shape != (size, size, 3):
        raise InvalidArgumentError(
            f"pixels have shape {pixels.shape}, expected ({size}, {size}, 3)"
        )
    g, p = cfg.grid, cfg.patch_size
    patches = (
        np.asarray(pixels, dtype=np.float64)
        .reshape(g, p, g, p, 3)
        .transpose(0, 2, 1, 3, 4)
        .reshape(g * g, p * p * 3)
    )
    pos = params["backbone.pos"]
    patch_tokens = (
        Tensor(patches) @ params["backbone.patch.w"] + params["backbone.patch.b"]
    ) + pos[1:]
    cls_token = params["backbone.cls"] + pos[0:1]
    index = enumerate_pairs(detections, space.human_index)
    pair_tokens = construct_pair_tokens(detections, index, params, cfg)
    seq = TokenSequence(pair_tokens, cls_token, patch_tokens, (g, g), 0)
    return seq, index


# -- locality adapter -----------------------------------------------------------


def build_layout_embedding(
    detections: list[Detection],
    layer_prefix: str,
    params: ParamStore,
    cfg: ModelConfig,
) -> Tensor:
    """Per-cell embedding of the covering detection's box/confidence/class.

    A cell belongs to the covering detection with the highest confidence
    (ties to the lower index); uncovered cells use the learned null row.
    """
    g = cfg.grid
    null_row = params[f"{layer_prefix}.null"].reshape(1, cfg.adapter_dim)
    if not detections:
        return T.take_rows(null_row, np.zeros(g * g, dtype=np.intp))

    centers_x = (np.arange(g) + 0.5) / g
    centers_y = (np.arange(g) + 0.5) / g
    cover = np.full((g, g), len(detections), dtype=np.intp)
    best_conf = np.full((g, g), -1.0)
    for t, det in enumerate(detections):
        x1, y1, x2, y2 = det.box
        inside = (
            (centers_y[:, None] >= y1)
            & (centers_y[:, None] <= y2)
            & (centers_x[None, :] >= x1)
            & (centers_x[None, :] <= x2)
        )
        better = inside & (det.confidence > best_conf)
        cover[better] = t
        best_conf[better] = det.confidence

    text_table = params["text.objects"].data
    inputs = np.zeros((len(detections), 5 + cfg.text_dim))
    for t, det in enumerate(detections):
        inputs[t, :4] = det.box
        inputs[t, 4] = det.confidence
        inputs[t, 5:] = text_table[det.class_index]
    rows = ffn(Tensor(inputs), params.subset(f"{layer_prefix}.layout"))
    all_rows = T.concat([rows, null_row], axis=0)
    return T.take_rows(all_rows, cover.reshape(-1))


def locality_adapter(
    patch_tokens: Tensor,
    detections: list[Detection],
    layer: int,
    params: ParamStore,
    cfg: ModelConfig,
) -> Tensor:
    """Inject neighborhood-aggregated, layout-aware features into patches."""
    p = f"loc{layer:02d}"
    g = cfg.grid
    da = cfg.adapter_dim

    narrow = ffn(patch_tokens, params.subset(f"{p}.down"))
    layout = build_layout_embedding(detections, p, params, cfg)
    fused = ffn(narrow + layout, params.subset(f"{p}.fuse"))
    fused = layer_norm(fused, params[f"{p}.ln.g"], params[f"{p}.ln.b"])

    grid_map = fused.reshape(g, g, da)
    pooled = None
    for k in cfg.kernel_sizes:
        y = T.conv2d(grid_map, params[f"{p}.conv{k}.w"]) + params[f"{p}.conv{k}.b"]
        pooled = y if pooled is None else pooled + y
    merged = ffn(pooled.reshape(g * g, da), params.subset(f"{p}.merge"))
    update = ffn(merged, params.subset(f"{p}.up"))
    return patch_tokens + params[f"{p}.gate"] * update


# -- interaction adapter ------------------------------------------------------


def clamp_box_min_extent(box, min_extent: float):
    """Grow a (possibly collapsed) normalized box to a minimum side length."""
    x1, y1, x2, y2 = (float(np.clip(v, 0.0, 1.0)) for v in box)
    if x2 - x1 < min_extent:
        cx = float(np.clip((x1 + x2) / 2, min_extent / 2, 1 - min_extent / 2))
        x1, x2 = cx - min_extent / 2, cx + min_extent / 2
    if y2 - y1 < min_extent:
        cy = float(np.clip((y1 + y2) / 2, min_extent / 2, 1 - min_extent / 2))
        y1, y2 = cy - min_extent / 2, cy + min_extent / 2
    return (x1, y1, x2, y2)


def pattern_reasoning(
    region_h: Tensor, region_o: Tensor, prefix: str, params: ParamStore, cfg: ModelConfig
) -> tuple[Tensor, Tensor]:
    """Query-based context extraction per region, then cross-region attention.

    Accepts region features as s²×D_a for one pair or B×s²×D_a for a batch
    of pairs; returns matching N_p×D_a or B×N_p×D_a pattern features.
    """
    single = region_h.ndim == 2
    if single:
        region_h = region_h.reshape(1, *region_h.shape)
        region_o = region_o.reshape(1, *region_o.shape)
    heads = cfg.adapter_heads
    queries = params[f"{prefix}.queries"].reshape(1, cfg.n_queries, cfg.adapter_dim)
    ctx = params.subset(f"{prefix}.ctx")
    ctx_h = batched_cross_attention(queries, region_h, region_h, heads, ctx)
    ctx_o = batched_cross_attention(queries, region_o, region_o, heads, ctx)
    pattern = params.subset(f"{prefix}.pattern")
    pat_h = batched_cross_attention(ctx_h, ctx_o, ctx_o, heads, pattern)
    pat_o = batched_cross_attention(ctx_o, ctx_h, ctx_h, heads, pattern)
    if single:
        return (
            pat_h.reshape(cfg.n_queries, cfg.adapter_dim),
            pat_o.reshape(cfg.n_queries, cfg.adapter_dim),
        )
    return pat_h, pat_o


def interaction_adapter(
    pair_tokens: Tensor,
    patch_tokens: Tensor,
    pair_boxes: list[tuple],
    layer: int,
    params: ParamStore,
    cfg: ModelConfig,
) -> Tensor:
    """Update each pair token from pooled human/object region patterns."""
    n_pairs = pair_tokens.shape[0]
    if n_pairs == 0:
        return pair_tokens
    p = f"inter{layer:02d}"
    g = cfg.grid
    s = cfg.roi_size
    d = cfg.embed_dim
    da = cfg.adapter_dim
    grid_map = patch_tokens.reshape(g, g, d)
    min_extent = 1.0 / g  # jittered detections may collapse; clamp, don't fail
    heads = cfg.adapter_heads

    pooled = {"h": [], "o": []}
    for human_box, object_box in pair_boxes:
        for role, box in (("h", human_box), ("o", object_box)):
            box = clamp_box_min_extent(box, min_extent)
            pooled[role].append(
                T.roi_align(grid_map, box, s, cfg.roi_samples).reshape(1, s * s, d)
            )
    region = params.subset(f"{p}.region")
    region_h = ffn(T.concat(pooled["h"], axis=0), region)  # B×s²×D_a
    region_o = ffn(T.concat(pooled["o"], axis=0), region)

    pat_h, pat_o = pattern_reasoning(region_h, region_o, p, params, cfg)
    token_q = ffn(pair_tokens, params.subset(f"{p}.token")).reshape(n_pairs, 1, da)
    read = params.subset(f"{p}.read")
    read_h = batched_cross_attention(token_q, pat_h, pat_h, heads, read)
    read_o = batched_cross_attention(token_q, pat_o, pat_o, heads, read)
    fused = ffn(T.concat([read_h, read_o], axis=2), params.subset(f"{p}.fuse"))
    delta = fused.reshape(n_pairs, d)
    return pair_tokens + params[f"{p}.gate"] * delta


# -- frozen backbone layer -----------------------------------------------------


def backbone_layer(seq: TokenSequence, layer: int, params: ParamStore, cfg: ModelConfig) -> TokenSequence:
    """One frozen pre-LN transformer block over [pair; cls; patches]."""
    blk = f"backbone.l{layer:02d}"
    n_pairs = seq.pair_tokens.shape[0]
    x = T.concat([seq.pair_tokens, seq.cls_token, seq.patch_tokens], axis=0)

    mask = None
    if cfg.isolate_pair_tokens and n_pairs > 0:
        n = x.shape[0]
        mask = np.zeros((n, n))
        mask[n_pairs:, :n_pairs] = -np.inf  # cls/patches blind to pair tokens

    normed = layer_norm(x, params[f"{blk}.ln1.g"], params[f"{blk}.ln1.b"])
    x = x + multi_head_cross_attention(
        normed, normed, normed, cfg.heads, params.subset(f"{blk}.attn"), mask=mask
    )
    normed = layer_norm(x, params[f"{blk}.ln2.g"], params[f"{blk}.ln2.b"])
    x = x + ffn(normed, params.subset(f"{blk}.mlp"))

    return TokenSequence(
        pair_tokens=x[:n_pairs],
        cls_token=x[n_pairs : n_pairs + 1],
        patch_tokens=x[n_pairs + 1 :],
        grid=seq.grid,
        layer_index=layer + 1,
    )


# -- full forward ---------------------------------------------------------------


def forward_pass(
    pixels: np.ndarray,
    detections: list[Detection],
    params: ParamStore,
    cfg: ModelConfig,
    space: CategorySpace,
) -> tuple[TokenSequence, PairIndex]:
    """Adapters then frozen block, repeated for every layer."""
    seq, index = embed_patches(pixels, detections, params, cfg, space)
    pair_boxes = [
        (detections[u].box, detections[v].box) for u, v in index.pairs
    ]
    for layer in range(cfg.layers):
        patches = seq.patch_tokens
        if cfg.use_locality:
            patches = locality_adapter(patches, detections, layer, params, cfg)
        pair = seq.pair_tokens
        if cfg.use_interaction:
            pair = interaction_adapter(pair, patches, pair_boxes, layer, params, cfg)
        seq = TokenSequence(pair, seq.cls_token, patches, seq.grid, seq.layer_index)
        seq = backbone_layer(seq, layer, params, cfg)
    return seq, index


# -- scoring ----------------------------------------------------------------------


def category_embeddings(params: ParamStore, cfg: ModelConfig, space: CategorySpace) -> Tensor:
    """Unit-norm rows, one per category, composed from object ⊕ verb tables.

    Unseen categories get rows by the same composition; the learnable
    prompt offset shifts the mixer input, so the rows respond to training
    without the tables or mixer moving.
    """
    obj_rows = params["text.objects"].data
    verb_rows = params["text.verbs"].data
    base = np.concatenate(
        [
            obj_rows[[o for o, _ in space.categories]],
            verb_rows[[v for _, v in space.categories]],
        ],
        axis=1,
    )
    mixed = ffn(Tensor(base) + params["text.prompt"], params.subset("text.mixer"))
    norms = T.sqrt(T.tsum(mixed * mixed, axis=1, keepdims=True))
    return mixed / norms


def interaction_scores(
    pair_tokens: Tensor, params: ParamStore, cfg: ModelConfig, space: CategorySpace
) -> Tensor:
    """Sigmoid of temperature-scaled similarity to every category row."""
    log_tau = params["text.log_tau"]
    tau = float(np.exp(log_tau.data[0]))
    if not np.isfinite(tau) or tau <= 0.0:
        raise InvalidStateError(f"temperature {tau} must be finite and positive")
    embeddings = category_embeddings(params, cfg, space)
    logits = (pair_tokens @ T.transpose(embeddings)) / T.exp(log_tau)
    return T.sigmoid(logits)


# -- checkpoints -------------------------------------------------------------------

CKPT_MAGIC = "hoilab-ckpt"
CKPT_VERSION = 1


def save_checkpoint(path, store: ParamStore, config_digest: str):
    """Manifest of (name, shape, frozen, offset) then raw little-endian f64."""
    entries = list(store.items())
    with open(path, "wb") as fh:
        fh.write(f"{CKPT_MAGIC} v{CKPT_VERSION} digest={config_digest} params={len(entries)}\n".encode())
        offset = 0
        blobs = []
        for name, t in entries:
            blob = np.ascontiguousarray(t.data, dtype="<f8").tobytes()
            shape = ",".join(str(s) for s in t.data.shape) or "scalar"
            frozen = 0 if t.requires_grad else 1
            fh.write(f"{name} shape={shape} frozen={frozen} offset={offset}\n".encode())
            blobs.append(blob)
            offset += len(blob)
        fh.write(b"payload\n")
        for blob in blobs:
            fh.write(blob)


def load_checkpoint(path, store: ParamStore, expected_digest: str | None = None, force: bool = False) -> str:
    """Load parameter data into ``store``; shapes and names must agree.

    The stored config digest must match ``expected_digest`` unless
    ``force`` is set.
    """
    with open(path, "rb") as fh:
        header = fh.readline().decode().split()
        if len(header) != 4 or header[0] != CKPT_MAGIC or header[1] != f"v{CKPT_VERSION}":
            raise ParseError("not a checkpoint file", offset=0)
        digest = header[2].split("=", 1)[1]
        n_params = int(header[3].split("=", 1)[1])
        if expected_digest is not None and digest != expected_digest and not force:
            raise DigestMismatchError(
                f"checkpoint digest {digest} != expected {expected_digest}"
            )
        manifest = []
        for _ in range(n_params):
            parts = fh.readline().decode().split()
            if len(parts) != 4:
                raise ParseError("malformed manifest line")
            name = parts[0]
            shape_text = parts[1].split("=", 1)[1]
            shape = () if shape_text == "scalar" else tuple(int(s) for s in shape_text.split(","))
            manifest.append((name, shape))
        if fh.readline() != b"payload\n":
            raise ParseError("missing payload marker")
        payload = fh.read()

    names = set(store.names())
    seen = set()
    offset = 0
    for name, shape in manifest:
        if name not in names:
            raise InvalidArgumentError(f"checkpoint parameter {name!r} unknown to this config")
        t = store[name]
        if t.data.shape != shape:
            raise InvalidArgumentError(
                f"checkpoint shape {shape} for {name!r} != model shape {t.data.shape}"
            )
        count = int(np.prod(shape)) if shape else 1
        block = payload[offset : offset + 8 * count]
        if len(block) != 8 * count:
            raise ParseError(f"payload truncated at parameter {name!r}", offset=offset)
        t.data = np.frombuffer(block, dtype="<f8").reshape(shape).copy()
        offset += 8 * count
        seen.add(name)
    missing = names - seen
    if missing:
        raise InvalidArgumentError(f"checkpoint lacks parameters: {sorted(missing)[:3]}")
    return digest
