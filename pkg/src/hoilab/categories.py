"""Object/verb/interaction label universes and zero-shot train/test splits."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidArgumentError, ParseError

SETTINGS = ("UC", "RF-UC", "NF-UC", "UO", "UV", "FULL")

UC_RETRY_CAP = 1000


@dataclass(frozen=True)
class CategorySpace:
    """The label universe: object classes, verb classes, and their pairs.

    ``categories`` lists (object_index, verb_index) pairs; an interaction
    category is one such pair. ``human_index`` designates which object
    class plays the human role in pairing.
    """

    objects: tuple[str, ...]
    verbs: tuple[str, ...]
    categories: tuple[tuple[int, int], ...]
    human_index: int = 0

    def __post_init__(self):
        if len(set(self.objects)) != len(self.objects):
            raise InvalidArgumentError("object names must be unique")
        if len(set(self.verbs)) != len(self.verbs):
            raise InvalidArgumentError("verb names must be unique")
        if not 0 <= self.human_index < len(self.objects):
            raise InvalidArgumentError(f"human_index {self.human_index} out of range")
        for o, v in self.categories:
            if not (0 <= o < len(self.objects) and 0 <= v < len(self.verbs)):
                raise InvalidArgumentError(f"category ({o}, {v}) out of range")
        if len(set(self.categories)) != len(self.categories):
            raise InvalidArgumentError("categories must be unique")

    @classmethod
    def full(cls, objects, verbs, human_index=0) -> "CategorySpace":
        """The cartesian-product universe over the given names."""
        cats = tuple(
            (o, v) for o in range(len(objects)) for v in range(len(verbs))
        )
        return cls(tuple(objects), tuple(verbs), cats, human_index)

    @property
    def n_objects(self) -> int:
        return len(self.objects)

    @property
    def n_verbs(self) -> int:
        return len(self.verbs)

    @property
    def n_categories(self) -> int:
        return len(self.categories)

    def category_index(self, obj: int, verb: int) -> int:
        return self.categories.index((obj, verb))

    def category_name(self, index: int) -> str:
        o, v = self.categories[index]
        return f"{self.objects[o]}:{self.verbs[v]}"


@dataclass(frozen=True)
class FrequencyTable:
    """Per-category nonnegative training occurrence counts."""

    counts: tuple[float, ...]

    def __post_init__(self):
        if any(c < 0 for c in self.counts):
            raise InvalidArgumentError("counts must be nonnegative")


@dataclass(frozen=True)
class ZeroShotSplit:
    """A partition of the category set into seen and unseen."""

    setting: str
    unseen: frozenset[int]
    seen: frozenset[int]
    seed: int = 0
    k: int = 0

    def __post_init__(self):
        if self.unseen & self.seen:
            raise InvalidArgumentError("seen and unseen overlap")

    def is_seen(self, category: int) -> bool:
        return category in self.seen

    def seen_sorted(self) -> list[int]:
        return sorted(self.seen)

    def unseen_sorted(self) -> list[int]:
        return sorted(self.unseen)


def _split_from_unseen(space, setting, unseen, seed=0, k=0) -> ZeroShotSplit:
    unseen = frozenset(unseen)
    seen = frozenset(range(space.n_categories)) - unseen
    return ZeroShotSplit(setting, unseen, seen, seed=seed, k=k)


def split_from_unseen_objects(space: CategorySpace, objects, seed=0) -> ZeroShotSplit:
    """Unseen set = every category whose object class is in ``objects``."""
    objects = set(objects)
    if space.human_index in objects:
        raise InvalidArgumentError(
            "the human class cannot be an unseen object; pairing would be impossible"
        )
    for o in objects:
        if not 0 <= o < space.n_objects:
            raise InvalidArgumentError(f"object index {o} out of range")
    unseen = {i for i, (o, _) in enumerate(space.categories) if o in objects}
    return _split_from_unseen(space, "UO", unseen, seed=seed, k=len(objects))


def split_from_unseen_verbs(space: CategorySpace, verbs, seed=0) -> ZeroShotSplit:
    """Unseen set = every category whose verb class is in ``verbs``."""
    verbs = set(verbs)
    for v in verbs:
        if not 0 <= v < space.n_verbs:
            raise InvalidArgumentError(f"verb index {v} out of range")
    unseen = {i for i, (_, v) in enumerate(space.categories) if v in verbs}
    return _split_from_unseen(space, "UV", unseen, seed=seed, k=len(verbs))


def build_split(
    space: CategorySpace,
    setting: str,
    freq: FrequencyTable | None = None,
    k: int = 0,
    seed: int = 0,
) -> ZeroShotSplit:
    """Construct the unseen/seen partition for one zero-shot regime.

    RF-UC takes the k least frequent categories as unseen, NF-UC the k
    most frequent (frequency ties break toward the lower category index).
    UC samples k categories by seed subject to every object and verb still
    appearing in some seen category. UO/UV sample k object/verb classes by
    seed and close over their categories. FULL (or k = 0) leaves nothing
    unseen.
    """
    if setting not in SETTINGS:
        raise InvalidArgumentError(f"unknown split setting {setting!r}")
    if setting == "FULL" or k == 0:
        return _split_from_unseen(space, "FULL" if setting == "FULL" else setting, (), seed, 0)

    n = space.n_categories
    rng = np.random.default_rng(np.random.SeedSequence([seed, _setting_tag(setting)]))

    if setting in ("RF-UC", "NF-UC"):
        if freq is None:
            raise InvalidArgumentError(f"{setting} requires a frequency table")
        if len(freq.counts) != n:
            raise InvalidArgumentError(
                f"frequency table has {len(freq.counts)} entries for {n} categories"
            )
        if k > n:
            raise InvalidArgumentError(f"k={k} exceeds {n} categories")
        if setting == "RF-UC":
            order = sorted(range(n), key=lambda i: (freq.counts[i], i))
        else:
            order = sorted(range(n), key=lambda i: (-freq.counts[i], i))
        return _split_from_unseen(space, setting, order[:k], seed, k)

    if setting == "UC":
        if k >= n:
            raise InvalidArgumentError(f"k={k} must leave at least one seen category")
        used_objects = {o for o, _ in space.categories}
        used_verbs = {v for _, v in space.categories}
        for _ in range(UC_RETRY_CAP):
            unseen = set(rng.choice(n, size=k, replace=False).tolist())
            seen_cats = [space.categories[i] for i in range(n) if i not in unseen]
            if {o for o, _ in seen_cats} == used_objects and {
                v for _, v in seen_cats
            } == used_verbs:
                return _split_from_unseen(space, setting, unseen, seed, k)
        raise InvalidArgumentError(
            f"UC sampling could not cover every object and verb in {UC_RETRY_CAP} tries"
        )

    if setting == "UO":
        candidates = [o for o in range(space.n_objects) if o != space.human_index]
        if k > len(candidates):
            raise InvalidArgumentError(
                f"k={k} exceeds the {len(candidates)} non-human object classes"
            )
        chosen = rng.choice(len(candidates), size=k, replace=False)
        picked = {candidates[int(i)] for i in chosen}
        return split_from_unseen_objects(space, picked, seed=seed)

    # UV
    if k > space.n_verbs:
        raise InvalidArgumentError(f"k={k} exceeds {space.n_verbs} verb classes")
    chosen = rng.choice(space.n_verbs, size=k, replace=False)
    return split_from_unseen_verbs(space, {int(v) for v in chosen}, seed=seed)


def _setting_tag(setting: str) -> int:
    return SETTINGS.index(setting) + 1


def filter_annotations(scenes, split: ZeroShotSplit):
    """Drop unseen-category ground truth from training labels.

    Rendered entities survive untouched (the detector still sees every
    object); only the interaction labels of unseen categories disappear.
    Returns new scene objects, sharing pixel buffers with the input.
    """
    out = []
    for scene in scenes:
        kept = tuple(
            inst for inst in scene.instances if inst.category_index in split.seen
        )
        out.append(scene.with_instances(kept))
    return out


# -- split serialization ------------------------------------------------------


def write_split(path, split: ZeroShotSplit, space: CategorySpace):
    """Stable text form: setting, seed, k, then one unseen category per line."""
    lines = [
        "hoilab-split v1",
        f"setting={split.setting}",
        f"seed={split.seed}",
        f"k={split.k}",
    ]
    for idx in split.unseen_sorted():
        lines.append(f"unseen {space.category_name(idx)}")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")


def read_split(path, space: CategorySpace) -> ZeroShotSplit:
    with open(path, encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    if not lines or lines[0] != "hoilab-split v1":
        raise ParseError("not a split file", line=1)
    meta = {}
    unseen = set()
    for ln, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        if line.startswith("unseen "):
            name = line[len("unseen ") :]
            try:
                obj_name, verb_name = name.split(":")
                cat = space.category_index(
                    space.objects.index(obj_name), space.verbs.index(verb_name)
                )
            except ValueError as exc:
                raise ParseError(f"unknown category {name!r}", line=ln) from exc
            unseen.add(cat)
        elif "=" in line:
            key, value = line.split("=", 1)
            meta[key] = value
        else:
            raise ParseError(f"unrecognized line {line!r}", line=ln)
    try:
        seed = int(meta["seed"])
        k = int(meta["k"])
        setting = meta["setting"]
    except (KeyError, ValueError) as exc:
        raise ParseError("missing or malformed split metadata") from exc
    if setting not in SETTINGS:
        raise ParseError(f"unknown setting {setting!r}")
    return _split_from_unseen(space, setting, unseen, seed=seed, k=k)
