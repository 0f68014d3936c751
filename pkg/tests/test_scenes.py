"""Scene synthesis, the detector oracle, and dataset round-trips."""

import numpy as np
import pytest

from hoilab.categories import CategorySpace
from hoilab.errors import ParseError
from hoilab.scenes import (
    Detection,
    DetectorNoise,
    Entity,
    Scene,
    SceneSpec,
    decode_verb,
    generate_scene,
    mask_cue,
    read_dataset,
    simulate_detections,
    write_dataset,
)


def toy_space():
    return CategorySpace.full(("person", "cup", "ball"), ("hold", "push", "wash"))


def toy_spec(**kwargs):
    defaults = dict(space=toy_space(), max_humans=1, max_objects=3)
    defaults.update(kwargs)
    return SceneSpec(**defaults)


class TestGenerateScene:
    def test_deterministic_bitwise(self):
        spec = toy_spec()
        a = generate_scene(spec, 5)
        b = generate_scene(spec, 5)
        assert a.pixels.tobytes() == b.pixels.tobytes()
        assert a.instances == b.instances
        assert a.entities == b.entities

    def test_no_humans_no_instances(self):
        scene = generate_scene(toy_spec(max_humans=0), 1)
        assert scene.instances == ()

    def test_instances_reference_entities(self):
        for seed in range(20):
            scene = generate_scene(toy_spec(max_humans=2), seed)
            for inst in scene.instances:
                assert scene.entities[inst.human_entity].box == inst.human_box
                assert scene.entities[inst.object_entity].box == inst.object_box
                assert scene.entities[inst.object_entity].class_index == inst.object_class

    def test_category_frequencies_near_uniform(self):
        spec = toy_spec(max_humans=1, max_objects=2)
        counts = np.zeros(9)
        for seed in range(1000):
            for inst in generate_scene(spec, seed).instances:
                counts[inst.category_index] += 1
        freq = counts / counts.sum()
        assert np.all(freq > (1 / 9) * 0.7)
        assert np.all(freq < (1 / 9) * 1.3)

    def test_all_categories_reachable(self):
        spec = toy_spec()
        seen = set()
        for seed in range(400):
            seen.update(i.category_index for i in generate_scene(spec, seed).instances)
            if len(seen) == 9:
                break
        assert seen == set(range(9))

    def test_cue_decodes_verb(self):
        spec = toy_spec()
        checked = 0
        for seed in range(30):
            scene = generate_scene(spec, seed)
            for inst in scene.instances:
                assert decode_verb(scene.pixels, inst.object_box, spec) == inst.verb
                checked += 1
        assert checked > 10

    def test_masking_cue_makes_verb_undecidable(self):
        spec = toy_spec()
        checked = 0
        for seed in range(30):
            scene = generate_scene(spec, seed)
            for inst in scene.instances:
                masked = mask_cue(scene.pixels, inst.object_box, inst.verb, spec)
                assert decode_verb(masked, inst.object_box, spec) is None
                checked += 1
        assert checked > 10

    def test_distractors_decode_to_none(self):
        spec = toy_spec()
        for seed in range(30):
            scene = generate_scene(spec, seed)
            interacting = {i.object_entity for i in scene.instances}
            for idx, entity in enumerate(scene.entities):
                if idx not in interacting and entity.class_index != 0:
                    assert decode_verb(scene.pixels, entity.box, spec) is None

    def test_verb_changes_only_cue_pixels(self):
        # same layout, forced different verb: pixels must differ at the cue
        spec = toy_spec()
        scene = next(
            generate_scene(spec, s)
            for s in range(50)
            if generate_scene(spec, s).instances
        )
        inst = scene.instances[0]
        other_verb = (inst.verb + 1) % 3
        masked_a = mask_cue(scene.pixels, inst.object_box, inst.verb, spec)
        masked_b = mask_cue(scene.pixels, inst.object_box, other_verb, spec)
        assert not np.array_equal(masked_a, scene.pixels)
        assert decode_verb(masked_a, inst.object_box, spec) is None
        # masking a verb that is not rendered leaves the real cue intact
        assert decode_verb(masked_b, inst.object_box, spec) == inst.verb


class TestSimulateDetections:
    def test_noiseless_is_exact(self):
        spec = toy_spec()
        scene = generate_scene(spec, 3)
        dets = simulate_detections(scene, DetectorNoise(), 0, n_classes=3)
        assert len(dets) == len(scene.entities)
        for det, entity in zip(dets, scene.entities):
            assert det.box == entity.box
            assert det.class_index == entity.class_index
            assert det.confidence == 1.0

    def test_full_miss_rate(self):
        scene = generate_scene(toy_spec(), 3)
        dets = simulate_detections(scene, DetectorNoise(miss=1.0), 0, n_classes=3)
        assert dets == []

    def test_miss_rate_binomial(self):
        entities = tuple(
            Entity((0.1, 0.1, 0.3, 0.3), 1) for _ in range(10_000)
        )
        scene = Scene(
            pixels=np.zeros((8, 8, 3), dtype=np.float32),
            entities=entities,
            instances=(),
            image_size=8,
        )
        dets = simulate_detections(scene, DetectorNoise(miss=0.3), 1, n_classes=3)
        retained = len(dets) / 10_000
        assert abs(retained - 0.7) < 0.02

    def test_feature_properties(self):
        scene = generate_scene(toy_spec(), 4)
        noise = DetectorNoise(feature_dim=16, feature_noise=0.0)
        dets = simulate_detections(scene, noise, 0, n_classes=3)
        for det in dets:
            assert det.feature.shape == (16,)
        # same class + same geometry ⇒ same feature when noise-free
        a = simulate_detections(scene, noise, 0, n_classes=3)
        for x, y in zip(dets, a):
            np.testing.assert_array_equal(x.feature, y.feature)

    def test_jitter_reduces_confidence(self):
        scene = generate_scene(toy_spec(), 5)
        noise = DetectorNoise(box_jitter=0.05)
        dets = simulate_detections(scene, noise, 2, n_classes=3)
        assert all(d.confidence < 1.0 for d in dets)
        assert all(0.0 <= d.confidence <= 1.0 for d in dets)


class TestDatasetIO:
    def _dataset(self, n=10):
        spec = toy_spec()
        scenes = [generate_scene(spec, s) for s in range(n)]
        noise = DetectorNoise(box_jitter=0.01, feature_dim=8)
        dets = [
            simulate_detections(s, noise, i, n_classes=3)
            for i, s in enumerate(scenes)
        ]
        return scenes, dets

    @pytest.mark.parametrize("pixfmt", ["raw32", "hex16"])
    def test_round_trip(self, tmp_path, pixfmt):
        scenes, dets = self._dataset()
        path = tmp_path / "data.scenes"
        write_dataset(path, scenes, dets, "cafe01", pixel_format=pixfmt)
        loaded_scenes, loaded_dets, digest = read_dataset(path)
        assert digest == "cafe01"
        assert len(loaded_scenes) == len(scenes)
        for a, b in zip(scenes, loaded_scenes):
            assert a.pixels.tobytes() == b.pixels.tobytes()
            assert a.entities == b.entities
            assert a.instances == b.instances
        for da, db in zip(dets, loaded_dets):
            assert len(da) == len(db)
            for x, y in zip(da, db):
                assert x.box == y.box
                assert x.class_index == y.class_index
                assert x.confidence == y.confidence
                np.testing.assert_array_equal(x.feature, y.feature)

    def test_empty_dataset(self, tmp_path):
        path = tmp_path / "empty.scenes"
        write_dataset(path, [], [], "00")
        scenes, dets, _ = read_dataset(path)
        assert scenes == [] and dets == []

    def test_truncation_raises_parse_error(self, tmp_path):
        scenes, dets = self._dataset(3)
        path = tmp_path / "data.scenes"
        write_dataset(path, scenes, dets, "00")
        blob = path.read_bytes()
        rng = np.random.default_rng(0)
        for cut in sorted(rng.integers(1, len(blob) - 1, size=12).tolist()):
            broken = tmp_path / "broken.scenes"
            broken.write_bytes(blob[:cut])
            with pytest.raises(ParseError):
                read_dataset(broken)

    def test_corrupt_header(self, tmp_path):
        path = tmp_path / "bad.scenes"
        path.write_bytes(b"not a dataset\n")
        with pytest.raises(ParseError, match="offset 0"):
            read_dataset(path)
