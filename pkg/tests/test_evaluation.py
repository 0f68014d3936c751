"""Score fusion, matching/AP against the brute-force evaluator, reports."""

import math

import numpy as np
import pytest

from conftest import small_config, small_scene_spec, small_space
from hoilab.categories import build_split
from hoilab.errors import InvalidArgumentError
from hoilab.evaluation import (
    GroundTruth,
    Prediction,
    average_precision,
    compute_report,
    evaluate,
    fuse_scores,
    match_and_ap,
    write_report_csv,
    write_report_json,
)
from hoilab.model import init_params
from hoilab.oracles import evaluate_category_loop
from hoilab.scenes import DetectorNoise, generate_scene, simulate_detections


class TestFuseScores:
    def test_lambda_zero_is_identity(self):
        rng = np.random.default_rng(0)
        s = rng.uniform(size=(4, 9))
        fused = fuse_scores(s, rng.uniform(size=4), rng.uniform(size=4), 0.0)
        np.testing.assert_array_equal(fused, s)

    def test_scalar_cases(self):
        fused = fuse_scores(np.array([[1.0]]), np.array([0.5]), np.array([0.5]), 1.0)
        assert fused[0, 0] == pytest.approx(0.25, abs=1e-15)
        # value from the fusion formula itself: 0.8 · 0.9^2.8 · 0.7^2.8
        fused = fuse_scores(np.array([[0.8]]), np.array([0.9]), np.array([0.7]), 2.8)
        want = 0.8 * 0.9**2.8 * 0.7**2.8
        assert fused[0, 0] == pytest.approx(want, abs=1e-15)
        assert want == pytest.approx(0.2194, abs=5e-5)

    def test_never_increases_scores(self):
        rng = np.random.default_rng(1)
        s = rng.uniform(size=(6, 5))
        h = rng.uniform(size=6)
        o = rng.uniform(size=6)
        for lam in (0.0, 0.5, 1.0, 2.8):
            assert np.all(fuse_scores(s, h, o, lam) <= s + 1e-15)

    def test_per_pair_ranking_invariant_under_lambda(self):
        rng = np.random.default_rng(2)
        s = rng.uniform(size=(5, 8))
        h = rng.uniform(0.2, 1.0, size=5)
        o = rng.uniform(0.2, 1.0, size=5)
        base_order = np.argsort(s, axis=1)
        for lam in (0.0, 1.0, 2.0):
            fused_order = np.argsort(fuse_scores(s, h, o, lam), axis=1)
            np.testing.assert_array_equal(fused_order, base_order)

    def test_negative_lambda_rejected(self):
        with pytest.raises(InvalidArgumentError):
            fuse_scores(np.ones((1, 1)), np.ones(1), np.ones(1), -0.5)


def pred(score, scene=0, pair=0, cat=0, hbox=(0.1, 0.1, 0.4, 0.4), obox=(0.5, 0.5, 0.8, 0.8)):
    return Prediction(score, scene, pair, cat, hbox, obox)


def gt(scene=0, cat=0, hbox=(0.1, 0.1, 0.4, 0.4), obox=(0.5, 0.5, 0.8, 0.8)):
    return GroundTruth(scene, cat, hbox, obox)


class TestMatchAndAP:
    def test_single_exact_prediction(self):
        assert match_and_ap([pred(0.9)], [gt()]) == 1.0

    def test_high_fp_then_tp_halves_ap(self):
        predictions = [
            pred(0.9, pair=0, hbox=(0.6, 0.6, 0.9, 0.9), obox=(0.0, 0.0, 0.2, 0.2)),
            pred(0.5, pair=1),
        ]
        assert match_and_ap(predictions, [gt()]) == pytest.approx(0.5, abs=1e-12)

    def test_no_predictions_zero_ap(self):
        assert match_and_ap([], [gt()]) == 0.0

    def test_no_gt_is_nan(self):
        assert math.isnan(match_and_ap([pred(0.9)], []))

    def test_each_gt_matched_once(self):
        # two identical predictions, one gt: second must be a false positive
        predictions = [pred(0.9, pair=0), pred(0.8, pair=1)]
        ap = match_and_ap(predictions, [gt()])
        assert ap == 1.0  # tp first ⇒ precision at recall 1 is 1

    def test_strictly_above_threshold_required(self):
        # IoU exactly 0.5 must not match
        predictions = [pred(0.9, hbox=(0.0, 0.0, 0.5, 1.0), obox=(0.5, 0.5, 0.8, 0.8))]
        gts = [gt(hbox=(0.0, 0.0, 1.0, 1.0))]
        from hoilab.evaluation import iou

        assert iou(predictions[0].human_box, gts[0].human_box) == 0.5
        assert match_and_ap(predictions, gts, iou_threshold=0.5) == 0.0

    def test_input_order_invariance(self):
        rng = np.random.default_rng(3)
        predictions = [
            pred(float(rng.uniform()), pair=i, hbox=tuple(np.sort(rng.uniform(0, 1, 4))[[0, 2, 1, 3]][[0, 1, 2, 3]]))
            for i in range(8)
        ]
        gts = [gt(), gt(hbox=(0.15, 0.1, 0.42, 0.4))]
        forward = match_and_ap(predictions, gts)
        backward = match_and_ap(list(reversed(predictions)), gts)
        assert forward == backward


def random_instance_set(rng):
    """Small random prediction/gt sets for oracle cross-checks."""

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
            # around a gt so matches actually occur
            base = gts[rng.integers(0, len(gts))]
            jitter = lambda b: tuple(
                float(np.clip(v + rng.normal(0, 0.03), 0, 1)) for v in b
            )
            hbox, obox = jitter(base.human_box), jitter(base.object_box)
            scene = base.scene
        else:
            hbox, obox = rand_box(), rand_box()
            scene = int(rng.integers(0, 2))
        predictions.append(
            Prediction(float(rng.uniform()), scene, i, 0, hbox, obox)
        )
    return predictions, gts


class TestOracleEquivalence:
    def test_fifty_random_instance_sets(self):
        rng = np.random.default_rng(12345)
        for _ in range(50):
            predictions, gts = random_instance_set(rng)
            fast = match_and_ap(predictions, gts, 0.5)
            slow = evaluate_category_loop(
                [(p.score, p.scene, p.pair, p.human_box, p.object_box) for p in predictions],
                [(g.scene, g.human_box, g.object_box) for g in gts],
                0.5,
            )
            assert fast == pytest.approx(slow, abs=1e-9)


class TestAveragePrecision:
    def test_perfect_ranking(self):
        assert average_precision([1, 1, 0, 0], 2) == 1.0

    def test_interleaved(self):
        # ranks: tp, fp, tp ⇒ precision envelope (1, 2/3, 2/3)
        ap = average_precision([1, 0, 1], 2)
        assert ap == pytest.approx(0.5 * 1.0 + 0.5 * (2 / 3), abs=1e-12)

    def test_in_unit_interval(self):
        rng = np.random.default_rng(0)
        for _ in range(30):
            flags = (rng.uniform(size=rng.integers(1, 12)) > 0.5).astype(int)
            n_gt = int(flags.sum() + rng.integers(0, 4))
            if n_gt == 0:
                continue
            ap = average_precision(flags, n_gt)
            assert 0.0 <= ap <= 1.0


class TestComputeReport:
    def _simple(self):
        space = small_space()
        split = build_split(space, "UV", k=1, seed=0)
        unseen_cat = split.unseen_sorted()[0]
        seen_cat = split.seen_sorted()[0]
        predictions = [pred(0.9, cat=seen_cat), pred(0.8, cat=unseen_cat, pair=1)]
        gts = [gt(cat=seen_cat), gt(cat=unseen_cat)]
        return space, split, predictions, gts, seen_cat, unseen_cat

    def test_aggregates_by_membership(self):
        space, split, predictions, gts, seen_cat, unseen_cat = self._simple()
        report = compute_report(predictions, gts, space, split)
        assert report.per_category[seen_cat] == 1.0
        assert report.per_category[unseen_cat] == 1.0
        assert report.map_seen == 1.0
        assert report.map_unseen == 1.0
        assert report.map_full == 1.0
        assert report.n_gt == {seen_cat: 1, unseen_cat: 1}

    def test_full_is_mean_over_categories_with_gt(self):
        space, split, predictions, gts, seen_cat, unseen_cat = self._simple()
        predictions = [p for p in predictions if p.category != unseen_cat]
        report = compute_report(predictions, gts, space, split)
        assert report.per_category[unseen_cat] == 0.0
        assert report.map_full == pytest.approx(0.5)

    def test_single_band_equals_overall(self):
        space, split, predictions, gts, *_ = self._simple()
        report = compute_report(
            predictions, gts, space, split, size_bands=(("all", 0.0, 1.01),)
        )
        assert report.size_ap[("all", "human")] == pytest.approx(report.map_full)
        assert report.size_ap[("all", "object")] == pytest.approx(report.map_full)

    def test_empty_band_absent(self):
        space, split, predictions, gts, *_ = self._simple()
        report = compute_report(predictions, gts, space, split)
        # every box here has area exactly 0.09, the lower edge of "large"
        assert report.size_ap[("small", "human")] is None
        assert report.size_ap[("medium", "human")] is None
        assert report.size_ap[("large", "human")] is not None

    def test_band_ap_matches_bruteforce(self):
        rng = np.random.default_rng(7)
        predictions, gts = random_instance_set(rng)
        space = small_space()
        split = build_split(space, "FULL")
        lo, hi = 0.0, 0.04
        report = compute_report(
            predictions, gts, space, split, size_bands=(("tiny", lo, hi),)
        )
        banded = [
            g
            for g in gts
            if lo <= (g.human_box[2] - g.human_box[0]) * (g.human_box[3] - g.human_box[1]) < hi
        ]
        if banded:
            slow = evaluate_category_loop(
                [(p.score, p.scene, p.pair, p.human_box, p.object_box) for p in predictions],
                [(g.scene, g.human_box, g.object_box) for g in banded],
                0.5,
            )
            assert report.size_ap[("tiny", "human")] == pytest.approx(slow, abs=1e-9)
        else:
            assert report.size_ap[("tiny", "human")] is None


class TestEvaluateEndToEnd:
    def test_deterministic_and_writes_stable_reports(self, tmp_path):
        space = small_space()
        spec = small_scene_spec(space)
        scenes = [generate_scene(spec, s) for s in range(6)]
        noise = DetectorNoise(feature_dim=8)
        dets = [simulate_detections(s, noise, i, 3) for i, s in enumerate(scenes)]
        cfg = small_config()
        params = init_params(cfg, space, seed=0)
        split = build_split(space, "UC", k=2, seed=0)

        a = evaluate(params, cfg, space, scenes, dets, split, lam=1.0)
        b = evaluate(params, cfg, space, scenes, dets, split, lam=1.0)
        assert a.per_category == b.per_category
        assert a.map_full == b.map_full

        csv_a, csv_b = tmp_path / "a.csv", tmp_path / "b.csv"
        write_report_csv(csv_a, a, space, split, "deadbeef")
        write_report_csv(csv_b, b, space, split, "deadbeef")
        assert csv_a.read_bytes() == csv_b.read_bytes()
        assert "digest=deadbeef" in csv_a.read_text()

        json_path = tmp_path / "a.json"
        write_report_json(json_path, a, space, split, "deadbeef")
        import json

        payload = json.loads(json_path.read_text())
        assert payload["digest"] == "deadbeef"
        assert set(payload["summary"]) >= {"map_unseen", "map_seen", "map_full"}
