"""
Unit Tests for pipeline.py
Tests rendering, map back, duplicate suppression, evaluation, baselines and the frame pipeline
"""

import sys
from pathlib import Path

# Add src to path
sys.path.append(str(Path(__file__).parent.parent / "src"))

import tempfile
import unittest

import numpy as np

from detectors import OracleDetector
from errors import DetectorProtocolError, InputError
from extraction import ExtractionConfig
from geometry import (
    CompositionPlan,
    DetectionBox,
    Patch,
    Placement,
    PlacementMode,
    Rect,
    SubFrame,
)
from objective import ObjectiveConfig
from optimizer import GaConfig, verify_and_relocate
from pipeline import (
    GRAY,
    STAGES,
    FramePipeline,
    PipelineConfig,
    evaluate,
    frame_inputs,
    map_back,
    process_frames,
    render_subframes,
    run_ds,
    run_div,
    suppress_duplicates,
    timing_table,
)
from scaling import default_profile
from utils import write_image


class FixedDetector:
    """Selalu mengembalikan box yang sama di koordinat detector"""

    def __init__(self, boxes):
        self.boxes = list(boxes)
        self.calls = 0

    def detect(self, image, request):
        self.calls += 1
        return [b.moved(b.rect, request.index) for b in self.boxes]


class BrokenDetector:
    def detect(self, image, request):
        raise DetectorProtocolError("child exited")


def box(x, y, w, h, label="person", score=1.0):
    return DetectionBox(label, score, Rect(x, y, w, h))


def assert_rect_close(test, a, b, tol=1.0):
    for u, v in zip(a.as_list(), b.as_list()):
        test.assertLessEqual(abs(u - v), tol)


class TestRender(unittest.TestCase):
    """Test sub-frame rendering"""

    def test_identity_crop(self):
        rng = np.random.default_rng(0)
        frame = rng.integers(0, 256, size=(300, 300), dtype=np.uint8)
        plan = verify_and_relocate([SubFrame(150, 150, 1.0)], [Patch(0, Rect(10, 10, 20, 20))], 10, (300, 300))
        images = render_subframes(frame, plan)
        self.assertEqual(len(images), 1)
        np.testing.assert_array_equal(images[0], frame)

    def test_relocated_patch_pixels(self):
        rng = np.random.default_rng(1)
        frame = rng.integers(0, 256, size=(300, 600), dtype=np.uint8)
        plan = verify_and_relocate([SubFrame(150, 150, 1.0)], [Patch(0, Rect(400, 100, 40, 40))], 10, (600, 300))
        p = plan.placement_of(0)
        self.assertEqual(p.mode, PlacementMode.RELOCATED)
        self.assertEqual(p.dst, Rect(0, 0, 40, 40))
        canvas = render_subframes(frame, plan)[0]
        np.testing.assert_array_equal(canvas[0:40, 0:40], frame[100:140, 400:440])
        np.testing.assert_array_equal(canvas[50:300, 50:300], frame[50:300, 50:300])

    def test_fractional_slot_keeps_neighbour_pixels(self):
        frame = np.full((720, 1280), 200, dtype=np.uint8)
        frame[600:620, 1000:1020] = 10
        relocated = Placement(0, PlacementMode.RELOCATED, Rect(1000, 600, 20, 20), Rect(12.5, 40.5, 10, 10), 0, 0.5)
        plan = CompositionPlan((SubFrame(300, 300, 0.5),), (relocated,), (1280, 720))
        canvas = render_subframes(frame, plan)[0]
        self.assertTrue((canvas[41:50, 13:22] == 10).all())
        # kolom/baris yang hanya sebagian tertutup slot tetap isi crop host
        self.assertTrue((canvas[41:50, 12] == 200).all())
        self.assertTrue((canvas[41:50, 22] == 200).all())
        self.assertTrue((canvas[40, 13:22] == 200).all())
        self.assertTrue((canvas[50, 13:22] == 200).all())

    def test_half_beta_downscales(self):
        frame = np.full((720, 1280), 200, dtype=np.uint8)
        plan = CompositionPlan((SubFrame(640, 360, 0.5),), (), (1280, 720))
        canvas = render_subframes(frame, plan)[0]
        self.assertEqual(canvas.shape, (300, 300))
        self.assertTrue((canvas == 200).all())

    def test_small_frame_padded_gray(self):
        frame = np.full((100, 200, 3), 10, dtype=np.uint8)
        plan = CompositionPlan((SubFrame(50, 50, 1.0),), (), (200, 100))
        canvas = render_subframes(frame, plan)[0]
        self.assertEqual(canvas.shape, (300, 300, 3))
        self.assertTrue((canvas[:100, :200] == 10).all())
        self.assertTrue((canvas[150:, :] == GRAY).all())

    def test_output_size(self):
        frame = np.zeros((720, 1280), dtype=np.uint8)
        plan = CompositionPlan((SubFrame(640, 360, 1.0, detector_size=600),), (), (1280, 720), detector_size=600)
        self.assertEqual(render_subframes(frame, plan, output_size=300)[0].shape, (300, 300))

    def test_frame_size_mismatch(self):
        plan = CompositionPlan((SubFrame(150, 150, 1.0),), (), (1280, 720))
        with self.assertRaises(InputError):
            render_subframes(np.zeros((100, 100), dtype=np.uint8), plan)


class TestMapBack(unittest.TestCase):
    """Test detection map back and duplicate suppression"""

    def setUp(self):
        placement = Placement(0, PlacementMode.RELOCATED, Rect(500, 500, 50, 50), Rect(0, 0, 100, 100), 0, 2.0)
        self.plan = CompositionPlan((SubFrame(150, 150, 1.0),), (placement,), (1280, 720))

    def test_relocated_box(self):
        result = map_back(self.plan, [[box(20, 20, 20, 20)]])
        self.assertEqual([b.rect for b in result.boxes], [Rect(510, 510, 10, 10)])
        self.assertEqual(result.dropped, 0)

    def test_in_situ_area_box(self):
        result = map_back(self.plan, [[box(200, 200, 10, 10)]])
        self.assertEqual([b.rect for b in result.boxes], [Rect(200, 200, 10, 10)])

    def test_dead_space_box_dropped(self):
        plan = CompositionPlan((SubFrame(50, 50, 1.0),), (), (200, 100))
        result = map_back(plan, [[box(250, 250, 10, 10)]])
        self.assertEqual(result.boxes, [])
        self.assertEqual(result.dropped, 1)

    def test_boxes_are_in_original_coordinates(self):
        result = map_back(self.plan, [[box(20, 20, 20, 20)]])
        self.assertIsNone(result.boxes[0].sub_frame)

    def test_suppress_duplicates(self):
        boxes = [
            box(0, 0, 10, 10, score=0.9),
            box(1, 0, 10, 10, score=0.8),
            box(1, 0, 10, 10, label="car", score=0.7),
            box(50, 50, 10, 10, score=0.6),
        ]
        kept = suppress_duplicates(boxes, 0.5)
        self.assertEqual([(b.label, b.score) for b in kept], [("person", 0.9), ("car", 0.7), ("person", 0.6)])
        self.assertEqual(suppress_duplicates(kept, 0.5), kept)


class TestEvaluate(unittest.TestCase):
    """Test matching and accuracy figures"""

    def test_half_precision_half_recall(self):
        gt = {"f0": [box(0, 0, 10, 10), box(100, 100, 10, 10)]}
        pred = {"f0": [box(0, 0, 10, 10, score=0.9), box(300, 300, 10, 10, score=0.8)]}
        report = evaluate(pred, gt, 0.5)
        self.assertAlmostEqual(report.precision, 0.5)
        self.assertAlmostEqual(report.one_minus_precision, 0.5)
        self.assertAlmostEqual(report.recall, 0.5)
        self.assertAlmostEqual(report.f1, 0.5)
        self.assertEqual((report.true_positives, report.false_positives, report.false_negatives), (1, 1, 1))

    def test_no_predictions(self):
        report = evaluate({}, {"f0": [box(0, 0, 10, 10)]}, 0.5)
        self.assertEqual(report.one_minus_precision, 1.0)
        self.assertEqual(report.recall, 0.0)
        self.assertEqual(report.f1, 0.0)

    def test_perfect(self):
        gt = {"f0": [box(0, 0, 10, 10)], "f1": [box(5, 5, 20, 20, label="car")]}
        report = evaluate(gt, gt, 0.5, elapsed_seconds=0.5)
        self.assertEqual(report.f1, 1.0)
        self.assertEqual(report.frames_per_second, 4.0)
        self.assertEqual(len(report.pr_curve), 20)

    def test_label_must_match(self):
        report = evaluate({"f0": [box(0, 0, 10, 10, label="car")]}, {"f0": [box(0, 0, 10, 10)]}, 0.5)
        self.assertEqual(report.true_positives, 0)

    def test_score_threshold_curve(self):
        gt = {"f0": [box(0, 0, 10, 10)]}
        pred = {"f0": [box(0, 0, 10, 10, score=0.3)]}
        curve = evaluate(pred, gt, 0.5).pr_curve
        self.assertEqual(curve[0], (0.0, 1.0))
        self.assertEqual(curve[-1], (1.0, 0.0))


class TestBaselines(unittest.TestCase):
    """Test the DS and DIV baselines"""

    def test_ds_scales_back(self):
        frame = np.zeros((600, 600), dtype=np.uint8)
        boxes, calls = run_ds(frame, FixedDetector([box(10, 10, 20, 20)]), "f0", 300)
        self.assertEqual(calls, 1)
        self.assertEqual([b.rect for b in boxes], [Rect(20, 20, 40, 40)])

    def test_div_invocations_and_translation(self):
        frame = np.zeros((720, 1280), dtype=np.uint8)
        detector = OracleDetector({"f0": [box(990, 430, 10, 10)]})
        boxes, calls = run_div(frame, detector, "f0", 300)
        self.assertEqual(calls, 15)
        self.assertEqual(detector.calls, 15)
        self.assertEqual([b.rect for b in boxes], [Rect(990, 430, 10, 10)])


class TestFramePipeline(unittest.TestCase):
    """Test the whole per-frame flow with the oracle detector"""

    def setUp(self):
        rng = np.random.default_rng(9)
        self.frame = rng.integers(0, 256, size=(360, 640), dtype=np.uint8)
        self.mask = np.zeros((360, 640), dtype=bool)
        self.gt = [Rect(40, 40, 20, 20), Rect(500, 300, 24, 16), Rect(600, 20, 16, 30)]
        for r in self.gt:
            self.mask[r.y:r.y2, r.x:r.x2] = True
        self.annotations = {"f0": [DetectionBox("person", 1.0, r) for r in self.gt]}

    def make_pipeline(self, detector, pipeline_cfg=None):
        return FramePipeline(
            default_profile(360),
            ObjectiveConfig(),
            GaConfig(rng_seed=1),
            ExtractionConfig(),
            pipeline_cfg or PipelineConfig(),
            detector,
        )

    def assert_recovers_ground_truth(self, boxes):
        self.assertEqual(len(boxes), len(self.gt))
        for r in self.gt:
            best = max(boxes, key=lambda b: b.rect.iou(r))
            assert_rect_close(self, best.rect, r)

    def test_oracle_detector_recovers_objects(self):
        result = self.make_pipeline(OracleDetector(self.annotations)).process_frame("f0", self.frame, self.mask)
        self.assertFalse(result.skipped)
        self.assertEqual(result.n_patches, 3)
        self.assertEqual(result.invocations, result.plan.n_sub_frames)
        self.assert_recovers_ground_truth(result.boxes)
        self.assertEqual(set(result.timings), set(STAGES))

    def test_large_window_mode(self):
        cfg = PipelineConfig(window_size=600)
        result = self.make_pipeline(OracleDetector(self.annotations), cfg).process_frame("f0", self.frame, self.mask)
        self.assertEqual(result.plan.detector_size, 600)
        self.assert_recovers_ground_truth(result.boxes)

    def test_empty_foreground(self):
        result = self.make_pipeline(OracleDetector(self.annotations)).process_frame("f0", self.frame)
        self.assertEqual(result.invocations, 0)
        self.assertEqual(result.boxes, [])

    def test_baseline_methods(self):
        pipeline = self.make_pipeline(OracleDetector(self.annotations))
        div = pipeline.process_frame("f0", self.frame, method="div")
        self.assertEqual(div.invocations, 6)
        self.assert_recovers_ground_truth(div.boxes)
        self.assertEqual(pipeline.process_frame("f0", self.frame, method="ds").invocations, 1)
        with self.assertRaises(InputError):
            pipeline.process_frame("f0", self.frame, method="tiles")

    def test_detector_failure_skips_frame(self):
        result = self.make_pipeline(BrokenDetector()).process_frame("f0", self.frame, self.mask)
        self.assertTrue(result.skipped)
        self.assertEqual(result.boxes, [])

    def test_mask_size_mismatch(self):
        with self.assertRaises(InputError):
            self.make_pipeline(OracleDetector({})).process_frame("f0", self.frame, np.zeros((10, 10), dtype=bool))

    def test_process_frames_keeps_order(self):
        with tempfile.TemporaryDirectory() as tmp:
            tmp = Path(tmp)
            (tmp / "masks").mkdir()
            for name in ("a", "b", "c"):
                write_image(tmp / f"{name}.pgm", self.frame)
                write_image(tmp / "masks" / f"{name}.pgm", self.mask.astype(np.uint8) * 255)
            paths = sorted(tmp.glob("*.pgm"))
            items = frame_inputs(paths, tmp / "masks")
            annotations = {name: self.annotations["f0"] for name in ("a", "b", "c")}
            results = process_frames(self.make_pipeline(OracleDetector(annotations)), items, jobs=3)
        self.assertEqual([r.frame_id for r in results], ["a", "b", "c"])
        for r in results:
            self.assert_recovers_ground_truth(r.boxes)
        table = timing_table(results)
        self.assertEqual(list(table.index), list(STAGES))
        self.assertEqual(list(table.columns), ["mean", "p95"])

    def test_frame_inputs_use_previous_frame(self):
        paths = [Path("x/f0.pgm"), Path("x/f1.pgm")]
        items = frame_inputs(paths)
        self.assertIsNone(items[0].prev_path)
        self.assertEqual(items[1].prev_path, paths[0])


def suite():
    """Create test suite"""
    loader = unittest.TestLoader()
    suite = unittest.TestSuite()
    for case in (TestRender, TestMapBack, TestEvaluate, TestBaselines, TestFramePipeline):
        suite.addTest(loader.loadTestsFromTestCase(case))
    return suite


if __name__ == '__main__':
    runner = unittest.TextTestRunner(verbosity=2)
    runner.run(suite())
