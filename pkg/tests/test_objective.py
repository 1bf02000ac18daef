"""
Unit Tests for objective.py
Tests the location, distribution, count and penalty terms and the combined score
"""

import sys
from pathlib import Path

# Add src to path
sys.path.append(str(Path(__file__).parent.parent / "src"))

import math
import unittest

import numpy as np

from geometry import Patch, Rect, SubFrame
from objective import (
    ObjectiveConfig,
    ObjectiveEvaluator,
    coverage,
    g_penalty,
    h_count,
    phi,
    psi,
    score,
)
from scaling import calibrated_profile, default_profile

FRAME = (1280, 720)
CFG = ObjectiveConfig()


class TestCoverage(unittest.TestCase):
    """Test the coverage matrix"""

    def test_no_sub_frames(self):
        cov = coverage([Patch(0, Rect(0, 0, 5, 5))], [], FRAME)
        self.assertEqual(cov.cover.shape, (1, 0))
        self.assertFalse(cov.covered_any.any())

    def test_one_sub_frame_covers_all(self):
        patches = [Patch(0, Rect(10, 10, 5, 5)), Patch(1, Rect(200, 200, 50, 50))]
        cov = coverage(patches, [SubFrame(150, 150, 1.0)], FRAME)
        self.assertTrue(cov.column(0).all())

    def test_straddling_patch(self):
        cov = coverage([Patch(0, Rect(290, 10, 20, 20))], [SubFrame(150, 150, 1.0)], FRAME)
        self.assertFalse(cov.cover[0, 0])


class TestTerms(unittest.TestCase):
    """Test psi, phi, h_count and g_penalty"""

    def setUp(self):
        self.patches = [Patch(0, Rect(10, 10, 10, 10)), Patch(1, Rect(600, 600, 10, 10))]

    def test_psi_all_covered(self):
        cov = coverage(self.patches, [SubFrame(150, 150, 1.0), SubFrame(600, 600, 1.0)], FRAME)
        self.assertAlmostEqual(psi(self.patches, cov), math.log(1e9 + math.e), places=9)

    def test_psi_none_covered(self):
        cov = coverage(self.patches, [], FRAME)
        self.assertEqual(psi(self.patches, cov), 1.0)

    def test_psi_half_covered(self):
        cov = coverage(self.patches, [SubFrame(150, 150, 1.0)], FRAME)
        self.assertAlmostEqual(psi(self.patches, cov), math.log(1 + math.e), places=12)
        self.assertAlmostEqual(psi(self.patches, cov), 1.3133, places=4)

    def test_psi_monotone_in_coverage(self):
        few = coverage(self.patches, [SubFrame(150, 150, 1.0)], FRAME)
        more = coverage(self.patches, [SubFrame(150, 150, 1.0), SubFrame(600, 600, 1.0)], FRAME)
        self.assertGreaterEqual(psi(self.patches, more), psi(self.patches, few))

    def test_phi_centered_patch(self):
        patch = [Patch(0, Rect(145, 145, 10, 10))]
        self.assertEqual(phi(patch, SubFrame(150, 150, 1.0), np.array([True]), FRAME), 0.0)

    def test_phi_no_covered(self):
        self.assertEqual(phi(self.patches, SubFrame(150, 150, 1.0), np.array([False, False]), FRAME), 0.0)

    def test_phi_hand_value(self):
        patch = [Patch(0, Rect(175, 175, 10, 10))]
        self.assertAlmostEqual(phi(patch, SubFrame(150, 150, 1.0), np.array([True]), FRAME), 300.0, places=9)

    def test_phi_translation_invariant(self):
        patch = [Patch(0, Rect(175, 195, 10, 10))]
        moved = [Patch(0, Rect(475, 295, 10, 10))]
        a = phi(patch, SubFrame(150, 150, 1.0), np.array([True]), FRAME)
        b = phi(moved, SubFrame(450, 250, 1.0), np.array([True]), FRAME)
        self.assertAlmostEqual(a, b, places=9)

    def test_h_count(self):
        self.assertEqual(h_count(3, ObjectiveConfig(k_count=1, b_count=0)), 3)
        self.assertEqual(h_count(1, ObjectiveConfig(k_count=1, b_count=0.5)), 1.5)
        self.assertLess(h_count(2, CFG), h_count(3, CFG))

    def test_g_penalty(self):
        patch = [Patch(0, Rect(0, 0, 10, 10))]
        self.assertEqual(g_penalty(patch, [SubFrame(150, 150, 1.0)], FRAME), 0)
        self.assertEqual(g_penalty(patch, [], FRAME), 1)
        # luas sama persis -> 0
        self.assertEqual(g_penalty(patch, [SubFrame(5, 5, 1.0, detector_size=10)], FRAME), 0)
        self.assertEqual(g_penalty([Patch(0, Rect(0, 0, 11, 10))], [SubFrame(5, 5, 1.0, detector_size=10)], FRAME), 1)

    def test_invalid_config(self):
        with self.assertRaises(ValueError):
            ObjectiveConfig(delta=0)


class TestScore(unittest.TestCase):
    """Test the combined score"""

    def test_no_sub_frames_is_penalized(self):
        self.assertEqual(score([Patch(0, Rect(0, 0, 5, 5))], [], CFG, FRAME), -CFG.delta)

    def test_single_centered_patch(self):
        value = score([Patch(0, Rect(145, 145, 10, 10))], [SubFrame(150, 150, 1.0)], CFG, FRAME)
        self.assertAlmostEqual(value, math.log(1e9 + math.e) / 1.5, places=9)
        self.assertAlmostEqual(value, 13.8155, places=3)

    def test_border_near_distribution_scores_higher(self):
        patch = [Patch(0, Rect(140, 140, 20, 20))]
        centered = score(patch, [SubFrame(150, 150, 1.0)], CFG, FRAME)
        near_border = score(patch, [SubFrame(260, 260, 1.0)], CFG, FRAME)
        self.assertGreater(near_border, centered)

    def test_penalty_dominates(self):
        big = [Patch(0, Rect(0, 0, 200, 200)), Patch(1, Rect(400, 400, 200, 200))]
        failing = score(big, [SubFrame(100, 100, 1.0, detector_size=250)], CFG, FRAME)
        passing = score(big, [SubFrame(100, 100, 1.0), SubFrame(900, 500, 1.0)], CFG, FRAME)
        self.assertLess(failing, 0)
        self.assertGreater(passing, failing)


class TestObjectiveEvaluator(unittest.TestCase):
    """Test the cached evaluator against the reference score"""

    def test_matches_reference_score(self):
        rng = np.random.default_rng(11)
        profile = calibrated_profile(700, 100, 120, 30, 1 / 120, 3, 720)
        patches = []
        for i in range(12):
            x, y = int(rng.integers(0, 1200)), int(rng.integers(0, 680))
            patch_rect = Rect(x, y, int(rng.integers(8, 60)), int(rng.integers(8, 40))).clamp_to(FRAME)
            patches.append(Patch(i, patch_rect, beta=0.5))
        evaluator = ObjectiveEvaluator(patches, CFG, profile, 300, FRAME)
        for _ in range(50):
            n = int(rng.integers(1, 5))
            positions = [(float(16 * rng.integers(0, 81)), float(16 * rng.integers(0, 46))) for _ in range(n)]
            expected = score(patches, evaluator.sub_frames(positions), CFG, FRAME)
            self.assertAlmostEqual(evaluator.score(positions), expected, places=6)

    def test_swap_scores_match_full_score(self):
        rng = np.random.default_rng(5)
        patches = [Patch(i, Rect(40 + 110 * i, 60 + 50 * (i % 4), 24, 18)) for i in range(10)]
        evaluator = ObjectiveEvaluator(patches, CFG, default_profile(720), 300, FRAME)
        for _ in range(20):
            n = int(rng.integers(1, 4))
            positions = [(float(16 * rng.integers(0, 81)), float(16 * rng.integers(0, 46))) for _ in range(n)]
            index = int(rng.integers(n))
            # pojok kanan bawah tidak memuat patch manapun
            options = [(float(16 * rng.integers(0, 81)), float(16 * rng.integers(0, 46))) for _ in range(6)] + [(1280.0, 720.0)]
            values = evaluator.swap_scores(positions, index, options)
            self.assertEqual(values.shape, (len(options),))
            for option, value in zip(options, values):
                trial = positions[:index] + [option] + positions[index + 1:]
                expected = evaluator.score(trial)
                self.assertAlmostEqual(value, expected, delta=1e-9 * max(1.0, abs(expected)))

    def test_memoized(self):
        evaluator = ObjectiveEvaluator([Patch(0, Rect(10, 10, 10, 10))], CFG, default_profile(720), 300, FRAME)
        evaluator.score([(16.0, 16.0)])
        evaluator.score([(16.0, 16.0)])
        self.assertEqual(evaluator.evaluations, 1)
        self.assertTrue(evaluator.position(16.0, 16.0).covers_any)


def suite():
    """Create test suite"""
    loader = unittest.TestLoader()
    suite = unittest.TestSuite()
    for case in (TestCoverage, TestTerms, TestScore, TestObjectiveEvaluator):
        suite.addTest(loader.loadTestsFromTestCase(case))
    return suite


if __name__ == '__main__':
    runner = unittest.TextTestRunner(verbosity=2)
    runner.run(suite())
