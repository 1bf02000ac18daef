"""
Unit Tests for scaling.py
Tests perspective calibration and vertical bands
"""

import sys
from pathlib import Path

# Add src to path
sys.path.append(str(Path(__file__).parent.parent / "src"))

import unittest

from errors import InputError, ScalingError
from scaling import (
    ScalingProfile,
    band_summary,
    beta_continuous,
    beta_for,
    build_bands,
    calibrated_profile,
    default_profile,
)

PROFILE = ScalingProfile(y_ab=700, y_cd=100, l_ab=120, l_cd=30, k_cal=1 / 120)


class TestBetaContinuous(unittest.TestCase):
    """Test the linear height interpolation"""

    def test_reference_line_endpoints(self):
        self.assertAlmostEqual(beta_continuous(PROFILE, 700), 1.0, places=12)
        self.assertAlmostEqual(beta_continuous(PROFILE, 100), 0.25, places=12)

    def test_hand_derived_value(self):
        self.assertAlmostEqual(beta_continuous(PROFILE, 400), 0.625, places=12)

    def test_affine_in_y(self):
        for y1, y2 in [(0, 720), (123, 456), (650, 710)]:
            lhs = beta_continuous(PROFILE, y1) + beta_continuous(PROFILE, y2)
            rhs = 2 * beta_continuous(PROFILE, (y1 + y2) / 2)
            self.assertAlmostEqual(lhs, rhs, places=9)

    def test_non_positive_beta_raises(self):
        # garis y=-100 memberi tinggi nol
        with self.assertRaises(ScalingError):
            beta_continuous(PROFILE, -100)

    def test_invalid_profiles(self):
        with self.assertRaises(ScalingError):
            ScalingProfile(y_ab=100, y_cd=100, l_ab=10, l_cd=5, k_cal=1)
        with self.assertRaises(ScalingError):
            ScalingProfile(y_ab=100, y_cd=0, l_ab=0, l_cd=5, k_cal=1)
        # ScalingError juga InputError (exit code 2)
        self.assertTrue(issubclass(ScalingError, InputError))


class TestBands(unittest.TestCase):
    """Test band quantization and lookup"""

    def test_single_band_uses_midline(self):
        bands = build_bands(PROFILE, 1, 720)
        self.assertEqual(len(bands), 1)
        self.assertAlmostEqual(bands[0][2], beta_continuous(PROFILE, 360))

    def test_two_bands_partition(self):
        bands = build_bands(PROFILE, 2, 720)
        self.assertEqual([(a, b) for a, b, _ in bands], [(0, 360), (360, 720)])
        self.assertAlmostEqual(bands[0][2], beta_continuous(PROFILE, 180))
        self.assertAlmostEqual(bands[1][2], beta_continuous(PROFILE, 540))

    def test_three_bands_hand_values(self):
        bands = build_bands(PROFILE, 3, 720)
        self.assertAlmostEqual(bands[0][2], 0.275, places=12)
        self.assertAlmostEqual(bands[1][2], 0.575, places=12)
        self.assertAlmostEqual(bands[2][2], 0.875, places=12)

    def test_band_count_limits(self):
        with self.assertRaises(ScalingError):
            build_bands(PROFILE, 4, 720)

    def test_beta_for_lookups(self):
        profile = calibrated_profile(700, 100, 120, 30, 1 / 120, 3, 720)
        self.assertAlmostEqual(beta_for(profile, 0), 0.275)
        self.assertAlmostEqual(beta_for(profile, 239.9), 0.275)
        self.assertAlmostEqual(beta_for(profile, 240), 0.575)
        self.assertAlmostEqual(beta_for(profile, 719), 0.875)
        self.assertAlmostEqual(beta_for(profile, 720), 0.875)  # clamp ke band terakhir

    def test_beta_for_agrees_at_midpoints(self):
        profile = calibrated_profile(700, 100, 120, 30, 1 / 120, 3, 720)
        for y_min, y_max, beta in profile.bands:
            self.assertAlmostEqual(beta_for(profile, (y_min + y_max) / 2), beta_continuous(PROFILE, (y_min + y_max) / 2))

    def test_default_profile_is_unit(self):
        profile = default_profile(720)
        self.assertEqual(beta_for(profile, 0), 1.0)
        self.assertEqual(beta_for(profile, 719), 1.0)
        self.assertEqual(band_summary(profile), [{"y_min": 0.0, "y_max": 720.0, "beta": 1.0}])


def suite():
    """Create test suite"""
    loader = unittest.TestLoader()
    suite = unittest.TestSuite()
    suite.addTest(loader.loadTestsFromTestCase(TestBetaContinuous))
    suite.addTest(loader.loadTestsFromTestCase(TestBands))
    return suite


if __name__ == '__main__':
    runner = unittest.TextTestRunner(verbosity=2)
    runner.run(suite())
