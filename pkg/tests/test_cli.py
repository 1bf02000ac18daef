"""
Unit Tests for cli.py
Runs main(argv) in-process and checks outputs and exit codes
"""

import sys
from pathlib import Path

# Add src to path
sys.path.append(str(Path(__file__).parent.parent / "src"))

import contextlib
import io
import json
import shlex
import tempfile
import unittest

import numpy as np

from cli import main
from geometry import Patch, Rect
from utils import read_patches, read_plan, write_image, write_patches


def run_cli(*argv):
    out, err = io.StringIO(), io.StringIO()
    with contextlib.redirect_stdout(out), contextlib.redirect_stderr(err):
        code = main(list(argv))
    return code, out.getvalue(), err.getvalue()


class CliTestCase(unittest.TestCase):

    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()
        self.dir = Path(self.tmp.name)

    def tearDown(self):
        self.tmp.cleanup()

    def path(self, name):
        return str(self.dir / name)


class TestCommands(CliTestCase):
    """Test the subcommands on small inputs"""

    def test_print_default_config(self):
        code, out, _ = run_cli("--print-default-config")
        self.assertEqual(code, 0)
        self.assertIn("detector_size=300", out)

    def test_no_command(self):
        self.assertEqual(run_cli()[0], 2)

    def test_extract_from_mask(self):
        frame = np.zeros((120, 160), dtype=np.uint8)
        mask = np.zeros((120, 160), dtype=np.uint8)
        mask[20:40, 30:50] = 255
        write_image(self.path("frame.pgm"), frame)
        write_image(self.path("mask.pgm"), mask)
        code, _, _ = run_cli("-q", "extract", "--frame", self.path("frame.pgm"), "--mask", self.path("mask.pgm"), "--out", self.path("p.csv"))
        self.assertEqual(code, 0)
        self.assertEqual(read_patches(self.path("p.csv")), [Patch(0, Rect(27, 17, 26, 26), 1.0)])

    def test_extract_needs_foreground_source(self):
        write_image(self.path("frame.pgm"), np.zeros((10, 10), dtype=np.uint8))
        code, _, err = run_cli("extract", "--frame", self.path("frame.pgm"), "--out", self.path("p.csv"))
        self.assertEqual(code, 2)
        self.assertIn("error:", err)

    def test_compose_is_deterministic(self):
        patches = [Patch(i, Rect(60 * i + 10, 40 * (i % 5) + 20, 20, 16)) for i in range(12)]
        write_patches(self.path("p.csv"), patches)
        args = ("-q", "compose", "--patches", self.path("p.csv"), "--seed", "5")
        self.assertEqual(run_cli(*args, "--out", self.path("a.json"))[0], 0)
        self.assertEqual(run_cli(*args, "--out", self.path("b.json"))[0], 0)
        self.assertEqual(Path(self.path("a.json")).read_bytes(), Path(self.path("b.json")).read_bytes())
        self.assertTrue(read_plan(self.path("a.json")).covers_exactly(range(12)))

    def test_compose_capacity_exit_code(self):
        write_patches(self.path("p.csv"), [Patch(0, Rect(0, 0, 400, 400))])
        code, _, err = run_cli("compose", "--patches", self.path("p.csv"), "--out", self.path("plan.json"))
        self.assertEqual(code, 4)
        self.assertIn("capacity", err)

    def test_compose_patch_outside_frame(self):
        write_patches(self.path("p.csv"), [Patch(0, Rect(1270, 10, 40, 40))])
        code, _, err = run_cli("compose", "--patches", self.path("p.csv"), "--out", self.path("plan.json"))
        self.assertEqual(code, 2)
        self.assertIn("outside", err)
        self.assertFalse(Path(self.path("plan.json")).exists())

    def test_compose_then_render(self):
        write_patches(self.path("p.csv"), [Patch(0, Rect(100, 100, 30, 30)), Patch(1, Rect(1000, 600, 30, 30))])
        self.assertEqual(run_cli("-q", "compose", "--patches", self.path("p.csv"), "--out", self.path("plan.json"))[0], 0)
        write_image(self.path("frame.ppm"), np.zeros((720, 1280, 3), dtype=np.uint8))
        code, _, _ = run_cli("-q", "render", "--frame", self.path("frame.ppm"), "--plan", self.path("plan.json"), "--outdir", self.path("out"))
        self.assertEqual(code, 0)
        rendered = sorted((self.dir / "out").glob("subframe_*.ppm"))
        self.assertEqual(len(rendered), read_plan(self.path("plan.json")).n_sub_frames)

    def test_eval_perfect(self):
        Path(self.path("gt.csv")).write_text("frame_id,label,x,y,w,h\nf0,person,10,10,20,20\n")
        Path(self.path("pred.csv")).write_text("frame_id,label,score,x,y,w,h\nf0,person,0.9,10,10,20,20\n")
        code, out, _ = run_cli("eval", "--pred", self.path("pred.csv"), "--gt", self.path("gt.csv"))
        self.assertEqual(code, 0)
        self.assertEqual(json.loads(out)["f1"], 1.0)

    def test_eval_invalid_iou(self):
        code, _, _ = run_cli("eval", "--pred", "x.csv", "--gt", "y.csv", "--iou", "1.5")
        self.assertEqual(code, 2)

    def test_missing_input_file(self):
        code, _, _ = run_cli("compose", "--patches", self.path("missing.csv"), "--out", self.path("plan.json"))
        self.assertEqual(code, 2)

    def test_oracle(self):
        write_patches(self.path("p.csv"), [Patch(0, Rect(0, 0, 20, 20)), Patch(1, Rect(44, 44, 20, 20))])
        Path(self.path("small.conf")).write_text("detector_size=32\ngrid_stride=8\n")
        code, out, _ = run_cli(
            "oracle", "--patches", self.path("p.csv"), "--config", self.path("small.conf"), "--frame-size", "64x64"
        )
        self.assertEqual(code, 0)
        self.assertEqual(json.loads(out)["n_min"], 2)

    def test_bad_config_key(self):
        Path(self.path("bad.conf")).write_text("not_a_key=1\n")
        write_patches(self.path("p.csv"), [Patch(0, Rect(0, 0, 20, 20))])
        code, _, _ = run_cli("compose", "--patches", self.path("p.csv"), "--config", self.path("bad.conf"), "--out", self.path("plan.json"))
        self.assertEqual(code, 2)


class TestRunCommand(CliTestCase):
    """Test run / bench over a small frame directory"""

    def setUp(self):
        super().setUp()
        frames = self.dir / "frames"
        masks = self.dir / "masks"
        rng = np.random.default_rng(2)
        lines = ["frame_id,label,x,y,w,h"]
        for i in range(3):
            frame = rng.integers(0, 256, size=(240, 320), dtype=np.uint8)
            mask = np.zeros((240, 320), dtype=np.uint8)
            x, y = 40 + 60 * i, 30 + 40 * i
            mask[y:y + 20, x:x + 16] = 255
            write_image(frames / f"{i:04d}.pgm", frame)
            write_image(masks / f"{i:04d}.pgm", mask)
            lines.append(f"{i:04d},person,{x},{y},16,20")
        Path(self.path("gt.csv")).write_text("\n".join(lines) + "\n")

    def test_run_with_oracle_detector(self):
        code, _, _ = run_cli(
            "-q", "run", "--frames", self.path("frames"), "--masks", self.path("masks"),
            "--annotations", self.path("gt.csv"), "--jobs", "2",
            "--report", self.path("report.json"), "--pred", self.path("pred.csv"),
        )
        self.assertEqual(code, 0)
        report = json.loads(Path(self.path("report.json")).read_text())
        self.assertEqual(report["evaluation"]["recall"], 1.0)
        self.assertEqual(len(report["frames"]), 3)
        self.assertEqual(report["skipped_frames"], 0)

    def test_run_oracle_needs_annotations(self):
        code, _, _ = run_cli("run", "--frames", self.path("frames"), "--masks", self.path("masks"))
        self.assertEqual(code, 2)

    def test_run_detector_failure_exit_code(self):
        script = self.dir / "dies.py"
        script.write_text("import sys\nsys.stdin.readline()\nsys.exit(3)\n")
        Path(self.path("fast.conf")).write_text("detector_timeout=2\n")
        code, _, _ = run_cli(
            "-q", "run", "--frames", self.path("frames"), "--masks", self.path("masks"),
            "--config", self.path("fast.conf"), "--detector", f"{shlex.quote(sys.executable)} {shlex.quote(str(script))}", "--jobs", "1",
        )
        self.assertEqual(code, 3)

    def test_div_baseline(self):
        code, out, _ = run_cli(
            "-q", "run", "--frames", self.path("frames"), "--annotations", self.path("gt.csv"), "--method", "div",
        )
        self.assertEqual(code, 0)
        summary = json.loads(out)
        self.assertEqual(summary["invocations"], 3 * 2)
        self.assertEqual(summary["evaluation"]["recall"], 1.0)

    def test_bench(self):
        code, _, _ = run_cli(
            "-q", "bench", "--frames", self.path("frames"), "--masks", self.path("masks"),
            "--annotations", self.path("gt.csv"), "--repeat", "2", "--report", self.path("bench.json"),
        )
        self.assertEqual(code, 0)
        bench = json.loads(Path(self.path("bench.json")).read_text())
        self.assertEqual(bench["frames"], 6)
        self.assertIn("composition", bench["stages"])


def suite():
    """Create test suite"""
    loader = unittest.TestLoader()
    suite = unittest.TestSuite()
    suite.addTest(loader.loadTestsFromTestCase(TestCommands))
    suite.addTest(loader.loadTestsFromTestCase(TestRunCommand))
    return suite


if __name__ == '__main__':
    runner = unittest.TextTestRunner(verbosity=2)
    runner.run(suite())
