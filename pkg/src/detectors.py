"""
Modul Detector Service
Adapter detector yang bisa dipasang ke pipeline: oracle detector (ground
truth yang dipetakan ke sub-frame) dan external detector (child process
dengan protokol baris DETECT / BOX / END).
"""

import logging
import queue
import shlex
import subprocess
import tempfile
import threading
import uuid
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Optional, Protocol, Sequence, Tuple

import numpy as np

from errors import DetectorProtocolError, InputError
from geometry import DetectionBox, Rect, contains
from utils import write_image

logger = logging.getLogger(__name__)

# Lock threading untuk registry detector
_detector_lock = threading.Lock()


@dataclass(frozen=True)
class DetectionWindow:
    """Region original (src) yang tampil di dst canvas detector, affine per sumbu"""

    src: Rect
    dst: Rect

    def forward(self, box: Rect) -> Rect:
        sx = self.dst.w / self.src.w
        sy = self.dst.h / self.src.h
        return Rect(
            self.dst.x + (box.x - self.src.x) * sx,
            self.dst.y + (box.y - self.src.y) * sy,
            box.w * sx,
            box.h * sy,
        )


@dataclass(frozen=True)
class DetectionRequest:
    frame_id: str
    index: int
    windows: Tuple[DetectionWindow, ...] = ()


class DetectorAdapter(Protocol):
    def detect(self, image: np.ndarray, request: DetectionRequest) -> List[DetectionBox]:
        ...


class OracleDetector:
    """
    Detector tanpa ConvNet: setiap box ground truth yang seluruhnya berada di
    src sebuah window dikembalikan (skor 1.0) di koordinat detector, hanya
    lewat window pertama yang memuatnya.
    """

    def __init__(self, annotations: Dict[str, Sequence[DetectionBox]]):
        self.annotations = {k: list(v) for k, v in annotations.items()}
        self.calls = 0

    def detect(self, image: np.ndarray, request: DetectionRequest) -> List[DetectionBox]:
        self.calls += 1
        boxes = []
        for gt in self.annotations.get(request.frame_id, []):
            for window in request.windows:
                if contains(window.src, gt.rect):
                    boxes.append(DetectionBox(gt.label, 1.0, window.forward(gt.rect), request.index))
                    break
        return boxes


def oracle_detector(annotations: Dict[str, Sequence[DetectionBox]]) -> OracleDetector:
    return OracleDetector(annotations)


def parse_box_line(line: str, sub_frame: Optional[int] = None) -> DetectionBox:
    """
    Parse satu baris `BOX label score x y w h`.

    Raises:
        DetectorProtocolError: jika format baris tidak valid
    """
    parts = line.split()
    if len(parts) != 7 or parts[0] != "BOX":
        raise DetectorProtocolError(f"malformed detector line: {line!r}")
    try:
        score, x, y, w, h = (float(v) for v in parts[2:])
        return DetectionBox(parts[1], score, Rect(x, y, w, h), sub_frame)
    except ValueError as e:
        raise DetectorProtocolError(f"malformed detector line: {line!r} ({e})") from e


class DetectorProcess:
    """
    Satu child process detector. Stdout dibaca thread terpisah ke queue
    supaya setiap baris bisa ditunggu dengan timeout.
    """

    def __init__(self, args: Sequence[str], timeout: float = 10.0, name: str = "detector"):
        self.args = list(args)
        self.timeout = timeout
        self.name = name
        self.proc: Optional[subprocess.Popen] = None
        self.lines: "queue.Queue[str]" = queue.Queue()
        self.start()

    def start(self) -> None:
        try:
            self.proc = subprocess.Popen(
                self.args,
                stdin=subprocess.PIPE,
                stdout=subprocess.PIPE,
                universal_newlines=True,
                encoding="utf-8",
                bufsize=1,
            )
        except OSError as e:
            raise DetectorProtocolError(f"cannot start detector {self.args}: {e}") from e
        self.lines = queue.Queue()
        threading.Thread(target=self._read_stdout, args=(self.proc, self.lines), daemon=True).start()
        logger.debug(f"{self.name}: started pid {self.proc.pid}")

    @staticmethod
    def _read_stdout(proc: subprocess.Popen, lines: "queue.Queue[str]") -> None:
        while True:
            line = proc.stdout.readline()
            lines.put(line)
            if line == "":
                break

    def _read_line(self) -> str:
        try:
            line = self.lines.get(timeout=self.timeout)
        except queue.Empty:
            raise DetectorProtocolError(f"{self.name}: no response within {self.timeout}s")
        if line == "":
            raise DetectorProtocolError(f"{self.name}: child exited (code {self.proc.poll()})")
        return line.rstrip("\n")

    def request(self, image_path: Path, sub_frame: Optional[int] = None) -> List[DetectionBox]:
        """Kirim `DETECT <path>` dan baca BOX sampai END"""
        try:
            self.proc.stdin.write(f"DETECT {image_path}\n")
            self.proc.stdin.flush()
        except (OSError, ValueError) as e:
            raise DetectorProtocolError(f"{self.name}: cannot write request: {e}") from e

        boxes = []
        while True:
            line = self._read_line().strip()
            if line == "END":
                return boxes
            if not line:
                continue
            boxes.append(parse_box_line(line, sub_frame))

    def close(self) -> None:
        if self.proc is None:
            return
        proc = self.proc
        self.proc = None
        try:
            proc.stdin.close()
        except OSError:
            pass
        proc.terminate()
        try:
            proc.wait(self.timeout)
        except subprocess.TimeoutExpired:
            proc.kill()
            proc.wait()
        if proc.stdout:
            proc.stdout.close()

    def restart(self) -> None:
        logger.warning(f"{self.name}: restarting child process")
        self.close()
        self.start()


class ExternalDetector:
    """
    Detector eksternal lewat child process (satu atau pool). Raster ditukar
    lewat file sementara; setiap child dipakai oleh satu request pada satu
    waktu.
    """

    def __init__(self, command: str, timeout: float = 10.0, pool_size: int = 1):
        """
        Args:
            command: Command line child (di-split dengan shlex)
            timeout: Batas waktu per baris respons, detik
            pool_size: Jumlah child paralel
        """
        args = shlex.split(command)
        if not args:
            raise InputError("detector command is empty")
        if pool_size < 1:
            raise InputError(f"detector_pool must be >= 1, got {pool_size}")

        self.command = command
        self.calls = 0
        self._calls_lock = threading.Lock()
        self._tmpdir = tempfile.TemporaryDirectory(prefix="poic-detector-")
        self._children: List[DetectorProcess] = []
        self._idle: "queue.Queue[DetectorProcess]" = queue.Queue()
        try:
            for i in range(pool_size):
                child = DetectorProcess(args, timeout=timeout, name=f"detector-{i + 1}")
                self._children.append(child)
                self._idle.put(child)
        except DetectorProtocolError:
            self.close()
            raise
        logger.info(f"External detector started with {pool_size} child(ren): {command}")

    def detect(self, image: np.ndarray, request: DetectionRequest) -> List[DetectionBox]:
        suffix = ".pgm" if image.ndim == 2 else ".ppm"
        path = Path(self._tmpdir.name) / f"{request.frame_id}_{request.index}_{uuid.uuid4().hex[:8]}{suffix}"
        write_image(path, image)
        with self._calls_lock:
            self.calls += 1

        child = self._idle.get()
        try:
            try:
                return child.request(path, request.index)
            except DetectorProtocolError as e:
                # coba sekali lagi dengan child baru sebelum gagal
                logger.warning(f"Detector request failed for {request.frame_id}#{request.index}: {e}")
                child.restart()
                try:
                    return child.request(path, request.index)
                except DetectorProtocolError:
                    child.restart()
                    raise
        finally:
            self._idle.put(child)
            path.unlink(missing_ok=True)

    def close(self) -> None:
        for child in self._children:
            child.close()
        self._children = []
        self._tmpdir.cleanup()

    def __enter__(self):
        return self

    def __exit__(self, exc_type, exc, tb):
        self.close()


# Registry external detector per command line
_external_detectors: Dict[Tuple[str, float, int], ExternalDetector] = {}


def get_external_detector(command: str, timeout: float = 10.0, pool_size: int = 1) -> ExternalDetector:
    """
    Ambil atau buat ExternalDetector untuk command ini (thread-safe)

    Returns:
        Instance ExternalDetector
    """
    key = (command, timeout, pool_size)
    detector = _external_detectors.get(key)
    if detector is None:
        with _detector_lock:  # Inisialisasi thread-safe
            detector = _external_detectors.get(key)
            if detector is None:  # Pola double-check
                detector = ExternalDetector(command, timeout, pool_size)
                _external_detectors[key] = detector
    return detector


def close_external_detectors() -> None:
    with _detector_lock:
        for detector in _external_detectors.values():
            detector.close()
        _external_detectors.clear()


def external_detector(command: str, timeout: float = 10.0, pool_size: int = 1) -> ExternalDetector:
    return ExternalDetector(command, timeout, pool_size)
