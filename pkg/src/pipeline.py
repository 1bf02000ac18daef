"""
Modul Pipeline
Alur per frame: ekstraksi -> komposisi -> render sub-frame -> deteksi ->
map back -> suppress duplikat, baseline DS / DIV, dan evaluasi akurasi.
"""

import logging
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from PIL import Image

from detectors import DetectionRequest, DetectionWindow, DetectorAdapter
from errors import DetectorProtocolError, InputError, UnmappableBoxError
from extraction import ExtractionConfig, extract_patches, frame_difference, to_grayscale
from geometry import (
    CompositionPlan,
    DetectionBox,
    PlacementMode,
    Rect,
    crop_transform_inverse,
    frame_rect,
    inverse_map,
)
from objective import ObjectiveConfig
from optimizer import ComposeReport, GaConfig, compose_detailed, div_tiles
from scaling import ScalingProfile
from utils import read_image, read_mask

logger = logging.getLogger(__name__)

GRAY = 128
# toleransi floating point saat mengubah rect ke piksel
PIXEL_EPS = 1e-6
INTERPOLATIONS = {
    "nearest": Image.Resampling.NEAREST,
    "bilinear": Image.Resampling.BILINEAR,
}
PR_THRESHOLDS = np.linspace(0.0, 0.95, 20)
STAGES = ("extraction", "composition", "render", "detect", "map_back")
METHODS = ("ours", "ds", "div")


@dataclass(frozen=True)
class PipelineConfig:
    detector_size: int = 300
    window_size: int = 0
    iou_threshold: float = 0.5
    interpolation: str = "nearest"
    detector_timeout: float = 10.0
    detector_pool: int = 1

    def __post_init__(self):
        if self.interpolation not in INTERPOLATIONS:
            raise ValueError(f"interpolation must be one of {sorted(INTERPOLATIONS)}, got {self.interpolation!r}")
        if self.window_size and self.window_size < self.detector_size:
            raise ValueError("window_size must be 0 or >= detector_size")
        if not 0.0 < self.iou_threshold <= 1.0:
            raise ValueError(f"iou_threshold must be in (0, 1], got {self.iou_threshold}")

    @property
    def canvas_size(self) -> int:
        """Ukuran canvas komposisi (window_size jika di-set)"""
        return self.window_size or self.detector_size


@dataclass(frozen=True)
class EvalReport:
    one_minus_precision: float
    recall: float
    f1: float
    frames_per_second: float
    pr_curve: List[Tuple[float, float]]
    true_positives: int = 0
    false_positives: int = 0
    false_negatives: int = 0

    @property
    def precision(self) -> float:
        return 1.0 - self.one_minus_precision

    def to_dict(self) -> Dict:
        return {
            "one_minus_precision": self.one_minus_precision,
            "recall": self.recall,
            "f1": self.f1,
            "frames_per_second": self.frames_per_second,
            "pr_curve": [list(point) for point in self.pr_curve],
            "true_positives": self.true_positives,
            "false_positives": self.false_positives,
            "false_negatives": self.false_negatives,
        }


@dataclass
class MapBackResult:
    boxes: List[DetectionBox]
    dropped: int = 0


def _resample(interpolation: str):
    try:
        return INTERPOLATIONS[interpolation]
    except KeyError:
        raise InputError(f"unknown interpolation {interpolation!r}")


def _resize(raster: np.ndarray, size: Tuple[int, int], interpolation: str) -> np.ndarray:
    width, height = size
    if raster.shape[1] == width and raster.shape[0] == height:
        return raster
    img = Image.fromarray(np.ascontiguousarray(raster))
    return np.array(img.resize((width, height), resample=_resample(interpolation)), dtype=np.uint8)


def _blank_canvas(frame: np.ndarray, size: int) -> np.ndarray:
    shape = (size, size) + frame.shape[2:]
    return np.full(shape, GRAY, dtype=np.uint8)


def _paste(canvas: np.ndarray, patch: np.ndarray, x: int, y: int) -> None:
    h = min(patch.shape[0], canvas.shape[0] - y)
    w = min(patch.shape[1], canvas.shape[1] - x)
    if h > 0 and w > 0:
        canvas[y:y + h, x:x + w] = patch[:h, :w]


def _inner_pixels(rect: Rect) -> Tuple[int, int, int, int]:
    """(x, y, w, h) piksel yang seluruhnya berada di dalam rect, minimal 1x1"""
    x = math.ceil(rect.x - PIXEL_EPS)
    y = math.ceil(rect.y - PIXEL_EPS)
    w = max(1, math.floor(rect.x2 + PIXEL_EPS) - x)
    h = max(1, math.floor(rect.y2 + PIXEL_EPS) - y)
    return x, y, w, h


def _crop(frame: np.ndarray, rect: Rect) -> np.ndarray:
    x, y = int(round(rect.x)), int(round(rect.y))
    return frame[y:y + int(round(rect.h)), x:x + int(round(rect.w))]


def render_subframes(
    frame: np.ndarray,
    plan: CompositionPlan,
    interpolation: str = "nearest",
    output_size: Optional[int] = None,
) -> List[np.ndarray]:
    """
    Render canvas setiap sub-frame: crop sub-frame di-resize ke skala host,
    lalu source setiap placement relocated di-resize dan ditempel di dst-nya.
    Sisa canvas berwarna abu-abu (128).

    Args:
        frame: Raster original (H, W) atau (H, W, 3)
        plan: CompositionPlan
        interpolation: 'nearest' (default) atau 'bilinear'
        output_size: Ukuran akhir canvas (mode large-window), default plan.detector_size

    Returns:
        List raster berukuran output_size x output_size
    """
    width, height = plan.frame_size
    if frame.shape[1] != width or frame.shape[0] != height:
        raise InputError(f"frame is {frame.shape[1]}x{frame.shape[0]}, plan expects {width}x{height}")

    size = plan.detector_size
    canvases = []
    for j, f in enumerate(plan.sub_frames):
        canvas = _blank_canvas(frame, size)
        rect = plan.rect_of(j)
        crop = _crop(frame, rect)
        target = (min(size, max(1, round(rect.w * f.scale))), min(size, max(1, round(rect.h * f.scale))))
        _paste(canvas, _resize(crop, target, interpolation), 0, 0)

        for p in plan.placements_for(j):
            if p.mode is not PlacementMode.RELOCATED:
                continue
            # slot bisa berbatas sub-piksel; piksel tetangga milik patch lain
            x, y, w, h = _inner_pixels(p.dst)
            _paste(canvas, _resize(_crop(frame, p.src), (w, h), interpolation), x, y)

        if output_size and output_size != size:
            canvas = _resize(canvas, (output_size, output_size), interpolation)
        canvases.append(canvas)
    return canvases


def suppress_duplicates(boxes: Sequence[DetectionBox], iou_threshold: float = 0.5) -> List[DetectionBox]:
    """
    Greedy IoU suppression per label: box dengan skor lebih tinggi dipertahankan,
    box lain berlabel sama dengan IoU >= threshold dibuang.
    """
    ordered = sorted(boxes, key=lambda b: (-b.score, b.rect.y, b.rect.x, b.label))
    kept: List[DetectionBox] = []
    for box in ordered:
        if any(k.label == box.label and k.rect.iou(box.rect) >= iou_threshold for k in kept):
            continue
        kept.append(box)
    return kept


def map_back(
    plan: CompositionPlan,
    boxes_per_subframe: Sequence[Sequence[DetectionBox]],
    iou_threshold: float = 0.5,
) -> MapBackResult:
    """
    Petakan deteksi di ruang sub-frame ke koordinat original.

    Box di-assign ke placement yang dst-nya memuat pusat box; jika tidak ada,
    dipetakan lewat transform crop sub-frame bila pusatnya di area in situ;
    selain itu dibuang dan dihitung di tally.
    """
    mapped: List[DetectionBox] = []
    dropped = 0
    for j, boxes in enumerate(boxes_per_subframe):
        placements = plan.placements_for(j)
        f = plan.sub_frames[j]
        for box in boxes:
            cx, cy = box.rect.center
            placement = next((p for p in placements if p.dst.contains_point(cx, cy)), None)
            try:
                if placement is not None:
                    rect = inverse_map(placement, box.rect)
                else:
                    rect = crop_transform_inverse(f, plan.frame_size, box.rect)
            except UnmappableBoxError:
                dropped += 1
                continue
            mapped.append(box.moved(rect))

    if dropped:
        logger.warning(f"Dropped {dropped} detection(s) centered in dead space")
    return MapBackResult(suppress_duplicates(mapped, iou_threshold), dropped)


def _match_counts(
    predictions: Dict[str, Sequence[DetectionBox]],
    ground_truth: Dict[str, Sequence[DetectionBox]],
    iou_threshold: float,
    min_score: float = 0.0,
) -> Tuple[int, int, int]:
    tp = fp = fn = 0
    for frame_id in sorted(set(predictions) | set(ground_truth)):
        preds = [b for b in predictions.get(frame_id, []) if b.score >= min_score]
        gts = list(ground_truth.get(frame_id, []))
        for label in sorted({b.label for b in preds} | {g.label for g in gts}):
            label_gts = [g for g in gts if g.label == label]
            matched = [False] * len(label_gts)
            for pred in sorted((b for b in preds if b.label == label), key=lambda b: -b.score):
                best_iou, best_idx = iou_threshold, None
                for idx, gt in enumerate(label_gts):
                    if matched[idx]:
                        continue
                    overlap = pred.rect.iou(gt.rect)
                    if overlap >= best_iou:
                        best_iou, best_idx = overlap, idx
                if best_idx is None:
                    fp += 1
                else:
                    matched[best_idx] = True
                    tp += 1
            fn += matched.count(False)
    return tp, fp, fn


def _precision_recall(tp: int, fp: int, fn: int) -> Tuple[float, float]:
    precision = tp / (tp + fp) if tp + fp else 0.0
    recall = tp / (tp + fn) if tp + fn else 0.0
    return precision, recall


def evaluate(
    predictions: Dict[str, Sequence[DetectionBox]],
    ground_truth: Dict[str, Sequence[DetectionBox]],
    iou_threshold: float = 0.5,
    elapsed_seconds: Optional[float] = None,
    n_frames: Optional[int] = None,
) -> EvalReport:
    """
    Matching greedy berurutan skor (per frame dan label, IoU >= threshold).

    Args:
        predictions: frame_id -> box prediksi (koordinat original)
        ground_truth: frame_id -> box ground truth
        iou_threshold: Batas IoU untuk true positive
        elapsed_seconds: Total waktu proses (untuk frames_per_second)
        n_frames: Jumlah frame (default: jumlah frame_id unik)

    Returns:
        EvalReport dengan kurva (1 - precision, recall) pada 20 threshold skor
    """
    tp, fp, fn = _match_counts(predictions, ground_truth, iou_threshold)
    precision, recall = _precision_recall(tp, fp, fn)
    f1 = 2 * precision * recall / (precision + recall) if precision + recall > 0 else 0.0

    curve = []
    for threshold in PR_THRESHOLDS:
        p, r = _precision_recall(*_match_counts(predictions, ground_truth, iou_threshold, float(threshold)))
        curve.append((1.0 - p, r))

    if n_frames is None:
        n_frames = len(set(predictions) | set(ground_truth))
    fps = n_frames / elapsed_seconds if elapsed_seconds else 0.0
    return EvalReport(
        one_minus_precision=1.0 - precision,
        recall=recall,
        f1=f1,
        frames_per_second=fps,
        pr_curve=curve,
        true_positives=tp,
        false_positives=fp,
        false_negatives=fn,
    )


def _scale_box(box: DetectionBox, factor: float) -> DetectionBox:
    r = box.rect
    return box.moved(Rect(r.x * factor, r.y * factor, r.w * factor, r.h * factor), box.sub_frame)


def run_ds(
    frame: np.ndarray,
    detector: DetectorAdapter,
    frame_id: str = "",
    detector_size: int = 300,
    interpolation: str = "nearest",
) -> Tuple[List[DetectionBox], int]:
    """
    Baseline DS: seluruh frame di-resize ke detector_size x detector_size,
    box di-skala balik per sumbu.

    Returns:
        (box di koordinat original, jumlah pemanggilan detector)
    """
    height, width = frame.shape[:2]
    image = _resize(frame, (detector_size, detector_size), interpolation)
    window = DetectionWindow(frame_rect((width, height)), Rect(0, 0, detector_size, detector_size))
    boxes = detector.detect(image, DetectionRequest(frame_id, 0, (window,)))
    sx, sy = width / detector_size, height / detector_size
    mapped = [
        b.moved(Rect(b.rect.x * sx, b.rect.y * sy, b.rect.w * sx, b.rect.h * sy))
        for b in boxes
    ]
    return mapped, 1


def run_div(
    frame: np.ndarray,
    detector: DetectorAdapter,
    frame_id: str = "",
    tile: int = 300,
    iou_threshold: float = 0.5,
) -> Tuple[List[DetectionBox], int]:
    """
    Baseline DIV: tiling non-overlapping berukuran tile, deteksi per tile,
    map back dengan translasi, lalu suppress duplikat.
    """
    height, width = frame.shape[:2]
    tiles = div_tiles((width, height), tile)
    mapped = []
    for index, t in enumerate(tiles):
        canvas = _blank_canvas(frame, tile)
        _paste(canvas, _crop(frame, t), 0, 0)
        window = DetectionWindow(t, Rect(0, 0, t.w, t.h))
        for b in detector.detect(canvas, DetectionRequest(frame_id, index, (window,))):
            r = b.rect
            mapped.append(b.moved(Rect(r.x + t.x, r.y + t.y, r.w, r.h)))
    return suppress_duplicates(mapped, iou_threshold), len(tiles)


@dataclass
class FrameResult:
    frame_id: str
    boxes: List[DetectionBox] = field(default_factory=list)
    invocations: int = 0
    n_patches: int = 0
    dropped: int = 0
    timings: Dict[str, float] = field(default_factory=dict)
    plan: Optional[CompositionPlan] = None
    compose_report: Optional[ComposeReport] = None
    skipped: bool = False

    def to_dict(self) -> Dict:
        data = {
            "frame_id": self.frame_id,
            "invocations": self.invocations,
            "n_patches": self.n_patches,
            "dropped": self.dropped,
            "skipped": self.skipped,
            "timings": dict(self.timings),
        }
        if self.compose_report is not None:
            data["compose"] = {
                "generations": self.compose_report.generations,
                "retries": self.compose_report.retries,
                "used_fallback": self.compose_report.used_fallback,
                "pruned": self.compose_report.pruned,
            }
        return data


@dataclass(frozen=True)
class FrameInput:
    frame_id: str
    frame_path: Path
    mask_path: Optional[Path] = None
    prev_path: Optional[Path] = None


class FramePipeline:
    """
    Pipeline lengkap satu frame, dengan waktu per stage.
    Konfigurasi dibagikan; setiap frame diproses independen.
    """

    def __init__(
        self,
        profile: ScalingProfile,
        objective_cfg: ObjectiveConfig,
        ga_cfg: GaConfig,
        extraction_cfg: ExtractionConfig,
        pipeline_cfg: PipelineConfig,
        detector: DetectorAdapter,
    ):
        self.profile = profile
        self.objective_cfg = objective_cfg
        self.ga_cfg = ga_cfg
        self.extraction_cfg = extraction_cfg
        self.cfg = pipeline_cfg
        self.detector = detector

    def foreground(self, frame: np.ndarray, mask: Optional[np.ndarray], prev: Optional[np.ndarray]) -> np.ndarray:
        if mask is not None:
            if mask.shape[:2] != frame.shape[:2]:
                raise InputError(f"mask is {mask.shape[1]}x{mask.shape[0]}, frame is {frame.shape[1]}x{frame.shape[0]}")
            return mask
        if prev is not None:
            return frame_difference(frame, prev, self.extraction_cfg.diff_threshold)
        logger.debug("No mask and no previous frame, foreground is empty")
        return np.zeros(frame.shape[:2], dtype=bool)

    def _compose_and_detect(self, frame_id: str, frame: np.ndarray, patches, result: FrameResult) -> None:
        cfg = self.cfg
        frame_size = (frame.shape[1], frame.shape[0])
        canvas = cfg.canvas_size

        t0 = time.perf_counter()
        outcome = compose_detailed(patches, self.profile, self.objective_cfg, self.ga_cfg, canvas, frame_size)
        plan = outcome.plan
        result.timings["composition"] = time.perf_counter() - t0
        result.plan = plan
        result.compose_report = outcome.report

        t0 = time.perf_counter()
        images = render_subframes(frame, plan, cfg.interpolation, output_size=cfg.detector_size)
        result.timings["render"] = time.perf_counter() - t0

        # window dst dalam koordinat detector (mode large-window men-downscale canvas)
        shrink = cfg.detector_size / canvas
        t0 = time.perf_counter()
        raw = []
        for j, image in enumerate(images):
            windows = tuple(
                DetectionWindow(p.src, Rect(p.dst.x * shrink, p.dst.y * shrink, p.dst.w * shrink, p.dst.h * shrink))
                for p in plan.placements_for(j)
            )
            boxes = self.detector.detect(image, DetectionRequest(frame_id, j, windows))
            raw.append([_scale_box(b, 1.0 / shrink) for b in boxes] if shrink != 1.0 else boxes)
        result.timings["detect"] = time.perf_counter() - t0
        result.invocations = len(images)

        t0 = time.perf_counter()
        mapped = map_back(plan, raw, cfg.iou_threshold)
        result.timings["map_back"] = time.perf_counter() - t0
        result.boxes = mapped.boxes
        result.dropped = mapped.dropped

    def process_frame(
        self,
        frame_id: str,
        frame: np.ndarray,
        mask: Optional[np.ndarray] = None,
        prev: Optional[np.ndarray] = None,
        method: str = "ours",
    ) -> FrameResult:
        """
        Proses satu frame dengan metode 'ours', 'ds', atau 'div'.
        Kegagalan detector membuat frame dilewati (skipped) dengan warning.
        """
        if method not in METHODS:
            raise InputError(f"unknown method {method!r}, expected one of {METHODS}")

        result = FrameResult(frame_id=frame_id, timings={stage: 0.0 for stage in STAGES})
        try:
            if method == "ds":
                t0 = time.perf_counter()
                result.boxes, result.invocations = run_ds(frame, self.detector, frame_id, self.cfg.detector_size, self.cfg.interpolation)
                result.timings["detect"] = time.perf_counter() - t0
            elif method == "div":
                t0 = time.perf_counter()
                result.boxes, result.invocations = run_div(frame, self.detector, frame_id, self.cfg.detector_size, self.cfg.iou_threshold)
                result.timings["detect"] = time.perf_counter() - t0
            else:
                t0 = time.perf_counter()
                fg = self.foreground(frame, mask, prev)
                patches = extract_patches(fg, self.profile, self.extraction_cfg, (frame.shape[1], frame.shape[0]))
                result.timings["extraction"] = time.perf_counter() - t0
                result.n_patches = len(patches)
                self._compose_and_detect(frame_id, frame, patches, result)
        except DetectorProtocolError as e:
            logger.warning(f"Frame {frame_id} skipped: {e}")
            result.boxes = []
            result.skipped = True
        return result

    def process_input(self, item: FrameInput, method: str = "ours") -> FrameResult:
        frame = read_image(item.frame_path)
        mask = read_mask(item.mask_path) if item.mask_path else None
        prev = to_grayscale(read_image(item.prev_path)) if item.prev_path else None
        return self.process_frame(item.frame_id, frame, mask, prev, method)


def process_frames(
    pipeline: FramePipeline,
    items: Sequence[FrameInput],
    jobs: int = 1,
    method: str = "ours",
) -> List[FrameResult]:
    """
    Proses banyak frame dengan thread pool berisi `jobs` worker.
    Urutan hasil mengikuti urutan input.
    """
    jobs = max(1, jobs)
    if jobs == 1 or len(items) <= 1:
        return [pipeline.process_input(item, method) for item in items]
    with ThreadPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(lambda item: pipeline.process_input(item, method), items))


def frame_inputs(frame_paths: Sequence[Path], mask_dir: Optional[Path] = None) -> List[FrameInput]:
    """
    Susun FrameInput: mask dari mask_dir (nama file sama, .pgm) jika ada,
    selain itu frame sebelumnya untuk frame differencing.
    """
    items = []
    for i, path in enumerate(frame_paths):
        mask_path = None
        if mask_dir is not None:
            mask_path = Path(mask_dir) / f"{path.stem}.pgm"
            if not mask_path.exists():
                raise InputError(f"mask not found for frame {path.name}: {mask_path}")
        prev_path = frame_paths[i - 1] if i > 0 and mask_path is None else None
        items.append(FrameInput(path.stem, path, mask_path, prev_path))
    return items


def timing_table(results: Sequence[FrameResult]) -> pd.DataFrame:
    """Statistik waktu per stage (mean dan persentil 95) dalam detik"""
    df = pd.DataFrame([r.timings for r in results], columns=list(STAGES)).fillna(0.0)
    return pd.DataFrame({"mean": df.mean(), "p95": df.quantile(0.95)})
