"""
Fungsi Utility untuk composition engine
Format file: raster PGM/PPM, CSV patch / anotasi / prediksi, JSON plan dan report
"""

import json
import logging
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Union

import numpy as np
import pandas as pd
from PIL import Image

from errors import InputError
from geometry import (
    CompositionPlan,
    DetectionBox,
    Patch,
    Placement,
    PlacementMode,
    Rect,
    SubFrame,
    subframe_rect,
)

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]

PATCH_COLUMNS = ["id", "x", "y", "w", "h", "beta"]
ANNOTATION_COLUMNS = ["frame_id", "label", "x", "y", "w", "h"]
PREDICTION_COLUMNS = ["frame_id", "label", "score", "x", "y", "w", "h"]
FRAME_SUFFIXES = (".pgm", ".ppm")
FLOAT_DECIMALS = 6


def read_image(path: PathLike) -> np.ndarray:
    """
    Baca raster PGM (P5) atau PPM (P6) maxval 255.

    Args:
        path: Path file

    Returns:
        Array uint8, shape (H, W) untuk PGM atau (H, W, 3) untuk PPM
    """
    try:
        with Image.open(path) as img:
            if img.mode not in ("L", "RGB"):
                img = img.convert("RGB" if img.mode in ("RGBA", "P") else "L")
            return np.array(img, dtype=np.uint8)
    except (OSError, ValueError) as e:
        raise InputError(f"cannot read image {path}: {e}") from e


def write_image(path: PathLike, raster: np.ndarray) -> None:
    """Tulis raster uint8 sebagai PGM (2D) atau PPM (3 channel)"""
    raster = np.ascontiguousarray(raster, dtype=np.uint8)
    if raster.ndim not in (2, 3):
        raise InputError(f"cannot write raster of shape {raster.shape}")
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    Image.fromarray(raster).save(path)


def read_mask(path: PathLike) -> np.ndarray:
    """Mask foreground dari PGM: pixel nonzero = foreground"""
    raster = read_image(path)
    if raster.ndim == 3:
        raster = raster.max(axis=2)
    return raster > 0


def list_frames(directory: PathLike) -> List[Path]:
    """File frame (PGM/PPM) dalam direktori, terurut berdasarkan nama"""
    directory = Path(directory)
    if not directory.is_dir():
        raise InputError(f"frame directory not found: {directory}")
    return sorted(p for p in directory.iterdir() if p.suffix.lower() in FRAME_SUFFIXES)


def _read_csv(path: PathLike, columns: Sequence[str]) -> pd.DataFrame:
    try:
        df = pd.read_csv(path, dtype={"frame_id": str, "label": str})
    except FileNotFoundError as e:
        raise InputError(f"file not found: {path}") from e
    except (pd.errors.EmptyDataError, pd.errors.ParserError, UnicodeDecodeError) as e:
        raise InputError(f"cannot parse {path}: {e}") from e

    missing = [c for c in columns if c not in df.columns]
    if missing:
        raise InputError(f"{path}: missing columns {missing} (header required)")
    return df


def read_patches(path: PathLike) -> List[Patch]:
    """Baca CSV `id,x,y,w,h,beta`"""
    df = _read_csv(path, PATCH_COLUMNS)
    duplicated = df["id"][df["id"].duplicated()].tolist()
    if duplicated:
        raise InputError(f"{path}: duplicate patch ids {duplicated}")
    try:
        return [
            Patch(
                id=int(row.id),
                rect=Rect(float(row.x), float(row.y), float(row.w), float(row.h)),
                beta=float(row.beta),
            )
            for row in df.itertuples(index=False)
        ]
    except (TypeError, ValueError) as e:
        raise InputError(f"{path}: invalid patch record: {e}") from e


def patches_to_frame(patches: Sequence[Patch]) -> pd.DataFrame:
    records = [
        {"id": p.id, "x": p.rect.x, "y": p.rect.y, "w": p.rect.w, "h": p.rect.h, "beta": round(p.beta, FLOAT_DECIMALS)}
        for p in patches
    ]
    return pd.DataFrame(records, columns=PATCH_COLUMNS)


def write_patches(path: PathLike, patches: Sequence[Patch]) -> None:
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    patches_to_frame(patches).to_csv(path, index=False)


def _boxes_by_frame(df: pd.DataFrame, with_score: bool, path: PathLike) -> Dict[str, List[DetectionBox]]:
    boxes: Dict[str, List[DetectionBox]] = {}
    try:
        for row in df.itertuples(index=False):
            score = float(row.score) if with_score else 1.0
            rect = Rect(float(row.x), float(row.y), float(row.w), float(row.h))
            boxes.setdefault(str(row.frame_id), []).append(DetectionBox(str(row.label), score, rect))
    except (TypeError, ValueError) as e:
        raise InputError(f"{path}: invalid box record: {e}") from e
    return boxes


def read_annotations(path: PathLike) -> Dict[str, List[DetectionBox]]:
    """
    Baca ground truth CSV `frame_id,label,x,y,w,h`.

    Returns:
        Dictionary frame_id -> list DetectionBox (score 1.0)
    """
    return _boxes_by_frame(_read_csv(path, ANNOTATION_COLUMNS), with_score=False, path=path)


def read_predictions(path: PathLike) -> Dict[str, List[DetectionBox]]:
    """Baca prediksi CSV `frame_id,label,score,x,y,w,h`"""
    return _boxes_by_frame(_read_csv(path, PREDICTION_COLUMNS), with_score=True, path=path)


def write_predictions(path: PathLike, predictions: Dict[str, Sequence[DetectionBox]]) -> None:
    records = [
        {
            "frame_id": frame_id,
            "label": b.label,
            "score": round(b.score, FLOAT_DECIMALS),
            "x": round(b.rect.x, FLOAT_DECIMALS),
            "y": round(b.rect.y, FLOAT_DECIMALS),
            "w": round(b.rect.w, FLOAT_DECIMALS),
            "h": round(b.rect.h, FLOAT_DECIMALS),
        }
        for frame_id in sorted(predictions)
        for b in predictions[frame_id]
    ]
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    pd.DataFrame(records, columns=PREDICTION_COLUMNS).to_csv(path, index=False)


def round_floats(value, decimals: int = FLOAT_DECIMALS):
    """Bulatkan semua float (rekursif) agar output JSON stabil"""
    if isinstance(value, float):
        rounded = round(value, decimals)
        return 0.0 if rounded == 0 else rounded
    if isinstance(value, dict):
        return {k: round_floats(v, decimals) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [round_floats(v, decimals) for v in value]
    if isinstance(value, np.generic):
        return round_floats(value.item(), decimals)
    return value


def plan_to_dict(plan: CompositionPlan) -> Dict:
    """Serialisasi plan ke schema JSON yang stabil"""
    sub_frames = []
    for index, f in enumerate(plan.sub_frames):
        sub_frames.append({
            "index": index,
            "cx": float(f.cx),
            "cy": float(f.cy),
            "beta": float(f.beta),
            "rect": [float(v) for v in subframe_rect(f, plan.frame_size).as_list()],
            "scale": float(f.scale),
        })
    placements = [
        {
            "patch_id": p.patch_id,
            "mode": p.mode.value,
            "host": p.host,
            "src": [float(v) for v in p.src.as_list()],
            "dst": [float(v) for v in p.dst.as_list()],
            "scale": float(p.scale),
        }
        for p in plan.placements
    ]
    return {
        "frame_size": [int(plan.frame_size[0]), int(plan.frame_size[1])],
        "detector_size": int(plan.detector_size),
        "sub_frames": sub_frames,
        "placements": placements,
    }


def plan_from_dict(data: Dict) -> CompositionPlan:
    try:
        detector_size = int(data["detector_size"])
        frame_size = (int(data["frame_size"][0]), int(data["frame_size"][1]))
        sub_frames = tuple(
            SubFrame(cx=float(f["cx"]), cy=float(f["cy"]), beta=float(f["beta"]), detector_size=detector_size)
            for f in sorted(data["sub_frames"], key=lambda f: f["index"])
        )
        placements = tuple(
            Placement(
                patch_id=int(p["patch_id"]),
                mode=PlacementMode(p["mode"]),
                src=Rect(*p["src"]),
                dst=Rect(*p["dst"]),
                host=int(p["host"]),
                scale=float(p["scale"]),
            )
            for p in data["placements"]
        )
    except (KeyError, TypeError, ValueError) as e:
        raise InputError(f"invalid plan document: {e}") from e
    return CompositionPlan(sub_frames, placements, frame_size, detector_size)


def dumps_json(data: Dict) -> str:
    return json.dumps(round_floats(data), sort_keys=True, indent=2) + "\n"


def write_json(path: PathLike, data: Dict) -> None:
    """Tulis JSON dengan key terurut dan float dibulatkan 6 desimal"""
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    Path(path).write_text(dumps_json(data), encoding="utf-8")


def write_plan(path: PathLike, plan: CompositionPlan) -> None:
    write_json(path, plan_to_dict(plan))
    logger.info(f"Plan with {plan.n_sub_frames} sub-frames written to {path}")


def read_plan(path: PathLike) -> CompositionPlan:
    try:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
    except FileNotFoundError as e:
        raise InputError(f"file not found: {path}") from e
    except json.JSONDecodeError as e:
        raise InputError(f"cannot parse plan {path}: {e}") from e
    return plan_from_dict(data)


def parse_frame_size(text: str) -> tuple:
    """Parse 'WxH' (misal '1280x720')"""
    try:
        width, height = (int(v) for v in text.lower().split("x"))
    except ValueError as e:
        raise InputError(f"frame size must look like WxH, got {text!r}") from e
    if width <= 0 or height <= 0:
        raise InputError(f"frame size must be positive, got {text!r}")
    return (width, height)


def format_ms(seconds: Optional[float]) -> str:
    """
    Format durasi dalam milidetik

    Args:
        seconds: Durasi dalam detik

    Returns:
        String seperti '2.62 ms'
    """
    if seconds is None:
        return "n/a"
    return f"{seconds * 1000:.2f} ms"
