"""
Modul Ekstraksi Patch
Mask foreground (atau frame differencing) -> morfologi -> komponen
terhubung -> patch dengan margin dan faktor skala.
"""

import logging
from dataclasses import dataclass
from typing import List, Optional, Sequence

import numpy as np
from scipy import ndimage

from errors import InputError
from geometry import FrameSize, Patch, Rect
from scaling import ScalingProfile, beta_for

logger = logging.getLogger(__name__)

# 3x3 box structuring element, juga dipakai sebagai 8-connectivity
BOX_3X3 = np.ones((3, 3), dtype=bool)


@dataclass(frozen=True)
class ExtractionConfig:
    margin: int = 3
    min_component_area: int = 16
    open_iterations: int = 1
    close_iterations: int = 1
    diff_threshold: int = 25


def to_grayscale(raster: np.ndarray) -> np.ndarray:
    """Raster RGB -> grayscale (rata-rata channel); raster 2D dikembalikan apa adanya"""
    if raster.ndim == 2:
        return raster
    if raster.ndim == 3:
        return np.rint(raster[..., :3].mean(axis=2)).astype(np.uint8)
    raise InputError(f"unsupported raster shape {raster.shape}")


def frame_difference(frame_a: np.ndarray, frame_b: np.ndarray, threshold: int) -> np.ndarray:
    """
    Mask foreground dari selisih absolut dua frame.

    Args:
        frame_a: Raster grayscale (atau RGB, dikonversi)
        frame_b: Raster dengan dimensi sama
        threshold: 0..255, pixel foreground jika |a - b| >= threshold

    Returns:
        Mask boolean 2D
    """
    a = to_grayscale(frame_a)
    b = to_grayscale(frame_b)
    if a.shape != b.shape:
        raise InputError(f"frame dimension mismatch: {a.shape} vs {b.shape}")
    diff = np.abs(a.astype(np.int16) - b.astype(np.int16))
    return diff >= threshold


def morphological_filter(mask: np.ndarray, open_iterations: int, close_iterations: int) -> np.ndarray:
    """
    Opening (erode lalu dilate) kemudian closing (dilate lalu erode) dengan
    elemen 3x3, masing-masing sebanyak iterasi yang diberikan.
    """
    out = np.asarray(mask, dtype=bool)
    # scipy memperlakukan iterations=0 sebagai "ulang sampai konvergen"
    if open_iterations > 0:
        out = ndimage.binary_opening(out, structure=BOX_3X3, iterations=open_iterations)
    if close_iterations > 0:
        pad = close_iterations + 1
        padded = np.pad(out, pad, mode="constant", constant_values=False)
        closed = ndimage.binary_closing(padded, structure=BOX_3X3, iterations=close_iterations)
        out = closed[pad:-pad, pad:-pad]
    return out


def connected_components(mask: np.ndarray, min_component_area: int = 1) -> List[Rect]:
    """
    Label komponen 8-connected dan kembalikan bounding box ketatnya.

    Args:
        mask: Mask boolean 2D
        min_component_area: Jumlah pixel minimum sebuah komponen

    Returns:
        List Rect, terurut row-major berdasarkan pojok kiri-atas
    """
    labels, n_labels = ndimage.label(np.asarray(mask, dtype=bool), structure=BOX_3X3)
    if n_labels == 0:
        return []

    counts = np.bincount(labels.ravel())
    boxes = []
    for label, slices in enumerate(ndimage.find_objects(labels), start=1):
        if slices is None or counts[label] < min_component_area:
            continue
        rows, cols = slices
        boxes.append(Rect(int(cols.start), int(rows.start), int(cols.stop - cols.start), int(rows.stop - rows.start)))

    boxes.sort(key=lambda r: (r.y, r.x, r.h, r.w))
    return boxes


def _merge_overlapping(rects: List[Rect]) -> List[Rect]:
    """Gabungkan (union bbox) rectangle yang beririsan sampai tidak ada lagi"""
    rects = list(rects)
    merged = True
    while merged:
        merged = False
        for i in range(len(rects)):
            for j in range(i + 1, len(rects)):
                if rects[i].intersects(rects[j]):
                    rects[i] = rects[i].union(rects[j])
                    del rects[j]
                    merged = True
                    break
            if merged:
                break
    return rects


def make_patches(
    boxes: Sequence[Rect],
    profile: ScalingProfile,
    frame_size: FrameSize,
    margin: int = 3,
) -> List[Patch]:
    """
    Expand setiap box dengan margin, clamp ke frame, gabungkan yang overlap,
    lalu beri id berurutan dan beta dari band di pusat vertikalnya.

    Args:
        boxes: Bounding box komponen
        profile: Profil scaling
        frame_size: (W, H)
        margin: Lebar blank border tiap patch (default 3 pixel)

    Returns:
        List Patch yang deterministik
    """
    if margin < 0:
        raise InputError(f"margin must be >= 0, got {margin}")

    expanded = [b.expand(margin).clamp_to(frame_size) for b in boxes]
    merged = _merge_overlapping(expanded)
    merged.sort(key=lambda r: (r.y, r.x, r.h, r.w))

    patches = []
    for idx, rect in enumerate(merged):
        rect = Rect(int(rect.x), int(rect.y), int(rect.w), int(rect.h))
        patches.append(Patch(id=idx, rect=rect, beta=beta_for(profile, rect.center[1])))
    return patches


def extract_patches(
    mask: np.ndarray,
    profile: ScalingProfile,
    cfg: ExtractionConfig,
    frame_size: Optional[FrameSize] = None,
) -> List[Patch]:
    """Pipeline ekstraksi lengkap dari mask mentah"""
    if frame_size is None:
        frame_size = (mask.shape[1], mask.shape[0])
    elif (mask.shape[1], mask.shape[0]) != tuple(frame_size):
        raise InputError(f"mask is {mask.shape[1]}x{mask.shape[0]}, frame is {frame_size[0]}x{frame_size[1]}")

    filtered = morphological_filter(mask, cfg.open_iterations, cfg.close_iterations)
    boxes = connected_components(filtered, cfg.min_component_area)
    patches = make_patches(boxes, profile, frame_size, cfg.margin)
    logger.debug(f"Extracted {len(boxes)} components -> {len(patches)} patches")
    return patches
