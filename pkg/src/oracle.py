"""
Modul Oracle
Brute force jumlah sub-frame minimum untuk instance kecil (beta = 1).
Feasibility diuji dengan verify_and_relocate yang sama dengan optimizer.
"""

import logging
import math
from dataclasses import dataclass
from itertools import combinations_with_replacement
from typing import List, Optional, Sequence

from errors import InputError, OracleTooLargeError, VerificationFailure
from geometry import CompositionPlan, FrameSize, Patch, SubFrame, empty_plan, subframe_rect, total_scaled_area
from optimizer import grid_centers, validate_patches, verify_and_relocate

logger = logging.getLogger(__name__)

MAX_COMBINATIONS = 10 ** 7


@dataclass(frozen=True)
class OracleResult:
    n_min: int
    plan: CompositionPlan


def _distinct_sub_frames(frame_size: FrameSize, detector_size: int, grid_stride: int) -> List[SubFrame]:
    """Satu sub-frame per rectangle berbeda di grid (posisi yang ter-clamp sama dibuang)"""
    xs, ys = grid_centers(frame_size, grid_stride)
    seen = set()
    frames = []
    for cy in ys:
        for cx in xs:
            f = SubFrame(cx=cx, cy=cy, beta=1.0, detector_size=detector_size)
            rect = subframe_rect(f, frame_size)
            if rect in seen:
                continue
            seen.add(rect)
            frames.append(f)
    return frames


def brute_force_min_subframes(
    patches: Sequence[Patch],
    detector_size: int,
    frame_size: FrameSize,
    grid_stride: int,
    n_r: int = 10,
    max_sub_frames: Optional[int] = None,
) -> OracleResult:
    """
    Cari n terkecil sehingga ada kombinasi n sub-frame di grid yang lolos
    verifikasi, beserta satu witness.

    Args:
        patches: Patch dengan beta = 1
        detector_size: Sisi sub-frame
        frame_size: (W, H)
        grid_stride: Stride grid posisi pusat
        n_r: Jumlah blank rectangle per sub-frame
        max_sub_frames: Batas atas n (default: jumlah patch)

    Raises:
        InputError: jika ada patch dengan beta != 1, id ganda, atau di luar frame
        OracleTooLargeError: jika jumlah kombinasi > 10^7
    """
    frame_size = tuple(frame_size)
    if any(p.beta != 1.0 for p in patches):
        raise InputError("oracle supports beta = 1 instances only")
    if not patches:
        return OracleResult(0, empty_plan(frame_size, detector_size))
    validate_patches(patches, frame_size)

    # urutan input tidak mempengaruhi hasil
    patches = sorted(patches, key=lambda p: p.id)
    frames = _distinct_sub_frames(frame_size, detector_size, grid_stride)
    limit = max_sub_frames or len(patches)
    area = total_scaled_area(patches)

    for n in range(1, limit + 1):
        if n * detector_size * detector_size < area:
            continue
        if math.comb(len(frames) + n - 1, n) > MAX_COMBINATIONS:
            raise OracleTooLargeError(
                f"instance too large for oracle: {len(frames)} positions, n={n}"
            )
        for combo in combinations_with_replacement(range(len(frames)), n):
            try:
                plan = verify_and_relocate([frames[i] for i in combo], patches, n_r, frame_size, detector_size)
            except VerificationFailure:
                continue
            logger.debug(f"Oracle found feasible set of {n} sub-frames: {combo}")
            return OracleResult(n, plan)

    raise OracleTooLargeError(f"instance too large for oracle: no feasible set with <= {limit} sub-frames")
