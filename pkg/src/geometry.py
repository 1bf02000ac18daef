"""
Modul Geometri
Konvensi koordinat, aritmetika rectangle, dan tipe domain bersama
(Patch, SubFrame, Placement, CompositionPlan).

Koordinat: origin kiri-atas, y bertambah ke bawah. Ruang original memakai
pixel integer; ruang detector boleh real setelah scaling.
"""

import math
from dataclasses import dataclass
from enum import Enum
from typing import Iterable, List, Optional, Sequence, Tuple

from errors import UnmappableBoxError

FrameSize = Tuple[int, int]


def round_half_up(value: float) -> int:
    """Pembulatan half-up (2.5 -> 3), bukan banker's rounding bawaan Python"""
    return int(math.floor(value + 0.5))


@dataclass(frozen=True)
class Rect:
    """Axis-aligned rectangle (x, y = tepi kiri/atas)"""

    x: float
    y: float
    w: float
    h: float

    def __post_init__(self):
        if self.w <= 0 or self.h <= 0:
            raise ValueError(f"Rect needs positive size, got {self.w}x{self.h}")

    @property
    def x2(self) -> float:
        return self.x + self.w

    @property
    def y2(self) -> float:
        return self.y + self.h

    @property
    def area(self) -> float:
        return self.w * self.h

    @property
    def center(self) -> Tuple[float, float]:
        return (self.x + self.w / 2.0, self.y + self.h / 2.0)

    def contains_point(self, px: float, py: float) -> bool:
        return self.x <= px <= self.x2 and self.y <= py <= self.y2

    def intersection_area(self, other: "Rect") -> float:
        iw = min(self.x2, other.x2) - max(self.x, other.x)
        ih = min(self.y2, other.y2) - max(self.y, other.y)
        if iw <= 0 or ih <= 0:
            return 0.0
        return iw * ih

    def intersects(self, other: "Rect") -> bool:
        """True jika interior beririsan (sisi yang hanya bersentuhan tidak dihitung)"""
        return self.intersection_area(other) > 0

    def iou(self, other: "Rect") -> float:
        inter = self.intersection_area(other)
        if inter <= 0:
            return 0.0
        return inter / (self.area + other.area - inter)

    def union(self, other: "Rect") -> "Rect":
        x = min(self.x, other.x)
        y = min(self.y, other.y)
        return Rect(x, y, max(self.x2, other.x2) - x, max(self.y2, other.y2) - y)

    def expand(self, margin: float) -> "Rect":
        return Rect(self.x - margin, self.y - margin, self.w + 2 * margin, self.h + 2 * margin)

    def clamp_to(self, frame_size: FrameSize) -> "Rect":
        """Potong rectangle ke batas frame"""
        width, height = frame_size
        x = max(0, self.x)
        y = max(0, self.y)
        return Rect(x, y, min(width, self.x2) - x, min(height, self.y2) - y)

    def as_list(self) -> List[float]:
        return [self.x, self.y, self.w, self.h]


def contains(outer: Rect, inner: Rect) -> bool:
    """
    Closed containment: tepi yang bersentuhan tetap dihitung.

    Args:
        outer: Rectangle luar
        inner: Rectangle yang diuji

    Returns:
        True jika inner seluruhnya berada di dalam outer
    """
    return (
        outer.x <= inner.x
        and outer.y <= inner.y
        and inner.x2 <= outer.x2
        and inner.y2 <= outer.y2
    )


@dataclass(frozen=True)
class Patch:
    """Patch-of-interest di koordinat frame original (margin sudah termasuk)"""

    id: int
    rect: Rect
    beta: float = 1.0

    def __post_init__(self):
        if self.beta <= 0:
            raise ValueError(f"Patch {self.id} needs beta > 0, got {self.beta}")

    @property
    def scaled_area(self) -> float:
        return self.rect.w * self.rect.h * self.beta

    @property
    def footprint(self) -> Tuple[float, float]:
        """Ukuran patch di ruang detector (ukuran original x beta)"""
        return (self.rect.w * self.beta, self.rect.h * self.beta)


@dataclass(frozen=True)
class SubFrame:
    """Jendela detector: pusat di koordinat original, sisi = detector_size / beta"""

    cx: float
    cy: float
    beta: float
    detector_size: int = 300

    def __post_init__(self):
        if self.beta <= 0 or self.detector_size <= 0:
            raise ValueError("SubFrame needs beta > 0 and detector_size > 0")

    @property
    def side(self) -> int:
        """Sisi nominal di ruang original, dibulatkan ke pixel"""
        return max(1, round_half_up(self.detector_size / self.beta))

    @property
    def scale(self) -> float:
        """Faktor crop+scale original -> detector (extent detector tepat detector_size)"""
        return self.detector_size / self.side


def subframe_rect(f: SubFrame, frame_size: FrameSize) -> Rect:
    """
    Extent sub-frame di koordinat original, di-clamp ke batas frame.
    Clamping menggeser pusat, tidak pernah memperkecil sisi (kecuali frame
    sendiri lebih kecil dari sisi nominal).

    Args:
        f: SubFrame
        frame_size: (W, H) frame original

    Returns:
        Rect integer di dalam frame
    """
    width, height = frame_size
    side = f.side
    w = min(side, width)
    h = min(side, height)
    x = round_half_up(f.cx - side / 2.0)
    y = round_half_up(f.cy - side / 2.0)
    x = min(max(x, 0), width - w)
    y = min(max(y, 0), height - h)
    return Rect(x, y, w, h)


def original_to_subframe(f: SubFrame, frame_size: FrameSize, box: Rect) -> Rect:
    """Crop+scale sebuah box original ke ruang detector sub-frame"""
    r = subframe_rect(f, frame_size)
    s = f.scale
    return Rect((box.x - r.x) * s, (box.y - r.y) * s, box.w * s, box.h * s)


def subframe_to_original(f: SubFrame, frame_size: FrameSize, box: Rect) -> Rect:
    """Invers dari original_to_subframe"""
    r = subframe_rect(f, frame_size)
    s = f.scale
    return Rect(r.x + box.x / s, r.y + box.y / s, box.w / s, box.h / s)


def in_situ_area(f: SubFrame, frame_size: FrameSize) -> Rect:
    """Bagian canvas detector yang berisi konten crop (sisanya abu-abu)"""
    r = subframe_rect(f, frame_size)
    return Rect(0.0, 0.0, r.w * f.scale, r.h * f.scale)


class PlacementMode(str, Enum):
    IN_SITU = "in_situ"
    RELOCATED = "relocated"


@dataclass(frozen=True)
class Placement:
    """
    Penempatan satu patch: in situ (tercakup crop host) atau dipindahkan
    ke blank rectangle host. Transform src -> dst adalah affine crop+scale.
    """

    patch_id: int
    mode: PlacementMode
    src: Rect
    dst: Rect
    host: int
    scale: float


def forward_map(p: Placement, box: Rect) -> Rect:
    """
    Petakan box original ke koordinat detector host.

    Args:
        p: Placement
        box: Box di koordinat original

    Returns:
        Box di koordinat detector
    """
    return Rect(
        p.dst.x + (box.x - p.src.x) * p.scale,
        p.dst.y + (box.y - p.src.y) * p.scale,
        box.w * p.scale,
        box.h * p.scale,
    )


def inverse_map(p: Placement, box: Rect) -> Rect:
    """
    Petakan box detector kembali ke koordinat original.

    Raises:
        UnmappableBoxError: jika pusat box tidak berada di dalam p.dst
    """
    cx, cy = box.center
    if not p.dst.contains_point(cx, cy):
        raise UnmappableBoxError(
            f"box center ({cx:.1f}, {cy:.1f}) outside placement of patch {p.patch_id}"
        )
    return Rect(
        p.src.x + (box.x - p.dst.x) / p.scale,
        p.src.y + (box.y - p.dst.y) / p.scale,
        box.w / p.scale,
        box.h / p.scale,
    )


@dataclass(frozen=True)
class CompositionPlan:
    """Himpunan sub-frame final plus placement setiap patch"""

    sub_frames: Tuple[SubFrame, ...]
    placements: Tuple[Placement, ...]
    frame_size: FrameSize
    detector_size: int = 300

    @property
    def n_sub_frames(self) -> int:
        return len(self.sub_frames)

    def rect_of(self, index: int) -> Rect:
        return subframe_rect(self.sub_frames[index], self.frame_size)

    def placements_for(self, host: int) -> List[Placement]:
        return [p for p in self.placements if p.host == host]

    def placement_of(self, patch_id: int) -> Optional[Placement]:
        for p in self.placements:
            if p.patch_id == patch_id:
                return p
        return None

    def covers_exactly(self, patch_ids: Iterable[int]) -> bool:
        """Setiap patch id muncul tepat sekali di placements"""
        placed = sorted(p.patch_id for p in self.placements)
        return placed == sorted(patch_ids)


def empty_plan(frame_size: FrameSize, detector_size: int = 300) -> CompositionPlan:
    return CompositionPlan(sub_frames=(), placements=(), frame_size=frame_size, detector_size=detector_size)


def in_situ_placement(patch: Patch, host: int, f: SubFrame, frame_size: FrameSize) -> Placement:
    """Placement in situ: dst adalah image tepat dari src di bawah transform host"""
    return Placement(
        patch_id=patch.id,
        mode=PlacementMode.IN_SITU,
        src=patch.rect,
        dst=original_to_subframe(f, frame_size, patch.rect),
        host=host,
        scale=f.scale,
    )


def relocated_placement(patch: Patch, host: int, x: float, y: float) -> Placement:
    """Placement relocated di (x, y) canvas host dengan skala beta patch sendiri"""
    fw, fh = patch.footprint
    return Placement(
        patch_id=patch.id,
        mode=PlacementMode.RELOCATED,
        src=patch.rect,
        dst=Rect(x, y, fw, fh),
        host=host,
        scale=patch.beta,
    )


def frame_rect(frame_size: FrameSize) -> Rect:
    return Rect(0, 0, frame_size[0], frame_size[1])


def total_scaled_area(patches: Sequence[Patch]) -> float:
    return sum(p.scaled_area for p in patches)


def crop_transform_inverse(f: SubFrame, frame_size: FrameSize, box: Rect) -> Rect:
    """
    Petakan box yang jatuh di area in situ sub-frame (bukan di placement
    manapun) kembali ke koordinat original lewat transform crop sub-frame.

    Raises:
        UnmappableBoxError: jika pusat box berada di luar konten crop
    """
    cx, cy = box.center
    if not in_situ_area(f, frame_size).contains_point(cx, cy):
        raise UnmappableBoxError(f"box center ({cx:.1f}, {cy:.1f}) outside crop content")
    return subframe_to_original(f, frame_size, box)


@dataclass(frozen=True)
class DetectionBox:
    """Hasil deteksi; sub_frame None berarti koordinat original"""

    label: str
    score: float
    rect: Rect
    sub_frame: Optional[int] = None

    def __post_init__(self):
        if not 0.0 <= self.score <= 1.0:
            raise ValueError(f"detection score must be in [0, 1], got {self.score}")

    def moved(self, rect: Rect, sub_frame: Optional[int] = None) -> "DetectionBox":
        return DetectionBox(self.label, self.score, rect, sub_frame)
