"""
Modul Objective
Menilai kandidat himpunan sub-frame: term lokasi (psi), term distribusi
patch (phi), term jumlah sub-frame (H), penalty luas (G), dan skor gabungan.
Skor lebih tinggi lebih baik.
"""

import math
from dataclasses import dataclass
from typing import Dict, List, Sequence, Tuple

import numpy as np

from geometry import FrameSize, Patch, Rect, SubFrame, contains, subframe_rect
from scaling import ScalingProfile, beta_for


@dataclass(frozen=True)
class ObjectiveConfig:
    """Konstanta objective; delta harus mendominasi term lain"""

    alpha: float = 1.0
    delta: float = 1e6
    k_count: float = 1.0
    b_count: float = 0.5
    psi_epsilon: float = 1e-9

    def __post_init__(self):
        if self.alpha < 0 or self.delta <= 0 or self.k_count <= 0 or self.b_count < 0 or self.psi_epsilon <= 0:
            raise ValueError(f"invalid objective constants: {self}")


@dataclass(frozen=True)
class CoverageMatrix:
    """cover[i][j] True jika sub-frame j memuat patch i di koordinat original"""

    cover: np.ndarray

    @property
    def covered_any(self) -> np.ndarray:
        if self.cover.shape[1] == 0:
            return np.zeros(self.cover.shape[0], dtype=bool)
        return self.cover.any(axis=1)

    def column(self, j: int) -> np.ndarray:
        return self.cover[:, j]


def coverage(patches: Sequence[Patch], sub_frames: Sequence[SubFrame], frame_size: FrameSize) -> CoverageMatrix:
    matrix = np.zeros((len(patches), len(sub_frames)), dtype=bool)
    for j, f in enumerate(sub_frames):
        rect = subframe_rect(f, frame_size)
        for i, p in enumerate(patches):
            matrix[i, j] = contains(rect, p.rect)
    return CoverageMatrix(matrix)


def _psi_value(a_total: float, a_cov: float, psi_epsilon: float) -> float:
    if a_cov <= 0:
        return 1.0  # ln(e): rasio tak hingga
    ratio = a_total / a_cov
    return math.log(1.0 / max(ratio - 1.0, psi_epsilon) + math.e)


def psi(patches: Sequence[Patch], cov: CoverageMatrix, psi_epsilon: float = 1e-9) -> float:
    """
    Term lokasi: ln(1 / max(A_total / A_cov - 1, eps) + e), luas diskalakan beta.
    Full coverage mengenai guard eps dan memberi reward besar yang finite.
    """
    if not patches:
        raise ValueError("psi needs at least one patch")
    scaled = np.array([p.scaled_area for p in patches], dtype=float)
    a_total = float(scaled.sum())
    a_cov = float(scaled[cov.covered_any].sum())
    return _psi_value(a_total, a_cov, psi_epsilon)


def _phi_value(f_rect: Rect, patches: Sequence[Patch], covered: np.ndarray) -> float:
    fx, fy = f_rect.center
    total = 0.0
    count = 0
    for p, is_covered in zip(patches, covered):
        if not is_covered:
            continue
        px, py = p.rect.center
        total += math.sqrt(abs((px - fx) * (py - fy))) * math.sqrt(p.rect.w * p.rect.h)
        count += 1
    return total / count if count else 0.0


def phi(patches: Sequence[Patch], sub_frame: SubFrame, covered: np.ndarray, frame_size: FrameSize) -> float:
    """
    Term distribusi untuk satu sub-frame: rata-rata sqrt(|dx*dy|)*sqrt(w*h)
    atas patch yang dicakup; patch dekat border memberi nilai besar.
    Lokasi diukur dari pusat patch ke pusat sub-frame (setelah clamp).
    """
    return _phi_value(subframe_rect(sub_frame, frame_size), patches, covered)


def h_count(n_f: int, cfg: ObjectiveConfig) -> float:
    return cfg.k_count * n_f + cfg.b_count


def _subframe_scaled_area(f: SubFrame, frame_size: FrameSize) -> float:
    return subframe_rect(f, frame_size).area * f.beta


def g_penalty(patches: Sequence[Patch], sub_frames: Sequence[SubFrame], frame_size: FrameSize) -> int:
    """0 jika total luas sub-frame (x beta) >= total luas patch (x beta), selain itu 1"""
    frames_area = sum(_subframe_scaled_area(f, frame_size) for f in sub_frames)
    patches_area = sum(p.scaled_area for p in patches)
    return 0 if frames_area >= patches_area else 1


def score(
    patches: Sequence[Patch],
    sub_frames: Sequence[SubFrame],
    cfg: ObjectiveConfig,
    frame_size: FrameSize,
) -> float:
    """
    Skor gabungan (alpha*psi + sum phi) / H(N_F) - delta*G.
    N_F = 0 diperlakukan sebagai kandidat yang terkena penalty.
    """
    if not sub_frames:
        return -cfg.delta
    cov = coverage(patches, sub_frames, frame_size)
    location = psi(patches, cov, cfg.psi_epsilon)
    distribution = sum(phi(patches, f, cov.column(j), frame_size) for j, f in enumerate(sub_frames))
    value = (cfg.alpha * location + distribution) / h_count(len(sub_frames), cfg)
    return value - cfg.delta * g_penalty(patches, sub_frames, frame_size)


@dataclass(frozen=True)
class PositionInfo:
    """Data yang di-cache per posisi grid sub-frame"""

    sub_frame: SubFrame
    rect: Rect
    cover: np.ndarray
    phi: float
    scaled_area: float

    @property
    def covers_any(self) -> bool:
        return bool(self.cover.any())


class ObjectiveEvaluator:
    """
    Evaluasi skor cepat untuk optimizer. Kontribusi setiap posisi (coverage,
    phi, luas) hanya bergantung pada posisi itu sendiri, jadi di-cache;
    hasilnya identik dengan score().
    """

    def __init__(
        self,
        patches: Sequence[Patch],
        cfg: ObjectiveConfig,
        profile: ScalingProfile,
        detector_size: int,
        frame_size: FrameSize,
    ):
        self.patches = list(patches)
        self.cfg = cfg
        self.profile = profile
        self.detector_size = detector_size
        self.frame_size = frame_size

        self._x1 = np.array([p.rect.x for p in self.patches], dtype=float)
        self._y1 = np.array([p.rect.y for p in self.patches], dtype=float)
        self._x2 = np.array([p.rect.x2 for p in self.patches], dtype=float)
        self._y2 = np.array([p.rect.y2 for p in self.patches], dtype=float)
        self._cx = (self._x1 + self._x2) / 2.0
        self._cy = (self._y1 + self._y2) / 2.0
        self._sqrt_area = np.sqrt((self._x2 - self._x1) * (self._y2 - self._y1))
        self._scaled = np.array([p.scaled_area for p in self.patches], dtype=float)
        self.total_scaled_area = float(self._scaled.sum())

        self._positions: Dict[Tuple[float, float], PositionInfo] = {}
        self._scores: Dict[Tuple[Tuple[float, float], ...], float] = {}
        self.evaluations = 0

    def make_sub_frame(self, cx: float, cy: float) -> SubFrame:
        height = self.frame_size[1]
        beta = beta_for(self.profile, min(max(cy, 0.0), height - 1))
        return SubFrame(cx=cx, cy=cy, beta=beta, detector_size=self.detector_size)

    def position(self, cx: float, cy: float) -> PositionInfo:
        key = (cx, cy)
        info = self._positions.get(key)
        if info is not None:
            return info

        f = self.make_sub_frame(cx, cy)
        rect = subframe_rect(f, self.frame_size)
        cover = (
            (rect.x <= self._x1) & (rect.y <= self._y1)
            & (self._x2 <= rect.x2) & (self._y2 <= rect.y2)
        )
        if cover.any():
            fx, fy = rect.center
            terms = np.sqrt(np.abs((self._cx - fx) * (self._cy - fy))) * self._sqrt_area
            phi_value = float(terms[cover].sum() / cover.sum())
        else:
            phi_value = 0.0
        info = PositionInfo(f, rect, cover, phi_value, rect.area * f.beta)
        self._positions[key] = info
        return info

    def score(self, positions: Sequence[Tuple[float, float]]) -> float:
        key = tuple(positions)
        cached = self._scores.get(key)
        if cached is not None:
            return cached

        self.evaluations += 1
        cfg = self.cfg
        if not key:
            value = -cfg.delta
        else:
            infos = [self.position(cx, cy) for cx, cy in key]
            covered = np.zeros(len(self.patches), dtype=bool)
            for info in infos:
                covered |= info.cover
            location = _psi_value(self.total_scaled_area, float(self._scaled[covered].sum()), cfg.psi_epsilon)
            distribution = sum(info.phi for info in infos)
            frames_area = sum(info.scaled_area for info in infos)
            penalty = 0 if frames_area >= self.total_scaled_area else 1
            value = (cfg.alpha * location + distribution) / h_count(len(key), cfg) - cfg.delta * penalty
        self._scores[key] = value
        return value

    def swap_scores(
        self,
        positions: Sequence[Tuple[float, float]],
        index: int,
        options: Sequence[Tuple[float, float]],
    ) -> np.ndarray:
        """
        Skor kandidat bila posisi ke-index diganti tiap opsi, dihitung sekaligus.
        Kontribusi posisi lain cukup dijumlah sekali; hasil bisa berbeda dari
        score() di digit floating point terakhir.
        """
        cfg = self.cfg
        rest = [self.position(cx, cy) for j, (cx, cy) in enumerate(positions) if j != index]
        base = np.zeros(len(self.patches), dtype=bool)
        for info in rest:
            base |= info.cover
        infos = [self.position(cx, cy) for cx, cy in options]
        self.evaluations += len(infos)

        covered = np.stack([info.cover for info in infos]) | base
        covered_area = covered.astype(float) @ self._scaled
        with np.errstate(divide="ignore"):
            excess = np.maximum(self.total_scaled_area / covered_area - 1.0, cfg.psi_epsilon)
        location = np.where(covered_area > 0, np.log(1.0 / excess + math.e), 1.0)
        distribution = sum(info.phi for info in rest) + np.array([info.phi for info in infos])
        frames_area = sum(info.scaled_area for info in rest) + np.array([info.scaled_area for info in infos])
        penalty = np.where(frames_area >= self.total_scaled_area, 0.0, 1.0)
        return (cfg.alpha * location + distribution) / h_count(len(positions), cfg) - cfg.delta * penalty

    def sub_frames(self, positions: Sequence[Tuple[float, float]]) -> List[SubFrame]:
        return [self.position(cx, cy).sub_frame for cx, cy in positions]
