"""
Modul Scaling
Kalibrasi skala perspektif (interpolasi linear tinggi objek terhadap posisi
vertikal) dan kuantisasi ke 1-3 band vertikal.
"""

import logging
from dataclasses import dataclass
from typing import List, Tuple

from errors import ScalingError

logger = logging.getLogger(__name__)

Band = Tuple[float, float, float]  # (y_min, y_max, beta)


@dataclass(frozen=True)
class ScalingProfile:
    """
    Kalibrasi: dua garis referensi (near / far) beserta tinggi orang di
    masing-masing garis, konstanta k_cal, dan band hasil kuantisasi.
    """

    y_ab: float
    y_cd: float
    l_ab: float
    l_cd: float
    k_cal: float
    bands: Tuple[Band, ...] = ()

    def __post_init__(self):
        if self.y_ab == self.y_cd:
            raise ScalingError("y_ab and y_cd must be distinct reference lines")
        if self.l_ab <= 0 or self.l_cd <= 0:
            raise ScalingError("reference heights l_ab and l_cd must be positive")
        if self.k_cal <= 0:
            raise ScalingError("k_cal must be positive")


def beta_continuous(profile: ScalingProfile, y_input: float) -> float:
    """
    Faktor skala kontinu untuk objek di posisi vertikal y_input.
    Boleh ekstrapolasi di luar [y_cd, y_ab].

    Raises:
        ScalingError: jika beta hasil hitung <= 0
    """
    dy = profile.y_ab - profile.y_cd
    slope = (profile.l_ab - profile.l_cd) / dy
    intercept = (profile.y_ab * profile.l_cd - profile.y_cd * profile.l_ab) / dy
    beta = profile.k_cal * (slope * y_input + intercept)
    if beta <= 0:
        raise ScalingError(f"calibration gives beta={beta:.4f} <= 0 at y={y_input}")
    return beta


def build_bands(profile: ScalingProfile, n_bands: int, frame_height: int) -> Tuple[Band, ...]:
    """
    Bagi tinggi frame menjadi n_bands interval sama tinggi; beta tiap band
    diambil dari beta_continuous di titik tengah band.

    Args:
        profile: Profil kalibrasi (bands diabaikan)
        n_bands: 1, 2, atau 3
        frame_height: Tinggi frame dalam pixel

    Returns:
        Tuple (y_min, y_max, beta) yang mempartisi [0, frame_height)
    """
    if n_bands not in (1, 2, 3):
        raise ScalingError(f"n_bands must be 1, 2 or 3, got {n_bands}")
    if frame_height <= 0:
        raise ScalingError("frame_height must be positive")

    step = frame_height / n_bands
    bands = []
    for i in range(n_bands):
        y_min = i * step
        y_max = frame_height if i == n_bands - 1 else (i + 1) * step
        beta = beta_continuous(profile, (y_min + y_max) / 2.0)
        bands.append((y_min, y_max, beta))
    return tuple(bands)


def calibrated_profile(
    y_ab: float,
    y_cd: float,
    l_ab: float,
    l_cd: float,
    k_cal: float,
    n_bands: int,
    frame_height: int,
) -> ScalingProfile:
    """Bangun profil lengkap dengan band-nya"""
    core = ScalingProfile(y_ab=y_ab, y_cd=y_cd, l_ab=l_ab, l_cd=l_cd, k_cal=k_cal)
    bands = build_bands(core, n_bands, frame_height)
    logger.info(f"Scaling bands: {[(round(a), round(b), round(beta, 4)) for a, b, beta in bands]}")
    return ScalingProfile(y_ab=y_ab, y_cd=y_cd, l_ab=l_ab, l_cd=l_cd, k_cal=k_cal, bands=bands)


def default_profile(frame_height: int) -> ScalingProfile:
    """
    Profil tanpa kalibrasi: satu band dengan beta = 1, komposisi menjadi
    packing murni.
    """
    # garis referensi dengan tinggi sama -> beta konstan k_cal * l = 1
    return ScalingProfile(
        y_ab=float(frame_height),
        y_cd=0.0,
        l_ab=1.0,
        l_cd=1.0,
        k_cal=1.0,
        bands=((0.0, float(frame_height), 1.0),),
    )


def beta_for(profile: ScalingProfile, y: float) -> float:
    """Beta dari band yang memuat y (y di luar frame ikut band terdekat)"""
    bands = profile.bands
    if not bands:
        return beta_continuous(profile, y)
    if y < bands[0][0]:
        return bands[0][2]
    for y_min, y_max, beta in bands:
        if y_min <= y < y_max:
            return beta
    return bands[-1][2]


def band_summary(profile: ScalingProfile) -> List[dict]:
    return [{"y_min": a, "y_max": b, "beta": beta} for a, b, beta in profile.bands]
