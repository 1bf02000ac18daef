"""
Modul Konfigurasi
File config flat `key=value` (dibaca dengan python-dotenv) plus override
environment `POIC_<KEY>`. Semua konstanta objective, GA, ekstraksi, pipeline
dan kalibrasi ada di sini.
"""

import logging
import os
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Callable, Dict, Optional, Tuple, Union

from dotenv import dotenv_values

from errors import InputError
from extraction import ExtractionConfig
from objective import ObjectiveConfig
from optimizer import GaConfig
from pipeline import PipelineConfig
from scaling import ScalingProfile, calibrated_profile, default_profile

logger = logging.getLogger(__name__)

ENV_PREFIX = "POIC_"
CALIBRATION_KEYS = ("y_ab", "y_cd", "l_ab", "l_cd", "k_cal")


def _parse_bool(text: str) -> bool:
    value = text.strip().lower()
    if value in ("1", "true", "yes", "on"):
        return True
    if value in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _parse_int(text: str) -> int:
    return int(text.strip())


def _parse_float(text: str) -> float:
    return float(text.strip())


# key -> (parser, default, keterangan); urutan ini juga urutan --print-default-config
KEYS: Dict[str, Tuple[Callable[[str], object], object, str]] = {
    "alpha": (_parse_float, 1.0, "weight of the location term"),
    "delta": (_parse_float, 1e6, "penalty weight for insufficient sub-frame area"),
    "k_count": (_parse_float, 1.0, "slope of the sub-frame count term"),
    "b_count": (_parse_float, 0.5, "offset of the sub-frame count term"),
    "psi_epsilon": (_parse_float, 1e-9, "guard for full coverage in the location term"),
    "alpha3": (_parse_float, 2.0, "population size constant"),
    "grid_stride": (_parse_int, 16, "sub-frame center grid stride, pixels"),
    "tournament_size": (_parse_int, 2, "tournament selection size"),
    "crossover_rate": (_parse_float, 0.8, "one-point crossover probability"),
    "mutation_rate": (_parse_float, 0.2, "per-gene mutation probability"),
    "elite_count": (_parse_int, 1, "candidates copied unchanged each generation"),
    "patience": (_parse_int, 4, "generations without improvement before stopping"),
    "max_generations": (_parse_int, 200, "hard generation cap"),
    "local_search_radius": (_parse_int, 8, "local search step, pixels"),
    "local_search_top_fraction": (_parse_float, 0.25, "fraction of the population refined by local search"),
    "n_r": (_parse_int, 10, "blank rectangles kept per sub-frame"),
    "max_verification_retries": (_parse_int, 3, "bound increments before the tiling fallback"),
    "rng_seed": (_parse_int, 0, "random seed"),
    "prune_redundant": (_parse_bool, True, "drop sub-frames that are not needed after verification"),
    "detector_size": (_parse_int, 300, "detector input side, pixels"),
    "window_size": (_parse_int, 0, "composition canvas side (0 = detector_size)"),
    "frame_width": (_parse_int, 1280, "frame width for patch-only commands"),
    "frame_height": (_parse_int, 720, "frame height for patch-only commands"),
    "margin": (_parse_int, 3, "blank border added around each patch"),
    "min_component_area": (_parse_int, 16, "smallest foreground component, pixels"),
    "open_iterations": (_parse_int, 1, "morphological opening iterations"),
    "close_iterations": (_parse_int, 1, "morphological closing iterations"),
    "diff_threshold": (_parse_int, 25, "frame differencing threshold, 0..255"),
    "iou_threshold": (_parse_float, 0.5, "IoU for duplicate suppression and evaluation"),
    "interpolation": (str, "nearest", "resize interpolation: nearest or bilinear"),
    "detector_timeout": (_parse_float, 10.0, "seconds to wait for a detector response line"),
    "detector_pool": (_parse_int, 1, "number of detector child processes"),
    "y_ab": (_parse_float, None, "near reference line y (calibration)"),
    "y_cd": (_parse_float, None, "far reference line y (calibration)"),
    "l_ab": (_parse_float, None, "person height at the near line"),
    "l_cd": (_parse_float, None, "person height at the far line"),
    "k_cal": (_parse_float, None, "calibration constant"),
    "n_bands": (_parse_int, 1, "number of scaling bands (1-3)"),
}


@dataclass(frozen=True)
class EngineConfig:
    objective: ObjectiveConfig
    ga: GaConfig
    extraction: ExtractionConfig
    pipeline: PipelineConfig
    frame_size: Tuple[int, int]
    calibration: Optional[Tuple[float, float, float, float, float]] = None
    n_bands: int = 1

    def profile(self, frame_height: Optional[int] = None) -> ScalingProfile:
        """Profil scaling untuk tinggi frame ini (tanpa kalibrasi: beta = 1)"""
        height = frame_height or self.frame_size[1]
        if self.calibration is None:
            return default_profile(height)
        y_ab, y_cd, l_ab, l_cd, k_cal = self.calibration
        return calibrated_profile(y_ab, y_cd, l_ab, l_cd, k_cal, self.n_bands, height)

    def with_seed(self, seed: Optional[int]) -> "EngineConfig":
        if seed is None:
            return self
        return replace(self, ga=replace(self.ga, rng_seed=seed))


def _raw_values(path: Optional[Union[str, Path]], environ: Optional[Dict[str, str]]) -> Dict[str, str]:
    values: Dict[str, str] = {}
    if path is not None:
        path = Path(path)
        if not path.is_file():
            raise InputError(f"config file not found: {path}")
        for key, value in dotenv_values(path).items():
            key = key.strip().lower()
            if key not in KEYS:
                raise InputError(f"{path}: unknown config key {key!r}")
            if value is None or value.strip() == "":
                raise InputError(f"{path}: missing value for {key!r}")
            values[key] = value

    environ = os.environ if environ is None else environ
    for key in KEYS:
        override = environ.get(f"{ENV_PREFIX}{key.upper()}")
        if override is not None and override.strip() != "":
            logger.debug(f"Config {key} overridden from environment")
            values[key] = override
    return values


def load_config(path: Optional[Union[str, Path]] = None, environ: Optional[Dict[str, str]] = None) -> EngineConfig:
    """
    Muat config dari file (opsional) dan environment.

    Args:
        path: File `key=value`; None berarti hanya default + environment
        environ: Mapping environment (default os.environ)

    Returns:
        EngineConfig

    Raises:
        InputError: key tidak dikenal, nilai tidak valid, kalibrasi tidak lengkap
    """
    raw = _raw_values(path, environ)
    v: Dict[str, object] = {}
    for key, (parser, default, _) in KEYS.items():
        if key in raw:
            try:
                v[key] = parser(raw[key])
            except ValueError as e:
                raise InputError(f"invalid value for {key}: {raw[key]!r} ({e})") from e
        else:
            v[key] = default

    calibration_values = [v[k] for k in CALIBRATION_KEYS]
    if all(x is None for x in calibration_values):
        calibration = None
    elif any(x is None for x in calibration_values):
        missing = [k for k in CALIBRATION_KEYS if v[k] is None]
        raise InputError(f"incomplete calibration, missing {missing}")
    else:
        calibration = tuple(calibration_values)

    try:
        cfg = EngineConfig(
            objective=ObjectiveConfig(
                alpha=v["alpha"], delta=v["delta"], k_count=v["k_count"],
                b_count=v["b_count"], psi_epsilon=v["psi_epsilon"],
            ),
            ga=GaConfig(
                alpha3=v["alpha3"], grid_stride=v["grid_stride"], tournament_size=v["tournament_size"],
                crossover_rate=v["crossover_rate"], mutation_rate=v["mutation_rate"],
                elite_count=v["elite_count"], patience=v["patience"], max_generations=v["max_generations"],
                local_search_radius=v["local_search_radius"],
                local_search_top_fraction=v["local_search_top_fraction"], n_r=v["n_r"],
                max_verification_retries=v["max_verification_retries"], rng_seed=v["rng_seed"],
                prune_redundant=v["prune_redundant"],
            ),
            extraction=ExtractionConfig(
                margin=v["margin"], min_component_area=v["min_component_area"],
                open_iterations=v["open_iterations"], close_iterations=v["close_iterations"],
                diff_threshold=v["diff_threshold"],
            ),
            pipeline=PipelineConfig(
                detector_size=v["detector_size"], window_size=v["window_size"],
                iou_threshold=v["iou_threshold"], interpolation=v["interpolation"],
                detector_timeout=v["detector_timeout"], detector_pool=v["detector_pool"],
            ),
            frame_size=(v["frame_width"], v["frame_height"]),
            calibration=calibration,
            n_bands=v["n_bands"],
        )
    except ValueError as e:
        raise InputError(f"invalid configuration: {e}") from e

    if cfg.frame_size[0] <= 0 or cfg.frame_size[1] <= 0:
        raise InputError("frame_width and frame_height must be positive")
    if cfg.pipeline.detector_size <= 0:
        raise InputError("detector_size must be positive")
    if cfg.n_bands not in (1, 2, 3):
        raise InputError(f"n_bands must be 1, 2 or 3, got {cfg.n_bands}")
    if not 0 <= cfg.extraction.diff_threshold <= 255:
        raise InputError("diff_threshold must be in 0..255")
    if min(cfg.extraction.margin, cfg.extraction.open_iterations, cfg.extraction.close_iterations) < 0:
        raise InputError("margin and morphology iterations must be >= 0")
    return cfg


def _format_default(value: object) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    return str(value)


def default_config_text() -> str:
    """Isi file config dengan semua default terdokumentasi"""
    lines = ["# patch-of-interest composition engine configuration", ""]
    for key, (_, default, doc) in KEYS.items():
        lines.append(f"# {doc}")
        if default is None:
            lines.append(f"# {key}=")
        else:
            lines.append(f"{key}={_format_default(default)}")
    return "\n".join(lines) + "\n"
