"""Extractor configuration, per-frame extraction and per-video averaging."""

from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass
from typing import Sequence

import numpy as np

from ..errors import ExtractionError
from . import iqm, lbp
from .imaging import CHANNELS, CROP_SIZE, color_channels


@dataclass(frozen=True)
class LBPConfig:
    radius: int = 1
    n_neighbors: int = 8
    uniform: bool = True
    block: int = 16
    stride: int = 8
    channels: tuple[str, ...] = CHANNELS

    extractor_id = "color_lbp"

    def __post_init__(self):
        object.__setattr__(self, "channels", tuple(self.channels))
        bad = set(self.channels) - set(CHANNELS)
        if bad:
            raise ValueError(f"unknown LBP channels {sorted(bad)}; allowed {CHANNELS}")
        if self.block - 2 * self.radius < 1 or self.block > CROP_SIZE or self.stride < 1:
            raise ValueError(f"invalid LBP block geometry block={self.block} stride={self.stride} radius={self.radius}")

    @property
    def dim(self) -> int:
        return (
            len(self.channels)
            * lbp.n_blocks(CROP_SIZE, CROP_SIZE, self.block, self.stride)
            * lbp.n_bins(self.n_neighbors, self.uniform)
        )


@dataclass(frozen=True)
class IQMConfig:
    measures: tuple[str, ...] = iqm.DEFAULT_MEASURES
    sigma: float = 1.0
    kernel: int = 5

    extractor_id = "iqm"

    def __post_init__(self):
        object.__setattr__(self, "measures", tuple(self.measures))
        for m in self.measures:
            iqm.measure_width(m)

    @property
    def dim(self) -> int:
        return sum(iqm.measure_width(m) for m in self.measures)


CONFIG_TYPES = {"color_lbp": LBPConfig, "iqm": IQMConfig}


def make_config(extractor_id: str, params: dict | None = None):
    if extractor_id not in CONFIG_TYPES:
        raise ExtractionError(f"unknown extractor {extractor_id!r} (known: {', '.join(CONFIG_TYPES)})")
    return CONFIG_TYPES[extractor_id](**(params or {}))


def config_hash(cfg) -> str:
    """SHA-256 over the extractor id and canonical JSON of its parameters."""
    doc = {"extractor": cfg.extractor_id, "params": asdict(cfg)}
    blob = json.dumps(doc, sort_keys=True, separators=(",", ":")).encode()
    return hashlib.sha256(blob).hexdigest()


def extract_color_lbp(crop: np.ndarray, cfg: LBPConfig = LBPConfig()) -> np.ndarray:
    """Block LBP histograms of each channel, channels outer, blocks inner."""
    planes = color_channels(crop, cfg.channels)
    parts = [
        lbp.block_histograms(planes[c], cfg.n_neighbors, cfg.radius, cfg.uniform, cfg.block, cfg.stride).ravel()
        for c in cfg.channels
    ]
    return np.concatenate(parts)


def extract_iqm(crop: np.ndarray, cfg: IQMConfig = IQMConfig()) -> np.ndarray:
    return iqm.iqm_vector(crop, cfg.measures, cfg.sigma, cfg.kernel)


def extract_frame(crop: np.ndarray, cfg) -> np.ndarray:
    if isinstance(cfg, LBPConfig):
        vec = extract_color_lbp(crop, cfg)
    elif isinstance(cfg, IQMConfig):
        vec = extract_iqm(crop, cfg)
    else:
        raise ExtractionError(f"unsupported extractor config {type(cfg).__name__}")
    if vec.shape != (cfg.dim,):
        raise ExtractionError(f"{cfg.extractor_id} produced {vec.shape}, expected ({cfg.dim},)")
    if not np.all(np.isfinite(vec)):
        raise ExtractionError(f"{cfg.extractor_id} produced non-finite values")
    return vec


def video_feature(crops: Sequence[np.ndarray], cfg) -> np.ndarray:
    """Element-wise mean of the per-frame feature vectors."""
    if len(crops) == 0:
        raise ExtractionError("cannot build a video feature from zero frames")
    acc = np.zeros(cfg.dim, dtype=np.float64)
    for crop in crops:
        acc += extract_frame(crop, cfg)
    return acc / len(crops)

