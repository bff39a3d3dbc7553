from .cache import FeatureCache
from .extract import (
    IQMConfig,
    LBPConfig,
    config_hash,
    extract_color_lbp,
    extract_frame,
    extract_iqm,
    make_config,
    video_feature,
)
from .imaging import crop_face, load_frame

__all__ = [
    "FeatureCache",
    "IQMConfig",
    "LBPConfig",
    "config_hash",
    "crop_face",
    "extract_color_lbp",
    "extract_frame",
    "extract_iqm",
    "load_frame",
    "make_config",
    "video_feature",
]
