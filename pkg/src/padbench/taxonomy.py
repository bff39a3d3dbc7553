"""Common categorization vocabulary and the numeric rules behind it.

Categories serialize as lowercase snake-case strings, ``kind/subtype`` for the
two-level ones (``"mask/rigid"``, ``"mobile_tablet/high"``).
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Optional

from .errors import InvalidAnnotationError, InvalidMetadataError

PRINT_LOW_MAX_DPI = 600
PRINT_MEDIUM_MAX_DPI = 1000
REPLAY_LOW_MAX_RES = 480
REPLAY_HIGH_MIN_RES = 1080
FACE_SMALL_MAX_IOD = 120.0
FACE_MEDIUM_MAX_IOD = 240.0


class Label(str, enum.Enum):
    BONA_FIDE = "bona_fide"
    ATTACK = "attack"


class PaiKind(str, enum.Enum):
    NONE = "none"
    PRINT = "print"
    REPLAY = "replay"
    MASK = "mask"


class QualityTier(str, enum.Enum):
    LOW = "low"
    MEDIUM = "medium"
    HIGH = "high"


class MaskMaterial(str, enum.Enum):
    PAPER = "paper"
    RIGID = "rigid"
    SILICONE = "silicone"


class DeviceKind(str, enum.Enum):
    WEBCAM = "webcam"
    MOBILE_TABLET = "mobile_tablet"
    DIGITAL_CAMERA = "digital_camera"


class DeviceQuality(str, enum.Enum):
    LOW = "low"  # SD
    HIGH = "high"  # HD


class Lighting(str, enum.Enum):
    CONTROLLED = "controlled"
    ADVERSE = "adverse"
    NO_INFO = "no_info"


class FaceResolution(str, enum.Enum):
    SMALL = "small"
    MEDIUM = "medium"
    LARGE = "large"


ATTACK_KINDS = (PaiKind.PRINT, PaiKind.REPLAY, PaiKind.MASK)


def _subtype_domain(kind: PaiKind):
    if kind is PaiKind.NONE:
        return None
    if kind is PaiKind.MASK:
        return MaskMaterial
    return QualityTier


@dataclass(frozen=True, order=True)
class PaiCategory:
    kind: PaiKind
    subtype: Optional[str] = None

    def __post_init__(self):
        domain = _subtype_domain(self.kind)
        if domain is None:
            if self.subtype is not None:
                raise InvalidMetadataError(f"bona fide PAI cannot have subtype {self.subtype!r}")
            return
        values = {m.value for m in domain}
        if self.subtype not in values:
            raise InvalidMetadataError(
                f"PAI subtype {self.subtype!r} invalid for {self.kind.value}; expected one of {sorted(values)}"
            )

    @property
    def is_attack(self) -> bool:
        return self.kind is not PaiKind.NONE

    def __str__(self) -> str:
        return self.kind.value if self.subtype is None else f"{self.kind.value}/{self.subtype}"

    @classmethod
    def parse(cls, text: str) -> "PaiCategory":
        kind, _, subtype = text.partition("/")
        return cls(parse_enum(PaiKind, kind, "pai_kind"), subtype or None)


BONA_FIDE_PAI = PaiCategory(PaiKind.NONE)


@dataclass(frozen=True, order=True)
class CaptureDeviceCategory:
    kind: DeviceKind
    quality: DeviceQuality

    def __str__(self) -> str:
        return f"{self.kind.value}/{self.quality.value}"

    @classmethod
    def parse(cls, text: str) -> "CaptureDeviceCategory":
        kind, _, quality = text.partition("/")
        return cls(parse_enum(DeviceKind, kind, "device_kind"), parse_enum(DeviceQuality, quality, "device_quality"))


def parse_enum(enum_cls, value, field_name: str):
    """Parse a snake-case category string, raising ``InvalidMetadataError``."""
    if isinstance(value, enum_cls):
        return value
    try:
        return enum_cls(value)
    except ValueError:
        allowed = ", ".join(m.value for m in enum_cls)
        raise InvalidMetadataError(f"unknown {field_name} {value!r} (allowed: {allowed})") from None


def parse_lighting(value: Optional[str]) -> Lighting:
    # unknown lighting is recorded as no_info, never guessed
    if value is None or value == "":
        return Lighting.NO_INFO
    return parse_enum(Lighting, value, "lighting")


def _check_positive(value, what, exc):
    if isinstance(value, bool) or not value > 0:
        raise exc(f"{what} must be positive, got {value!r}")


def categorize_print(dpi: int) -> QualityTier:
    """Print attack quality from printer resolution in dots per inch."""
    _check_positive(dpi, "print dpi", InvalidMetadataError)
    if dpi <= PRINT_LOW_MAX_DPI:
        return QualityTier.LOW
    if dpi <= PRINT_MEDIUM_MAX_DPI:
        return QualityTier.MEDIUM
    return QualityTier.HIGH


def categorize_replay(screen_resolution: int) -> QualityTier:
    """Replay attack quality from the smaller display dimension in pixels."""
    _check_positive(screen_resolution, "screen resolution", InvalidMetadataError)
    if screen_resolution <= REPLAY_LOW_MAX_RES:
        return QualityTier.LOW
    if screen_resolution < REPLAY_HIGH_MIN_RES:
        return QualityTier.MEDIUM
    return QualityTier.HIGH


def categorize_face_resolution(mean_iod: float) -> FaceResolution:
    """Face size bucket from the mean interocular distance in pixels."""
    _check_positive(mean_iod, "mean IOD", InvalidAnnotationError)
    if mean_iod <= FACE_SMALL_MAX_IOD:
        return FaceResolution.SMALL
    if mean_iod <= FACE_MEDIUM_MAX_IOD:
        return FaceResolution.MEDIUM
    return FaceResolution.LARGE
