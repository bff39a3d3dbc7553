"""Face cropping, bilinear resampling and colour-space conversion.

Colour conversions (inputs RGB uint8, outputs uint8, rounded half-to-even
and clipped to 0..255):

* Y  = 0.299 R + 0.587 G + 0.114 B
* Cr = 0.713 (R - Y) + 128
* Cb = 0.564 (B - Y) + 128
* V  = max(R, G, B)
* S  = 255 (V - min) / V, 0 where V == 0
* H  = hue in degrees scaled by 255/360, 0 where V == min
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

from ..errors import CropError

CROP_SIZE = 64
CHANNELS = ("Y", "Cr", "Cb", "H", "S", "V")


def load_frame(path) -> np.ndarray:
    from PIL import Image

    with Image.open(Path(path)) as img:
        return np.asarray(img.convert("RGB"), dtype=np.uint8)


def resize_bilinear(image: np.ndarray, height: int, width: int) -> np.ndarray:
    """Bilinear resample with half-pixel centres and edge clamping."""
    src = np.asarray(image, dtype=np.float64)
    h, w = src.shape[:2]

    def axis(n_out, n_in):
        pos = (np.arange(n_out) + 0.5) * (n_in / n_out) - 0.5
        pos = np.clip(pos, 0.0, n_in - 1)
        lo = np.floor(pos).astype(np.intp)
        hi = np.minimum(lo + 1, n_in - 1)
        return lo, hi, pos - lo

    y0, y1, fy = axis(height, h)
    x0, x1, fx = axis(width, w)
    if src.ndim == 3:
        fy = fy[:, None, None]
        fx = fx[None, :, None]
    else:
        fy = fy[:, None]
        fx = fx[None, :]
    top = src[y0][:, x0] * (1 - fx) + src[y0][:, x1] * fx
    bottom = src[y1][:, x0] * (1 - fx) + src[y1][:, x1] * fx
    out = top * (1 - fy) + bottom * fy
    return np.clip(np.rint(out), 0, 255).astype(np.uint8)


def square_box(bbox, frame_h: int, frame_w: int) -> tuple[int, int, int, int]:
    """Expand ``(x, y, w, h)`` to a square about its centre, shifted and
    clamped to lie inside the frame. Returns integer ``(x0, y0, x1, y1)``."""
    x, y, w, h = (float(v) for v in bbox)
    if not (w > 0 and h > 0):
        raise CropError(f"degenerate bounding box {bbox}")
    if x >= frame_w or y >= frame_h or x + w <= 0 or y + h <= 0:
        raise CropError(f"bounding box {bbox} lies outside {frame_w}x{frame_h} frame")
    side = int(round(max(w, h)))
    side = max(1, min(side, frame_h, frame_w))
    cx, cy = x + w / 2.0, y + h / 2.0
    x0 = int(round(cx - side / 2.0))
    y0 = int(round(cy - side / 2.0))
    x0 = min(max(x0, 0), frame_w - side)
    y0 = min(max(y0, 0), frame_h - side)
    return x0, y0, x0 + side, y0 + side


def crop_face(frame: np.ndarray, bbox=None, size: int = CROP_SIZE) -> np.ndarray:
    """Square face crop resampled to ``size x size`` RGB uint8.

    ``bbox=None`` uses the whole frame.
    """
    frame = np.asarray(frame)
    if frame.ndim != 3 or frame.shape[2] != 3:
        raise CropError(f"expected an HxWx3 frame, got shape {frame.shape}")
    fh, fw = frame.shape[:2]
    if bbox is None:
        bbox = (0, 0, fw, fh)
    x0, y0, x1, y1 = square_box(bbox, fh, fw)
    region = frame[y0:y1, x0:x1]
    if region.shape[:2] == (size, size):
        return np.ascontiguousarray(region, dtype=np.uint8)
    return resize_bilinear(region, size, size)


def _to_u8(x: np.ndarray) -> np.ndarray:
    return np.clip(np.rint(x), 0, 255).astype(np.uint8)


def rgb_to_ycrcb(rgb: np.ndarray) -> np.ndarray:
    f = np.asarray(rgb, dtype=np.float64)
    r, g, b = f[..., 0], f[..., 1], f[..., 2]
    y = 0.299 * r + 0.587 * g + 0.114 * b
    cr = 0.713 * (r - y) + 128.0
    cb = 0.564 * (b - y) + 128.0
    return _to_u8(np.stack([y, cr, cb], axis=-1))


def rgb_to_hsv(rgb: np.ndarray) -> np.ndarray:
    f = np.asarray(rgb, dtype=np.float64)
    r, g, b = f[..., 0], f[..., 1], f[..., 2]
    v = f.max(axis=-1)
    mn = f.min(axis=-1)
    delta = v - mn
    safe_v = np.where(v > 0, v, 1.0)
    s = np.where(v > 0, 255.0 * delta / safe_v, 0.0)
    safe_d = np.where(delta > 0, delta, 1.0)
    h = np.where(
        v == r,
        60.0 * (g - b) / safe_d,
        np.where(v == g, 120.0 + 60.0 * (b - r) / safe_d, 240.0 + 60.0 * (r - g) / safe_d),
    )
    h = np.where(delta > 0, np.mod(h, 360.0), 0.0)
    return _to_u8(np.stack([h * 255.0 / 360.0, s, v], axis=-1))


def color_channels(rgb: np.ndarray, names=CHANNELS) -> dict[str, np.ndarray]:
    """Requested channels (subset of Y, Cr, Cb, H, S, V) as uint8 planes."""
    out = {}
    want = set(names)
    if want & {"Y", "Cr", "Cb"}:
        ycc = rgb_to_ycrcb(rgb)
        out.update(Y=ycc[..., 0], Cr=ycc[..., 1], Cb=ycc[..., 2])
    if want & {"H", "S", "V"}:
        hsv = rgb_to_hsv(rgb)
        out.update(H=hsv[..., 0], S=hsv[..., 1], V=hsv[..., 2])
    return {n: out[n] for n in names}


def grayscale(rgb: np.ndarray) -> np.ndarray:
    """Real-valued luma (no rounding)."""
    f = np.asarray(rgb, dtype=np.float64)
    return 0.299 * f[..., 0] + 0.587 * f[..., 1] + 0.114 * f[..., 2]
