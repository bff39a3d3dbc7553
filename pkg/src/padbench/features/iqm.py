"""Image quality measures for the quality-based baseline.

Full-reference measures compare the grey crop ``img`` to a Gaussian-blurred
copy ``ref``; no-reference measures look at the crop alone. Every measure
whose formula divides by zero on a given input returns 0.0 instead.
"""

from __future__ import annotations

import math
from typing import Callable

import numpy as np
from scipy import ndimage

from .imaging import grayscale, rgb_to_hsv

PEAK = 255.0
SSIM_SIGMA = 1.5
SSIM_TRUNCATE = 3.5  # 11x11 window
SSIM_K1 = 0.01
SSIM_K2 = 0.03


def _safe_div(num: float, den: float) -> float:
    return float(num / den) if den != 0 else 0.0


def mse(img, ref) -> float:
    return float(np.mean((img - ref) ** 2))


def psnr(img, ref) -> float:
    """Peak SNR in dB against peak 255; 0 when the images are identical."""
    e = mse(img, ref)
    return 10.0 * math.log10(PEAK ** 2 / e) if e > 0 else 0.0


def snr(img, ref) -> float:
    e = mse(img, ref)
    power = float(np.sum(img ** 2))
    if e == 0 or power == 0:
        return 0.0
    return 10.0 * math.log10(power / (img.size * e))


def structural_content(img, ref) -> float:
    return _safe_div(np.sum(img ** 2), np.sum(ref ** 2))


def max_difference(img, ref) -> float:
    return float(np.max(np.abs(img - ref)))


def average_difference(img, ref) -> float:
    return float(np.mean(img - ref))


def normalized_absolute_error(img, ref) -> float:
    return _safe_div(np.sum(np.abs(img - ref)), np.sum(np.abs(img)))


def normalized_cross_correlation(img, ref) -> float:
    return _safe_div(np.sum(img * ref), np.sum(img ** 2))


def sobel_magnitude(img) -> np.ndarray:
    gx = ndimage.sobel(img, axis=1, mode="reflect")
    gy = ndimage.sobel(img, axis=0, mode="reflect")
    return np.hypot(gx, gy)


def total_edge_difference(img, ref) -> float:
    return float(np.mean(np.abs(sobel_magnitude(img) - sobel_magnitude(ref))))


def spectral_magnitude_error(img, ref) -> float:
    return float(np.mean((np.abs(np.fft.fft2(img)) - np.abs(np.fft.fft2(ref))) ** 2))


def spectral_phase_error(img, ref) -> float:
    # adding +0.0 turns a -0.0 imaginary part into +0.0 so real negative bins get phase pi
    return float(np.mean(np.abs(np.angle(np.fft.fft2(img) + 0.0) - np.angle(np.fft.fft2(ref) + 0.0)) ** 2))


def gradient_magnitude_error(img, ref) -> float:
    # central differences, one-sided at the border
    def mag(a):
        gy, gx = np.gradient(a)
        return np.hypot(gx, gy)

    return float(np.mean((mag(img) - mag(ref)) ** 2))


def ssim(img, ref) -> float:
    """Mean SSIM with an 11x11 Gaussian window (sigma 1.5), reflect border."""
    c1 = (SSIM_K1 * PEAK) ** 2
    c2 = (SSIM_K2 * PEAK) ** 2

    def blur(a):
        return ndimage.gaussian_filter(a, SSIM_SIGMA, mode="reflect", truncate=SSIM_TRUNCATE)

    mu_x, mu_y = blur(img), blur(ref)
    sxx = blur(img * img) - mu_x ** 2
    syy = blur(ref * ref) - mu_y ** 2
    sxy = blur(img * ref) - mu_x * mu_y
    num = (2 * mu_x * mu_y + c1) * (2 * sxy + c2)
    den = (mu_x ** 2 + mu_y ** 2 + c1) * (sxx + syy + c2)
    return float(np.mean(num / den))


def blurriness(gray) -> float:
    """Crete-Roffet no-reference blur estimate in [0, 1] (higher = blurrier)."""
    scores = []
    for axis in (0, 1):
        smooth = ndimage.uniform_filter1d(gray, 9, axis=axis, mode="reflect")
        d_img = np.abs(np.diff(gray, axis=axis))
        d_smooth = np.abs(np.diff(smooth, axis=axis))
        variation = np.maximum(0.0, d_img - d_smooth)
        s_img = float(d_img.sum())
        scores.append(_safe_div(s_img - float(variation.sum()), s_img))
    return max(scores)


def chromatic_moments(rgb) -> list[float]:
    """Mean, standard deviation and skewness of H, S and V (scaled to 0..1)."""
    hsv = rgb_to_hsv(rgb).astype(np.float64) / 255.0
    out = []
    for c in range(3):
        x = hsv[..., c].ravel()
        mu = x.mean()
        sd = x.std()
        skew = float(np.mean(((x - mu) / sd) ** 3)) if sd > 0 else 0.0
        out.extend([float(mu), float(sd), skew])
    return out


def color_diversity(rgb) -> list[float]:
    """Share of pixels in the 100 most frequent colours and the number of
    distinct colours (per-channel 32-level quantisation), both normalised by
    the pixel count."""
    q = (np.asarray(rgb, dtype=np.int64) >> 3).reshape(-1, 3)
    keys = (q[:, 0] << 10) | (q[:, 1] << 5) | q[:, 2]
    counts = np.sort(np.bincount(keys, minlength=1 << 15))[::-1]
    n = keys.size
    return [float(counts[:100].sum() / n), float(np.count_nonzero(counts) / n)]


def specular_stats(rgb) -> list[float]:
    """Specular pixel ratio plus mean and variance of their V (0..1).

    A pixel is specular when its V exceeds mean(V) + 2 std(V) and its S is
    below mean(S).
    """
    hsv = rgb_to_hsv(rgb).astype(np.float64) / 255.0
    s, v = hsv[..., 1], hsv[..., 2]
    mask = (v > v.mean() + 2.0 * v.std()) & (s < s.mean())
    if not mask.any():
        return [0.0, 0.0, 0.0]
    vals = v[mask]
    return [float(mask.mean()), float(vals.mean()), float(vals.var())]


FULL_REFERENCE: dict[str, Callable] = {
    "mse": mse,
    "psnr": psnr,
    "snr": snr,
    "sc": structural_content,
    "md": max_difference,
    "ad": average_difference,
    "nae": normalized_absolute_error,
    "nxc": normalized_cross_correlation,
    "ted": total_edge_difference,
    "sme": spectral_magnitude_error,
    "spe": spectral_phase_error,
    "gme": gradient_magnitude_error,
    "ssim": ssim,
}

# id -> (function of (rgb, gray), output width)
NO_REFERENCE: dict[str, tuple[Callable, int]] = {
    "blur": (lambda rgb, gray: [blurriness(gray)], 1),
    "chroma": (lambda rgb, gray: chromatic_moments(rgb), 9),
    "color_diversity": (lambda rgb, gray: color_diversity(rgb), 2),
    "specular": (lambda rgb, gray: specular_stats(rgb), 3),
}

DEFAULT_MEASURES = tuple(FULL_REFERENCE) + tuple(NO_REFERENCE)


def measure_width(measure_id: str) -> int:
    if measure_id in FULL_REFERENCE:
        return 1
    if measure_id in NO_REFERENCE:
        return NO_REFERENCE[measure_id][1]
    raise ValueError(f"unknown IQM measure {measure_id!r}")


def gaussian_reference(gray: np.ndarray, sigma: float, kernel: int) -> np.ndarray:
    if sigma <= 0:
        return gray.copy()
    radius = kernel // 2
    return ndimage.gaussian_filter(gray, sigma, mode="reflect", truncate=radius / sigma)


def iqm_vector(rgb: np.ndarray, measures=DEFAULT_MEASURES, sigma: float = 1.0, kernel: int = 5) -> np.ndarray:
    gray = grayscale(rgb)
    ref = gaussian_reference(gray, sigma, kernel)
    values: list[float] = []
    for m in measures:
        if m in FULL_REFERENCE:
            values.append(FULL_REFERENCE[m](gray, ref))
        elif m in NO_REFERENCE:
            values.extend(NO_REFERENCE[m][0](rgb, gray))
        else:
            raise ValueError(f"unknown IQM measure {m!r}")
    return np.asarray(values, dtype=np.float64)
