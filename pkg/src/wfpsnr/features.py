"""Block-resolution perceptual features: saliency, edge concentration, intensity.

All three features are computed on the reference image at 8x8-block
resolution and normalized to [0, 1] before entering the fuzzy system.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
from scipy import ndimage

from .image_core import BlockGrid, GrayImage, _freeze, block_mean, block_reduce, resize_bilinear

FEATURE_BLOCK_SIZE = 8

DEFAULT_CANNY_SIGMA = 1.4
# With no explicit thresholds, the high one adapts to content: 90th percentile
# of nonzero gradient magnitudes, low = 0.4 * high.
AUTO_HIGH_PERCENTILE = 90.0
AUTO_LOW_RATIO = 0.4

Detector = Callable[[GrayImage], np.ndarray]


@dataclass(frozen=True, eq=False)
class EdgeMap:
    """Binary edge/non-edge decision per pixel."""

    bits: np.ndarray

    def __post_init__(self):
        b = np.asarray(self.bits, dtype=bool)
        if b.ndim != 2 or b.size == 0:
            raise ValueError("edge map must be a non-empty 2-D array")
        object.__setattr__(self, "bits", _freeze(b))

    @property
    def height(self) -> int:
        return self.bits.shape[0]

    @property
    def width(self) -> int:
        return self.bits.shape[1]


@dataclass(frozen=True, eq=False)
class FeatureMaps:
    """The three aligned feature grids, each with values in [0, 1]."""

    saliency: BlockGrid
    edge_concentration: BlockGrid
    intensity: BlockGrid

    def __post_init__(self):
        shapes = {
            (g.rows, g.cols)
            for g in (self.saliency, self.edge_concentration, self.intensity)
        }
        if len(shapes) != 1:
            raise ValueError(f"feature grids are misaligned: {sorted(shapes)}")

    @property
    def rows(self) -> int:
        return self.saliency.rows

    @property
    def cols(self) -> int:
        return self.saliency.cols


def _gaussian_smooth(field: np.ndarray, sigma: float) -> np.ndarray:
    """Separable Gaussian blur with kernel radius ceil(3*sigma), edge-replicated."""
    radius = math.ceil(3.0 * sigma)
    offsets = np.arange(-radius, radius + 1, dtype=np.float64)
    kernel = np.exp(-(offsets**2) / (2.0 * sigma * sigma))
    kernel /= kernel.sum()
    out = ndimage.correlate1d(field, kernel, axis=0, mode="nearest")
    return ndimage.correlate1d(out, kernel, axis=1, mode="nearest")


_SOBEL_X = np.array([[-1.0, 0.0, 1.0], [-2.0, 0.0, 2.0], [-1.0, 0.0, 1.0]])
_SOBEL_Y = _SOBEL_X.T

# Neighbor offsets (dy, dx) for the four quantized gradient directions:
# 0, 45, 90, 135 degrees measured from the +x axis with y pointing down.
_DIRECTION_OFFSETS = ((0, 1), (1, 1), (1, 0), (1, -1))


def canny(
    img: GrayImage,
    sigma: float = DEFAULT_CANNY_SIGMA,
    t_low: float | None = None,
    t_high: float | None = None,
) -> EdgeMap:
    """Canny edge detection: blur, Sobel, non-maximum suppression, hysteresis.

    When thresholds are omitted they are derived from the gradient-magnitude
    distribution of the image itself. Explicit thresholds must satisfy
    0 <= t_low < t_high.
    """
    if img.height < 3 or img.width < 3:
        raise ValueError("image must be at least 3x3 for edge detection")
    if sigma <= 0:
        raise ValueError("sigma must be positive")

    smoothed = _gaussian_smooth(img.pixels, sigma)
    gx = ndimage.correlate(smoothed, _SOBEL_X, mode="nearest")
    gy = ndimage.correlate(smoothed, _SOBEL_Y, mode="nearest")
    mag = np.hypot(gx, gy)

    if t_high is None:
        nonzero = mag[mag > 1e-12]
        if nonzero.size == 0:
            return EdgeMap(np.zeros(mag.shape, dtype=bool))
        t_high = float(np.percentile(nonzero, AUTO_HIGH_PERCENTILE))
        if t_low is None:
            t_low = AUTO_LOW_RATIO * t_high
    if t_low is None or not (0.0 <= t_low < t_high):
        raise ValueError(f"thresholds out of order: t_low={t_low}, t_high={t_high}")

    suppressed = _non_maximum_suppression(mag, gx, gy)
    return EdgeMap(_hysteresis(suppressed, t_low, t_high))


def _non_maximum_suppression(mag: np.ndarray, gx: np.ndarray, gy: np.ndarray) -> np.ndarray:
    """Keep only pixels whose magnitude is maximal along the gradient direction.

    Ties are broken asymmetrically (>= backward, > forward) so a perfectly
    symmetric step produces a single-pixel-wide edge.
    """
    h, w = mag.shape
    theta = np.mod(np.arctan2(gy, gx), np.pi)
    bins = np.round(theta / (np.pi / 4.0)).astype(int) % 4
    padded = np.pad(mag, 1, mode="constant")
    keep = np.zeros((h, w), dtype=bool)
    for b, (dy, dx) in enumerate(_DIRECTION_OFFSETS):
        forward = padded[1 + dy : 1 + dy + h, 1 + dx : 1 + dx + w]
        backward = padded[1 - dy : 1 - dy + h, 1 - dx : 1 - dx + w]
        keep |= (bins == b) & (mag >= backward) & (mag > forward)
    return np.where(keep, mag, 0.0)


def _hysteresis(suppressed: np.ndarray, t_low: float, t_high: float) -> np.ndarray:
    strong = suppressed >= t_high
    if not strong.any():
        return np.zeros(suppressed.shape, dtype=bool)
    weak = (suppressed >= t_low) & (suppressed > 0.0)
    labels, _ = ndimage.label(weak, structure=np.ones((3, 3), dtype=int))
    kept = np.unique(labels[strong])
    return np.isin(labels, kept) & weak


def edge_variance_grid(edges: EdgeMap) -> BlockGrid:
    """Per-block mean of the 3x3-neighborhood variance of the binary edge map.

    The neighborhood is zero-padded at image borders and may straddle block
    boundaries; blocks only group the per-pixel results. For binary data the
    population variance of a window with edge fraction p is p * (1 - p).
    This is the raw (pre-normalization) edge-concentration field.
    """
    e = edges.bits.astype(np.float64)
    counts = ndimage.correlate(e, np.ones((3, 3)), mode="constant", cval=0.0)
    p = counts / 9.0
    variance = p * (1.0 - p)
    return BlockGrid(FEATURE_BLOCK_SIZE, block_mean(variance, FEATURE_BLOCK_SIZE))


def edge_concentration(edges: EdgeMap) -> BlockGrid:
    """Edge-concentration grid normalized by its global maximum to [0, 1]."""
    grid = edge_variance_grid(edges)
    peak = float(grid.values.max())
    if peak <= 0.0:
        return grid
    return BlockGrid(grid.block_size, grid.values / peak)


def intensity_map(img: GrayImage) -> BlockGrid:
    """Per-block mean intensity; samples are already in [0, 1]."""
    return block_reduce(img, FEATURE_BLOCK_SIZE)


def spectral_residual(
    img: GrayImage,
    map_size: int = 64,
    smoothing_sigma: float = 3.0,
) -> np.ndarray:
    """Default saliency detector based on the spectral residual of the image.

    The image is resampled to map_size x map_size, transformed with a 2-D
    FFT, and the log-amplitude spectrum is compared against its 3x3
    box-filtered version. The inverse transform of that residual (with the
    original phase) is squared, smoothed, and resampled back to the source
    size. The result is a non-negative per-pixel field; a constant image has
    no residual structure and maps to all zeros.
    """
    p = img.pixels
    if float(p.max()) == float(p.min()):
        return np.zeros(p.shape, dtype=np.float64)
    small = resize_bilinear(p, map_size, map_size)
    spectrum = np.fft.fft2(small)
    amp = np.abs(spectrum)
    # Floor relative to the spectrum scale: near-zero bins (spectral nulls of
    # synthetic stimuli) would otherwise dominate the log and ring as echoes.
    log_amp = np.log(np.maximum(amp, 1e-3 * amp.mean()))
    phase = np.angle(spectrum)
    residual = log_amp - ndimage.uniform_filter(log_amp, size=3, mode="nearest")
    sal = np.abs(np.fft.ifft2(np.exp(residual + 1j * phase))) ** 2
    sal = ndimage.gaussian_filter(sal, smoothing_sigma, mode="nearest")
    return resize_bilinear(sal, img.height, img.width)


def combine_detectors(detectors: Sequence[Detector], weights: Sequence[float]) -> Detector:
    """Convex combination of saliency detectors.

    Each detector output is min-max normalized before weighting so that
    detectors with different output scales contribute comparably. Weights
    must be non-negative and sum to 1.
    """
    if len(detectors) == 0 or len(detectors) != len(weights):
        raise ValueError("need one weight per detector and at least one detector")
    w = np.asarray(weights, dtype=np.float64)
    if (w < 0).any():
        raise ValueError("weights must be non-negative")
    if abs(float(w.sum()) - 1.0) > 1e-9:
        raise ValueError("weights must sum to 1")

    def combined(img: GrayImage) -> np.ndarray:
        total = np.zeros((img.height, img.width), dtype=np.float64)
        for det, weight in zip(detectors, w):
            field = _normalize_field(det(img))
            total += weight * field
        return total

    return combined


def _normalize_field(field: np.ndarray) -> np.ndarray:
    lo = float(field.min())
    hi = float(field.max())
    if hi == lo:
        return np.zeros(field.shape, dtype=np.float64)
    return (field - lo) / (hi - lo)


def saliency(img: GrayImage, detector: Detector | None = None) -> BlockGrid:
    """Saliency feature grid from a pluggable per-pixel detector.

    The detector field is min-max normalized to [0, 1] (a constant field maps
    to all zeros) and then reduced to 8x8-block resolution by block means.
    """
    det = detector if detector is not None else spectral_residual
    try:
        field = np.asarray(det(img), dtype=np.float64)
    except Exception as exc:
        raise RuntimeError(f"saliency detector failed: {exc}") from exc
    if field.shape != (img.height, img.width):
        raise ValueError(
            f"detector returned shape {field.shape}, expected {(img.height, img.width)}"
        )
    if not np.all(np.isfinite(field)) or float(field.min()) < 0.0:
        raise ValueError("detector must return a finite non-negative field")
    return BlockGrid(FEATURE_BLOCK_SIZE, block_mean(_normalize_field(field), FEATURE_BLOCK_SIZE))


def compute_feature_maps(
    img: GrayImage,
    detector: Detector | None = None,
    sigma: float = DEFAULT_CANNY_SIGMA,
    t_low: float | None = None,
    t_high: float | None = None,
) -> FeatureMaps:
    """Run the full feature front end on one image."""
    edges = canny(img, sigma=sigma, t_low=t_low, t_high=t_high)
    return FeatureMaps(
        saliency=saliency(img, detector),
        edge_concentration=edge_concentration(edges),
        intensity=intensity_map(img),
    )
