"""Deterministic synthetic test image for self-contained evaluation runs.

A bright flat backdrop, one dark compact square, and one textured noise
patch give the feature pipeline strong contrast: the backdrop lands in the
bottom of the importance scale (high intensity, no structure), the square
near the top (dark, salient, smooth), and the patch in between.
"""

from __future__ import annotations

import numpy as np

from .image_core import GrayImage

BACKGROUND = 0.92
SQUARE_VALUE = 0.1
PATCH_LOW = 0.15
PATCH_HIGH = 0.45


def synthetic_image(width: int = 256, height: int = 256, seed: int = 7) -> GrayImage:
    """Build the bundled test scene at the requested size, reproducibly."""
    if width < 64 or height < 64:
        raise ValueError("synthetic image must be at least 64x64")
    rng = np.random.default_rng(seed)
    pixels = np.full((height, width), BACKGROUND)

    sq_r0, sq_r1 = round(0.09 * height), round(0.50 * height)
    sq_c0, sq_c1 = round(0.09 * width), round(0.50 * width)
    pixels[sq_r0:sq_r1, sq_c0:sq_c1] = SQUARE_VALUE

    pt_r0, pt_r1 = round(0.59 * height), round(0.88 * height)
    pt_c0, pt_c1 = round(0.59 * width), round(0.88 * width)
    pixels[pt_r0:pt_r1, pt_c0:pt_c1] = rng.uniform(
        PATCH_LOW, PATCH_HIGH, size=(pt_r1 - pt_r0, pt_c1 - pt_c0)
    )
    return GrayImage(pixels)
