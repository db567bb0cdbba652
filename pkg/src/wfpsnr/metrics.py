"""Classical and weighted image quality metrics.

All arithmetic is double precision with fixed row-major accumulation order.
The internal dynamic range is L = 1; identical images score +infinity.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from .image_core import GrayImage
from .fuzzy_engine import WeightMap

DYNAMIC_RANGE = 1.0


class DimensionMismatchError(ValueError):
    """Image/weight shapes do not agree."""


def _check_shapes(x: GrayImage, y: GrayImage, fmap: WeightMap | None = None) -> None:
    if x.pixels.shape != y.pixels.shape:
        raise DimensionMismatchError(
            f"image shapes differ: {x.pixels.shape} vs {y.pixels.shape}"
        )
    if fmap is not None and fmap.weights.shape != x.pixels.shape:
        raise DimensionMismatchError(
            f"weight map shape {fmap.weights.shape} does not match image {x.pixels.shape}"
        )


def mse(x: GrayImage, y: GrayImage) -> float:
    """Mean squared error over all pixels."""
    _check_shapes(x, y)
    d = x.pixels - y.pixels
    return float(np.mean(d * d))


def psnr(x: GrayImage, y: GrayImage) -> float:
    """10*log10(L^2 / MSE) in dB; +inf for identical images."""
    e = mse(x, y)
    if e == 0.0:
        return math.inf
    return 10.0 * math.log10(DYNAMIC_RANGE * DYNAMIC_RANGE / e)


def fmse(x: GrayImage, y: GrayImage, fmap: WeightMap) -> float:
    """Weighted mean squared error: (1/N) * sum of w_i * (x_i - y_i)^2."""
    _check_shapes(x, y, fmap)
    d = x.pixels - y.pixels
    return float(np.mean(d * d * fmap.weights))


def wfpsnr(x: GrayImage, y: GrayImage, fmap: WeightMap) -> float:
    """Weighted fuzzy PSNR: 10*log10(L^2 / FMSE) in dB; +inf when FMSE is 0."""
    e = fmse(x, y, fmap)
    if e == 0.0:
        return math.inf
    return 10.0 * math.log10(DYNAMIC_RANGE * DYNAMIC_RANGE / e)


@dataclass(frozen=True)
class ScoreReport:
    mse: float
    psnr_db: float
    fmse: float
    wfpsnr_db: float
    L: float = DYNAMIC_RANGE

    def to_dict(self) -> dict:
        def enc(v: float):
            return "inf" if math.isinf(v) else v

        return {
            "mse": self.mse,
            "psnr_db": enc(self.psnr_db),
            "fmse": self.fmse,
            "wfpsnr_db": enc(self.wfpsnr_db),
            "L": int(self.L) if self.L == int(self.L) else self.L,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict())


def score_images(ref: GrayImage, test: GrayImage, fmap: WeightMap) -> ScoreReport:
    """All four metrics for one image pair under one weight map."""
    return ScoreReport(
        mse=mse(ref, test),
        psnr_db=psnr(ref, test),
        fmse=fmse(ref, test, fmap),
        wfpsnr_db=wfpsnr(ref, test, fmap),
    )
