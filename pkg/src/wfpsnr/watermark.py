"""DCT-domain block embedding, region-masked attacks, and the two-phase
important/non-important evaluation protocol.

Every randomized operation is a pure function of (input, spec, seed), so
identical seeds give bit-identical results regardless of call order.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, replace

import numpy as np
from scipy import fft as _fft

from .features import compute_feature_maps
from .fuzzy_engine import (
    FuzzySystem,
    ORIENTATION_IMPORTANCE,
    WeightMap,
    fuzzy_map,
    weight_map,
)
from .image_core import GrayImage, RegionMask
from .metrics import psnr, wfpsnr

# Zig-zag indices eligible for coefficient modification: mid band, DC excluded.
# DC changes are plainly visible and pure high frequencies vanish under clamping.
MID_BAND = range(3, 21)

DEFAULT_EMBED_STRENGTH = 0.05
DEFAULT_BLOCK_FRACTION = 0.25

ATTACK_SALT_PEPPER = "sp"
ATTACK_GAUSSIAN = "gn"


class DegenerateWeightMapError(ValueError):
    """All weights equal: the important/non-important regions are undefined."""


def dct2(block: np.ndarray) -> np.ndarray:
    """Orthonormal type-II 2-D DCT of a square block."""
    b = np.asarray(block, dtype=np.float64)
    if b.ndim != 2 or b.shape[0] != b.shape[1] or b.shape[0] < 2:
        raise ValueError(f"block must be square and at least 2x2, got {b.shape}")
    return _fft.dct(_fft.dct(b, axis=0, norm="ortho"), axis=1, norm="ortho")


def idct2(coefficients: np.ndarray) -> np.ndarray:
    """Inverse of dct2; round-trips within 1e-9."""
    c = np.asarray(coefficients, dtype=np.float64)
    if c.ndim != 2 or c.shape[0] != c.shape[1] or c.shape[0] < 2:
        raise ValueError(f"block must be square and at least 2x2, got {c.shape}")
    return _fft.idct(_fft.idct(c, axis=1, norm="ortho"), axis=0, norm="ortho")


def zigzag_positions(n: int) -> list[tuple[int, int]]:
    """The n*n (row, col) positions in standard zig-zag scan order."""
    positions = []
    for s in range(2 * n - 1):
        rows = range(max(0, s - n + 1), min(s, n - 1) + 1)
        diagonal = [(u, s - u) for u in rows]
        if s % 2 == 0:
            diagonal.reverse()
        positions.extend(diagonal)
    return positions


@dataclass(frozen=True)
class EmbedSpec:
    """Parameters of the additive mid-band DCT embedding."""

    block_size: int = 16
    coefficients_per_block: int = 2
    strength: float = DEFAULT_EMBED_STRENGTH
    block_fraction: float = DEFAULT_BLOCK_FRACTION
    region: RegionMask | None = None
    seed: int = 0

    def __post_init__(self):
        if self.block_size < 8:
            raise ValueError("block_size must be at least 8")
        if not 1 <= self.coefficients_per_block <= len(MID_BAND):
            raise ValueError(f"coefficients_per_block must be in [1, {len(MID_BAND)}]")
        if not math.isfinite(self.strength) or self.strength < 0.0:
            raise ValueError("strength must be finite and non-negative")
        if not 0.0 < self.block_fraction <= 1.0:
            raise ValueError("block_fraction must be in (0, 1]")
        if self.seed < 0:
            raise ValueError("seed must be non-negative")


@dataclass(frozen=True)
class AttackSpec:
    """One degradation: salt-pepper density or Gaussian-noise std, optionally masked."""

    kind: str
    param: float
    region: RegionMask | None = None
    seed: int = 0

    def __post_init__(self):
        if self.kind not in (ATTACK_SALT_PEPPER, ATTACK_GAUSSIAN):
            raise ValueError(f"unknown attack kind {self.kind!r}")
        if self.kind == ATTACK_SALT_PEPPER and not 0.0 <= self.param <= 1.0:
            raise ValueError("salt-pepper density must lie in [0, 1]")
        if self.kind == ATTACK_GAUSSIAN and not (math.isfinite(self.param) and self.param >= 0.0):
            raise ValueError("gaussian std must be finite and non-negative")
        if self.seed < 0:
            raise ValueError("seed must be non-negative")


def embed(img: GrayImage, spec: EmbedSpec) -> GrayImage:
    """Add spec.strength to randomly chosen mid-band DCT coefficients.

    The image is tiled into full block_size blocks; ceil(block_fraction *
    eligible) blocks are selected by the seeded RNG (restricted to blocks
    intersecting the region when one is given). Each selected block gets the
    delta on coefficients_per_block distinct mid-band positions, is inverse
    transformed, and the result is clamped to [0, 1]. Per-block RNG streams
    are derived from (seed, block index), so the output does not depend on
    processing order.
    """
    bs = spec.block_size
    if img.height < bs or img.width < bs:
        raise ValueError(f"image {img.width}x{img.height} is smaller than one {bs}x{bs} block")
    block_rows = img.height // bs
    block_cols = img.width // bs

    eligible = []
    for r in range(block_rows):
        for c in range(block_cols):
            if spec.region is not None:
                window = spec.region.bits[r * bs : (r + 1) * bs, c * bs : (c + 1) * bs]
                if not window.any():
                    continue
            eligible.append(r * block_cols + c)
    if not eligible:
        raise ValueError("embedding region does not intersect any full block")

    out = np.array(img.pixels)
    if spec.strength == 0.0:
        return GrayImage(out)

    count = math.ceil(spec.block_fraction * len(eligible))
    rng = np.random.default_rng(spec.seed)
    chosen = rng.choice(len(eligible), size=count, replace=False)
    band = zigzag_positions(bs)[MID_BAND.start : MID_BAND.stop]

    for pick in chosen:
        index = eligible[pick]
        r, c = divmod(index, block_cols)
        block_rng = np.random.default_rng((spec.seed, index))
        coefficients = dct2(out[r * bs : (r + 1) * bs, c * bs : (c + 1) * bs])
        for slot in block_rng.choice(len(band), size=spec.coefficients_per_block, replace=False):
            coefficients[band[slot]] += spec.strength
        out[r * bs : (r + 1) * bs, c * bs : (c + 1) * bs] = idct2(coefficients)

    np.clip(out, 0.0, 1.0, out=out)
    return GrayImage(out)


def attack(img: GrayImage, spec: AttackSpec) -> GrayImage:
    """Apply one degradation to the masked pixels; everything else is untouched."""
    if spec.region is not None:
        mask = spec.region.bits
        if mask.shape != img.pixels.shape:
            raise ValueError(
                f"mask shape {mask.shape} does not match image {img.pixels.shape}"
            )
    else:
        mask = np.ones(img.pixels.shape, dtype=bool)

    out = np.array(img.pixels)
    flat = out.ravel()
    targets = np.flatnonzero(mask.ravel())
    rng = np.random.default_rng(spec.seed)

    if spec.kind == ATTACK_SALT_PEPPER:
        corrupted = rng.random(targets.size) < spec.param
        values = (rng.random(targets.size) < 0.5).astype(np.float64)
        flat[targets[corrupted]] = values[corrupted]
    else:
        flat[targets] += rng.normal(0.0, spec.param, targets.size)
        np.clip(flat, 0.0, 1.0, out=flat)
    return GrayImage(out)


def decile_regions(fmap: WeightMap) -> tuple[RegionMask, RegionMask]:
    """Masks for the 10% highest-weight and 10% lowest-weight pixels.

    Exactly n // 10 pixels per region, ties broken by pixel index so the
    split is deterministic. A uniform weight map has no meaningful deciles.
    """
    w = fmap.weights.ravel()
    if float(w.max()) == float(w.min()):
        raise DegenerateWeightMapError("weight map is uniform; decile regions are undefined")
    count = max(1, w.size // 10)
    order = np.argsort(w, kind="stable")
    bottom = np.zeros(w.size, dtype=bool)
    bottom[order[:count]] = True
    top = np.zeros(w.size, dtype=bool)
    top[order[-count:]] = True
    shape = fmap.weights.shape
    return RegionMask(top.reshape(shape)), RegionMask(bottom.reshape(shape))


@dataclass(frozen=True)
class ExperimentRow:
    attack: int
    kind: str
    param: float
    region: str
    psnr_db: float
    wfpsnr_db: float


@dataclass(frozen=True, eq=False)
class ExperimentResult:
    rows: tuple[ExperimentRow, ...]
    ordering_important_ok: bool
    ordering_nonimportant_ok: bool

    def summary_dict(self) -> dict:
        return {
            "ordering_important_ok": self.ordering_important_ok,
            "ordering_nonimportant_ok": self.ordering_nonimportant_ok,
        }

    def summary_json(self) -> str:
        return json.dumps(self.summary_dict())


CSV_HEADER = "attack,kind,param,region,psnr_db,wfpsnr_db"


def rows_to_csv(rows) -> str:
    def fmt(v: float) -> str:
        return "inf" if math.isinf(v) else repr(v)

    lines = [CSV_HEADER]
    for row in rows:
        lines.append(
            f"{row.attack},{row.kind},{fmt(row.param)},{row.region},"
            f"{fmt(row.psnr_db)},{fmt(row.wfpsnr_db)}"
        )
    return "\n".join(lines) + "\n"


def run_experiment(
    img: GrayImage,
    system: FuzzySystem,
    attacks,
    orientation: str = ORIENTATION_IMPORTANCE,
) -> ExperimentResult:
    """Score each attack pair on the important and non-important regions.

    attacks is a sequence of (important_spec, nonimportant_spec) pairs; the
    region of each spec is replaced by the top- or bottom-decile mask of the
    weight map derived from img. An attack on the important region should
    push the weighted score below plain PSNR, and vice versa; the two
    verdicts hold only if every pair behaves that way.
    """
    maps = compute_feature_maps(img)
    weights = weight_map(fuzzy_map(maps, system), img.width, img.height, orientation)
    important, nonimportant = decile_regions(weights)

    rows = []
    ordering_important = True
    ordering_nonimportant = True
    for i, (spec_important, spec_nonimportant) in enumerate(attacks):
        phases = (
            ("important", important, spec_important),
            ("nonimportant", nonimportant, spec_nonimportant),
        )
        for region_name, mask, spec in phases:
            attacked = attack(img, replace(spec, region=mask))
            p = psnr(img, attacked)
            wf = wfpsnr(img, attacked, weights)
            rows.append(
                ExperimentRow(
                    attack=i,
                    kind=spec.kind,
                    param=spec.param,
                    region=region_name,
                    psnr_db=p,
                    wfpsnr_db=wf,
                )
            )
            if region_name == "important":
                ordering_important &= wf < p
            else:
                ordering_nonimportant &= wf > p
    return ExperimentResult(tuple(rows), ordering_important, ordering_nonimportant)
