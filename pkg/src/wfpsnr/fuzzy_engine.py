"""Mamdani fuzzy system turning feature triples into per-pixel weights.

Three input variables (saliency, edge, intensity) with three linguistic
levels each feed a 27-rule min-max inference whose five output sets live on
the crisp domain [0.1, 0.27]. Centroid defuzzification produces one
importance value per block; the weight map upsamples those values to pixel
resolution and normalizes them to mean 1 so that uniform distortion scores
identically under weighted and unweighted PSNR.

The rule table and the input membership functions are configurable through
a JSON file; the shipped defaults encode the intended monotonicities
(saliency raises importance, edge concentration and intensity lower it).
Edge memberships can alternatively be fitted from data with fuzzy c-means.
"""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path

import numpy as np

from .image_core import BlockGrid, GrayImage, _freeze, upsample_nearest
from .features import FeatureMaps, compute_feature_maps

VARIABLE_NAMES = ("saliency", "edge", "intensity")
LEVEL_NAMES = ("low", "medium", "high")
OUTPUT_NAMES = ("VL", "L", "M", "H", "VH")

DEFAULT_OUTPUT_PEAKS = (0.1, 0.1425, 0.185, 0.2275, 0.27)
DEFUZZ_GRID_POINTS = 1024

ORIENTATION_IMPORTANCE = "importance"
ORIENTATION_EMBEDDING = "embedding"
ORIENTATIONS = (ORIENTATION_IMPORTANCE, ORIENTATION_EMBEDDING)


@dataclass(frozen=True, eq=False)
class MembershipFunction:
    """Piecewise-linear map from a crisp value to a degree in [0, 1].

    Evaluation clamps outside the vertex span (the end degrees extend).
    """

    xs: np.ndarray
    degrees: np.ndarray

    def __post_init__(self):
        xs = np.asarray(self.xs, dtype=np.float64)
        ds = np.asarray(self.degrees, dtype=np.float64)
        if xs.ndim != 1 or xs.size < 2 or xs.shape != ds.shape:
            raise ValueError("need at least two (x, degree) vertices")
        if not np.all(np.diff(xs) > 0):
            raise ValueError("vertex x values must be strictly increasing")
        if float(ds.min()) < 0.0 or float(ds.max()) > 1.0:
            raise ValueError("degrees must lie in [0, 1]")
        object.__setattr__(self, "xs", _freeze(xs))
        object.__setattr__(self, "degrees", _freeze(ds))

    def __call__(self, x):
        return np.interp(x, self.xs, self.degrees)

    @property
    def peak(self) -> float:
        return float(self.degrees.max())

    def vertices(self) -> list[list[float]]:
        return [[float(x), float(d)] for x, d in zip(self.xs, self.degrees)]

    @classmethod
    def from_vertices(cls, vertices) -> "MembershipFunction":
        pts = [(float(x), float(d)) for x, d in vertices]
        return cls(np.array([p[0] for p in pts]), np.array([p[1] for p in pts]))

    @classmethod
    def triangular(cls, a: float, b: float, c: float) -> "MembershipFunction":
        """Triangle with feet at a and c, peak 1 at b; a==b or b==c shoulder it."""
        if not a <= b <= c or a == c:
            raise ValueError(f"invalid triangle ({a}, {b}, {c})")
        pts = [(a, 0.0), (b, 1.0), (c, 0.0)]
        dedup = [pts[0] if a < b else (b, 1.0)]
        for x, d in pts[1:]:
            if x > dedup[-1][0]:
                dedup.append((x, d))
        return cls.from_vertices(dedup)


@dataclass(frozen=True, eq=False)
class FuzzyVariable:
    """One input variable with exactly three levels ordered low, medium, high."""

    name: str
    levels: tuple[MembershipFunction, MembershipFunction, MembershipFunction]

    def __post_init__(self):
        if self.name not in VARIABLE_NAMES:
            raise ValueError(f"unknown variable name {self.name!r}")
        if len(self.levels) != 3:
            raise ValueError("a fuzzy variable needs exactly three levels")
        for mf in self.levels:
            if abs(mf.peak - 1.0) > 1e-9:
                raise ValueError(f"{self.name}: every level must reach degree 1")
        object.__setattr__(self, "levels", tuple(self.levels))


@dataclass(frozen=True)
class Rule:
    """One IF/THEN entry: antecedent levels for the three inputs, one output set."""

    saliency: str
    edge: str
    intensity: str
    output: str

    def __post_init__(self):
        for lvl in (self.saliency, self.edge, self.intensity):
            if lvl not in LEVEL_NAMES:
                raise ValueError(f"unknown level {lvl!r}")
        if self.output not in OUTPUT_NAMES:
            raise ValueError(f"unknown output level {self.output!r}")

    @property
    def antecedent(self) -> tuple[str, str, str]:
        return (self.saliency, self.edge, self.intensity)


@dataclass(frozen=True, eq=False)
class FuzzySystem:
    """Complete Mamdani system: 3 variables, 27 rules, 5 output sets.

    T-norm is min, S-norm is max, defuzzification is the centroid of the
    aggregated output set on a fixed 1024-point grid over the crisp domain
    spanned by the output peaks.
    """

    variables: tuple[FuzzyVariable, FuzzyVariable, FuzzyVariable]
    rules: tuple[Rule, ...]
    output_peaks: tuple[float, float, float, float, float] = DEFAULT_OUTPUT_PEAKS

    def __post_init__(self):
        names = tuple(v.name for v in self.variables)
        if names != VARIABLE_NAMES:
            raise ValueError(f"variables must be ordered {VARIABLE_NAMES}, got {names}")
        if len(self.rules) != 27:
            raise ValueError(f"rule base must contain exactly 27 rules, got {len(self.rules)}")
        seen = {r.antecedent for r in self.rules}
        if len(seen) != 27:
            raise ValueError("rule base must cover every antecedent combination exactly once")
        peaks = tuple(float(x) for x in self.output_peaks)
        if len(peaks) != 5 or not all(a < b for a, b in zip(peaks, peaks[1:])):
            raise ValueError("output_peaks must be five strictly increasing values")
        object.__setattr__(self, "variables", tuple(self.variables))
        object.__setattr__(self, "rules", tuple(self.rules))
        object.__setattr__(self, "output_peaks", peaks)

    @cached_property
    def output_sets(self) -> tuple[MembershipFunction, ...]:
        return output_sets_from_peaks(self.output_peaks)

    @cached_property
    def _tables(self):
        lo, hi = self.output_domain
        grid = np.linspace(lo, hi, DEFUZZ_GRID_POINTS)
        sampled = np.stack([mf(grid) for mf in self.output_sets])
        level_index = {name: i for i, name in enumerate(LEVEL_NAMES)}
        output_index = {name: i for i, name in enumerate(OUTPUT_NAMES)}
        antecedents = np.array(
            [[level_index[lvl] for lvl in rule.antecedent] for rule in self.rules]
        )
        consequents = np.array([output_index[rule.output] for rule in self.rules])
        return grid, sampled, antecedents, consequents

    @property
    def output_domain(self) -> tuple[float, float]:
        return self.output_peaks[0], self.output_peaks[-1]


def default_memberships(variable: str) -> tuple[MembershipFunction, ...]:
    """Triangular low/medium/high partition of [0, 1] for a named variable."""
    if variable not in VARIABLE_NAMES:
        raise ValueError(f"unknown variable name {variable!r}")
    return (
        MembershipFunction.triangular(0.0, 0.0, 0.5),
        MembershipFunction.triangular(0.0, 0.5, 1.0),
        MembershipFunction.triangular(0.5, 1.0, 1.0),
    )


def default_rules() -> tuple[Rule, ...]:
    """Deterministic 27-rule table from the stated feature monotonicities.

    The consequent index is clamp(2*s - e - i + 2, 0, 4) over level indices
    low=0, medium=1, high=2: saliency raises importance, edge concentration
    and intensity lower it.
    """
    rules = []
    for s, e, i in itertools.product(range(3), repeat=3):
        idx = min(max(2 * s - e - i + 2, 0), 4)
        rules.append(
            Rule(
                saliency=LEVEL_NAMES[s],
                edge=LEVEL_NAMES[e],
                intensity=LEVEL_NAMES[i],
                output=OUTPUT_NAMES[idx],
            )
        )
    return tuple(rules)


def output_sets_from_peaks(peaks=DEFAULT_OUTPUT_PEAKS) -> tuple[MembershipFunction, ...]:
    """Output sets over five increasing peaks: three 50%-overlap symmetric
    triangles inside, plateau sets at the ends.

    The end sets hold degree 1 from the domain edge through their peak and
    drop over a negligible ramp. A plateau's clipped centroid does not move
    with the clip height, unlike a ramp's, so inference stays monotone when
    two neighboring input levels fire the same saturated consequent.
    """
    p = [float(x) for x in peaks]
    if len(p) != 5 or not all(a < b for a, b in zip(p, p[1:])):
        raise ValueError("need five strictly increasing output peaks")
    low_ramp = 1e-6 * (p[1] - p[0])
    high_ramp = 1e-6 * (p[4] - p[3])
    sets = [MembershipFunction.from_vertices([(p[1] - low_ramp, 1.0), (p[1], 0.0)])]
    for k in range(1, 4):
        sets.append(MembershipFunction.triangular(p[k - 1], p[k], p[k + 1]))
    sets.append(MembershipFunction.from_vertices([(p[3], 0.0), (p[3] + high_ramp, 1.0)]))
    return tuple(sets)


def default_system() -> FuzzySystem:
    """The shipped system: triangular inputs, monotone rule table, five outputs."""
    variables = tuple(
        FuzzyVariable(name, default_memberships(name)) for name in VARIABLE_NAMES
    )
    return FuzzySystem(variables, default_rules())


def _infer_array(
    system: FuzzySystem,
    sal: np.ndarray,
    edge: np.ndarray,
    inten: np.ndarray,
    chunk: int = 256,
) -> np.ndarray:
    """Vectorized Mamdani min-max inference with centroid defuzzification."""
    grid, sampled_sets, antecedents, consequents = system._tables
    inputs = (sal, edge, inten)
    degrees = np.stack(
        [
            np.stack([mf(values) for mf in variable.levels])
            for variable, values in zip(system.variables, inputs)
        ]
    )  # shape (variable, level, sample)
    strengths = np.minimum.reduce(
        [degrees[v][antecedents[:, v]] for v in range(3)]
    )  # shape (rule, sample)
    level_strength = np.zeros((len(OUTPUT_NAMES), sal.size))
    np.maximum.at(level_strength, consequents, strengths)

    midpoint = 0.5 * (grid[0] + grid[-1])
    out = np.empty(sal.size)
    for start in range(0, sal.size, chunk):
        ls = level_strength[:, start : start + chunk]
        clipped = np.minimum(ls[:, :, None], sampled_sets[:, None, :])
        aggregate = clipped.max(axis=0)  # (samples, grid)
        area = aggregate.sum(axis=1)
        moment = aggregate @ grid
        out[start : start + chunk] = np.where(area > 0.0, moment / np.maximum(area, 1e-300), midpoint)
    return out


def infer(system: FuzzySystem, saliency: float, edge: float, intensity: float) -> float:
    """Crisp importance of one feature triple; inputs must lie in [0, 1]."""
    values = np.array([saliency, edge, intensity], dtype=np.float64)
    if not np.all(np.isfinite(values)) or values.min() < 0.0 or values.max() > 1.0:
        raise ValueError(f"inputs must lie in [0, 1], got {values.tolist()}")
    return float(
        _infer_array(system, values[:1], values[1:2], values[2:3])[0]
    )


def fuzzy_map(features: FeatureMaps, system: FuzzySystem) -> BlockGrid:
    """Per-block inference over the three co-located feature values."""
    sal = features.saliency.values.ravel()
    edge = features.edge_concentration.values.ravel()
    inten = features.intensity.values.ravel()
    for name, arr in zip(VARIABLE_NAMES, (sal, edge, inten)):
        if arr.min() < 0.0 or arr.max() > 1.0:
            raise ValueError(f"{name} grid has values outside [0, 1]")
    values = _infer_array(system, sal, edge, inten)
    return BlockGrid(
        features.saliency.block_size,
        values.reshape(features.rows, features.cols),
    )


@dataclass(frozen=True, eq=False)
class WeightMap:
    """Strictly positive per-pixel weights entering the weighted MSE."""

    weights: np.ndarray

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=np.float64)
        if w.ndim != 2 or w.size == 0:
            raise ValueError("weight map must be a non-empty 2-D array")
        if not np.all(np.isfinite(w)) or float(w.min()) <= 0.0:
            raise ValueError("weights must be finite and strictly positive")
        object.__setattr__(self, "weights", _freeze(w))

    @property
    def height(self) -> int:
        return self.weights.shape[0]

    @property
    def width(self) -> int:
        return self.weights.shape[1]


def uniform_weight_map(width: int, height: int) -> WeightMap:
    return WeightMap(np.ones((height, width)))


def weight_map(
    fmap: BlockGrid,
    width: int,
    height: int,
    orientation: str = ORIENTATION_IMPORTANCE,
) -> WeightMap:
    """Pixel-resolution weights from a fuzzy output map, normalized to mean 1.

    With the default "importance" orientation large fuzzy values mean large
    weights, so distortion in important regions is penalized. The
    "embedding" orientation reflects the map (max + min - value), ranking
    blocks by suitability for embedding instead.
    """
    if orientation not in ORIENTATIONS:
        raise ValueError(f"orientation must be one of {ORIENTATIONS}")
    v = fmap.values
    if float(v.min()) <= 0.0:
        raise ValueError("fuzzy map values must be strictly positive")
    if orientation == ORIENTATION_EMBEDDING:
        v = (float(v.max()) + float(v.min())) - v
    field = upsample_nearest(BlockGrid(fmap.block_size, v), width, height)
    if float(field.max()) == float(field.min()):
        # a constant map normalizes to exactly 1 everywhere
        return WeightMap(np.ones_like(field))
    return WeightMap(field / field.mean())


def weight_map_for_image(
    img: GrayImage,
    system: FuzzySystem,
    orientation: str = ORIENTATION_IMPORTANCE,
    detector=None,
) -> WeightMap:
    """Full pipeline: features, fuzzy map, then the normalized weight map."""
    maps = compute_feature_maps(img, detector=detector)
    return weight_map(fuzzy_map(maps, system), img.width, img.height, orientation)


# ---------------------------------------------------------------------------
# Fuzzy c-means and data-driven edge memberships
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class FcmResult:
    """Converged state of a fuzzy c-means run.

    objective_path holds the value of sum(u^m * d^2) after every iteration,
    which is non-increasing for the standard alternating updates.
    """

    centers: np.ndarray
    memberships: np.ndarray
    objective_path: tuple[float, ...]

    @property
    def objective(self) -> float:
        return self.objective_path[-1]

    @property
    def iterations(self) -> int:
        return len(self.objective_path)


def fcm(
    data,
    k: int,
    m: float = 2.0,
    tol: float = 1e-6,
    max_iter: int = 300,
    seed: int = 0,
) -> FcmResult:
    """Fuzzy c-means on scalar data with deterministic quantile seeding.

    Memberships follow u_ij = 1 / sum_l (d_ij / d_il)^(2/(m-1)); a point
    coinciding with a center gets crisp membership there. Iteration stops
    when the largest center shift drops below tol or after max_iter rounds.
    """
    x = np.asarray(data, dtype=np.float64).ravel()
    if x.size == 0:
        raise ValueError("cannot cluster empty data")
    if not 1 <= k <= x.size:
        raise ValueError(f"cluster count {k} must be in [1, {x.size}]")
    if m <= 1.0:
        raise ValueError("fuzzifier m must be greater than 1")

    centers = np.quantile(x, (np.arange(k) + 0.5) / k)
    if np.unique(centers).size < k:
        # Duplicate samples can collapse quantiles; break ties reproducibly.
        rng = np.random.default_rng(seed)
        centers = centers + rng.normal(0.0, 1e-9, size=k)
        centers.sort()

    exponent = -1.0 / (m - 1.0)
    memberships = None
    path = []
    for _ in range(max_iter):
        memberships = _fcm_memberships(x, centers, exponent)
        um = memberships**m
        denom = um.sum(axis=0)
        new_centers = np.where(denom > 0.0, um.T @ x / np.maximum(denom, 1e-300), centers)
        shift = float(np.abs(new_centers - centers).max())
        centers = new_centers
        d2 = (x[:, None] - centers[None, :]) ** 2
        path.append(float((um * d2).sum()))
        if shift < tol:
            break
    memberships = _fcm_memberships(x, centers, exponent)
    return FcmResult(centers, memberships, tuple(path))


def _fcm_memberships(x: np.ndarray, centers: np.ndarray, exponent: float) -> np.ndarray:
    d2 = (x[:, None] - centers[None, :]) ** 2
    coincident = d2 == 0.0
    with np.errstate(divide="ignore"):
        inv = np.where(coincident, 0.0, d2) ** exponent
    inv[coincident] = 0.0
    u = inv / np.maximum(inv.sum(axis=1, keepdims=True), 1e-300)
    rows = coincident.any(axis=1)
    if rows.any():
        crisp = coincident[rows].astype(np.float64)
        u[rows] = crisp / crisp.sum(axis=1, keepdims=True)
    return u


def build_edge_memberships(samples, seed: int = 0) -> tuple[MembershipFunction, ...]:
    """Fit low/medium/high edge memberships from observed edge concentrations.

    Nine FCM clusters are fitted, a Gaussian is placed on each (center,
    membership-weighted std floored at 1e-3), and the clusters are split
    into three contiguous groups with the most balanced hard-assigned
    sample masses. Each group becomes the pointwise max of its Gaussians,
    sampled on a 256-point grid over [0, 1] and rescaled to peak 1.
    """
    x = np.asarray(samples, dtype=np.float64).ravel()
    if x.size < 27:
        raise ValueError(f"need at least 27 calibration samples, got {x.size}")
    if x.min() < 0.0 or x.max() > 1.0:
        raise ValueError("calibration samples must lie in [0, 1]")

    result = fcm(x, k=9, m=2.0, seed=seed)
    order = np.argsort(result.centers)
    centers = result.centers[order]
    u = result.memberships[:, order]

    stds = np.empty(9)
    for j in range(9):
        w = u[:, j]
        total = max(float(w.sum()), 1e-300)
        stds[j] = max(np.sqrt(float(w @ (x - centers[j]) ** 2) / total), 1e-3)

    hard = np.argmax(u, axis=1)
    masses = np.bincount(hard, minlength=9).astype(np.float64)

    best, best_spread = None, np.inf
    for a in range(1, 8):
        for b in range(a + 1, 9):
            group_masses = (masses[:a].sum(), masses[a:b].sum(), masses[b:].sum())
            spread = max(group_masses) - min(group_masses)
            if spread < best_spread:
                best, best_spread = (a, b), spread
    a, b = best

    grid = np.linspace(0.0, 1.0, 256)
    functions = []
    for lo, hi in ((0, a), (a, b), (b, 9)):
        gaussians = [
            np.exp(-((grid - centers[j]) ** 2) / (2.0 * stds[j] ** 2)) for j in range(lo, hi)
        ]
        envelope = np.maximum.reduce(gaussians)
        functions.append(MembershipFunction(grid, envelope / envelope.max()))
    return tuple(functions)


# ---------------------------------------------------------------------------
# JSON configuration
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class FuzzyConfig:
    system: FuzzySystem
    orientation: str


def system_to_config_dict(system: FuzzySystem, orientation: str = ORIENTATION_IMPORTANCE) -> dict:
    peaks = [float(x) for x in system.output_peaks]
    return {
        "memberships": {
            var.name: {
                level: mf.vertices() for level, mf in zip(LEVEL_NAMES, var.levels)
            }
            for var in system.variables
        },
        "rules": [
            {
                "saliency": r.saliency,
                "edge": r.edge,
                "intensity": r.intensity,
                "output": r.output,
            }
            for r in system.rules
        ],
        "output_peaks": peaks,
        "orientation": orientation,
    }


def load_fuzzy_config(path) -> FuzzyConfig:
    """Build a FuzzySystem (plus weight orientation) from a JSON config file."""
    raw = json.loads(Path(path).read_text())
    try:
        variables = tuple(
            FuzzyVariable(
                name,
                tuple(
                    MembershipFunction.from_vertices(raw["memberships"][name][level])
                    for level in LEVEL_NAMES
                ),
            )
            for name in VARIABLE_NAMES
        )
        rules = tuple(
            Rule(
                saliency=entry["saliency"],
                edge=entry["edge"],
                intensity=entry["intensity"],
                output=entry["output"],
            )
            for entry in raw["rules"]
        )
        peaks = tuple(raw["output_peaks"])
        orientation = raw.get("orientation", ORIENTATION_IMPORTANCE)
    except KeyError as exc:
        raise ValueError(f"{path}: missing config key {exc}") from exc
    if orientation not in ORIENTATIONS:
        raise ValueError(f"{path}: orientation must be one of {ORIENTATIONS}")
    return FuzzyConfig(FuzzySystem(variables, rules, peaks), orientation)
