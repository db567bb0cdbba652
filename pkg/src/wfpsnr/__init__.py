"""Human-visual-system-weighted fuzzy PSNR for grayscale image pairs."""

from .image_core import (
    BlockGrid,
    GrayImage,
    MalformedHeaderError,
    PgmError,
    RegionMask,
    TruncatedPayloadError,
    UnsupportedFormatError,
    block_reduce,
    load_pgm,
    resize_bilinear,
    save_pgm,
    upsample_nearest,
)
from .features import (
    EdgeMap,
    FeatureMaps,
    canny,
    combine_detectors,
    compute_feature_maps,
    edge_concentration,
    edge_variance_grid,
    intensity_map,
    saliency,
    spectral_residual,
)
from .fuzzy_engine import (
    FcmResult,
    FuzzyConfig,
    FuzzySystem,
    FuzzyVariable,
    MembershipFunction,
    Rule,
    WeightMap,
    build_edge_memberships,
    default_memberships,
    default_rules,
    default_system,
    fcm,
    fuzzy_map,
    infer,
    load_fuzzy_config,
    uniform_weight_map,
    weight_map,
    weight_map_for_image,
)
from .metrics import (
    DimensionMismatchError,
    ScoreReport,
    fmse,
    mse,
    psnr,
    score_images,
    wfpsnr,
)
from .watermark import (
    AttackSpec,
    DegenerateWeightMapError,
    EmbedSpec,
    ExperimentResult,
    ExperimentRow,
    attack,
    dct2,
    decile_regions,
    embed,
    idct2,
    rows_to_csv,
    run_experiment,
    zigzag_positions,
)
from .synthetic import synthetic_image

__version__ = "0.1.0"
