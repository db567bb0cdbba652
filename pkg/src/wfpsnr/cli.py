"""Command-line front end: score, map, features, embed, attack, experiment.

stdout carries only machine-readable payloads; diagnostics go to stderr.
Exit codes: 0 success, 2 I/O failure, 3 dimension mismatch, 1 anything else.
Runs are fully deterministic for fixed inputs, flags, and seed.
"""

from __future__ import annotations

import argparse
import sys
from importlib import resources
from pathlib import Path

import numpy as np

from .features import compute_feature_maps
from .fuzzy_engine import (
    FuzzyConfig,
    ORIENTATION_IMPORTANCE,
    ORIENTATIONS,
    default_system,
    fuzzy_map,
    load_fuzzy_config,
    weight_map,
)
from .image_core import GrayImage, PgmError, RegionMask, load_pgm, save_pgm, upsample_nearest
from .metrics import DimensionMismatchError, score_images
from .watermark import (
    ATTACK_GAUSSIAN,
    ATTACK_SALT_PEPPER,
    AttackSpec,
    DEFAULT_BLOCK_FRACTION,
    DEFAULT_EMBED_STRENGTH,
    EmbedSpec,
    attack,
    embed,
    rows_to_csv,
    run_experiment,
)

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_IO = 2
EXIT_DIMENSIONS = 3

DEFAULT_SEED = 42


def _load_config(args) -> FuzzyConfig:
    if args.config is not None:
        return load_fuzzy_config(args.config)
    return FuzzyConfig(default_system(), ORIENTATION_IMPORTANCE)


def _orientation(args, config: FuzzyConfig) -> str:
    return args.orientation if args.orientation is not None else config.orientation


def _weights_for(img: GrayImage, args):
    config = _load_config(args)
    maps = compute_feature_maps(img)
    fmap = fuzzy_map(maps, config.system)
    return maps, fmap, weight_map(fmap, img.width, img.height, _orientation(args, config))


def _grid_to_pgm_image(values: np.ndarray) -> GrayImage:
    """Affine min-max map to [0, 1] for visualization; constant maps go mid-gray."""
    lo, hi = float(values.min()), float(values.max())
    if hi == lo:
        return GrayImage(np.full(values.shape, 128.0 / 255.0))
    return GrayImage((values - lo) / (hi - lo))


def _load_region(path) -> RegionMask:
    mask_img = load_pgm(path)
    return RegionMask(mask_img.pixels >= 0.5)


def cmd_score(args) -> int:
    ref = load_pgm(args.ref)
    test = load_pgm(args.test)
    if ref.pixels.shape != test.pixels.shape:
        raise DimensionMismatchError(
            f"{args.ref} is {ref.width}x{ref.height} but {args.test} is {test.width}x{test.height}"
        )
    _, _, weights = _weights_for(ref, args)
    print(score_images(ref, test, weights).to_json())
    return EXIT_OK


def cmd_map(args) -> int:
    img = load_pgm(args.input)
    maps, _, weights = _weights_for(img, args)
    save_pgm(_grid_to_pgm_image(weights.weights), args.out)
    if args.dump_features is not None:
        _dump_feature_pgms(img, maps, Path(args.dump_features))
    return EXIT_OK


def cmd_features(args) -> int:
    img = load_pgm(args.input)
    maps = compute_feature_maps(img)
    _dump_feature_pgms(img, maps, Path(args.out_dir))
    return EXIT_OK


def _dump_feature_pgms(img: GrayImage, maps, directory: Path) -> None:
    directory.mkdir(parents=True, exist_ok=True)
    named = {
        "saliency": maps.saliency,
        "edge_concentration": maps.edge_concentration,
        "intensity": maps.intensity,
    }
    for name, grid in named.items():
        field = upsample_nearest(grid, img.width, img.height)
        save_pgm(_grid_to_pgm_image(field), directory / f"{name}.pgm")


def cmd_embed(args) -> int:
    img = load_pgm(args.input)
    spec = EmbedSpec(
        block_size=args.block_size,
        strength=args.strength,
        block_fraction=args.fraction,
        region=_load_region(args.region) if args.region else None,
        seed=args.seed,
    )
    save_pgm(embed(img, spec), args.out)
    return EXIT_OK


def cmd_attack(args) -> int:
    img = load_pgm(args.input)
    spec = AttackSpec(
        kind=args.kind,
        param=args.param,
        region=_load_region(args.region) if args.region else None,
        seed=args.seed,
    )
    save_pgm(attack(img, spec), args.out)
    return EXIT_OK


def cmd_experiment(args) -> int:
    img = load_pgm(args.input)
    config = _load_config(args)
    pairs = []
    specs = [
        (ATTACK_SALT_PEPPER, args.sp_density),
        (ATTACK_GAUSSIAN, args.gn_std),
    ]
    for i, (kind, param) in enumerate(specs):
        important = AttackSpec(kind=kind, param=param, seed=args.seed + i)
        nonimportant = AttackSpec(kind=kind, param=param, seed=args.seed + i)
        pairs.append((important, nonimportant))
    result = run_experiment(img, config.system, pairs, _orientation(args, config))
    Path(args.out_csv).write_text(rows_to_csv(result.rows))
    summary = result.summary_json()
    Path(args.out_json).write_text(summary + "\n")
    print(summary)
    return EXIT_OK


def default_config_path() -> Path:
    """Path of the shipped fuzzy-system configuration."""
    return Path(str(resources.files("wfpsnr").joinpath("data/default_fuzzy.json")))


def bundled_image_path() -> Path:
    """Path of the shipped synthetic test image."""
    return Path(str(resources.files("wfpsnr").joinpath("data/synthetic_256.pgm")))


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=DEFAULT_SEED, help="RNG seed (default 42)")
    common.add_argument("--config", default=None, help="fuzzy-system JSON config file")
    common.add_argument(
        "--orientation",
        choices=ORIENTATIONS,
        default=None,
        help="weight orientation (default: importance, or the config value)",
    )

    parser = argparse.ArgumentParser(
        prog="wfpsnr",
        description="Weighted fuzzy PSNR scoring and watermark-attack evaluation",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("score", parents=[common], help="score a test image against a reference")
    p.add_argument("--ref", required=True)
    p.add_argument("--test", required=True)
    p.set_defaults(func=cmd_score)

    p = sub.add_parser("map", parents=[common], help="write the weight map as a PGM")
    p.add_argument("--input", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--dump-features", default=None, metavar="DIR")
    p.set_defaults(func=cmd_map)

    p = sub.add_parser("features", parents=[common], help="dump the three feature maps as PGMs")
    p.add_argument("--input", required=True)
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=cmd_features)

    p = sub.add_parser("embed", parents=[common], help="additive mid-band DCT embedding")
    p.add_argument("--input", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--block-size", type=int, default=16)
    p.add_argument("--strength", type=float, default=DEFAULT_EMBED_STRENGTH)
    p.add_argument("--fraction", type=float, default=DEFAULT_BLOCK_FRACTION)
    p.add_argument("--region", default=None, help="PGM mask; samples >= 0.5 are in the region")
    p.set_defaults(func=cmd_embed)

    p = sub.add_parser("attack", parents=[common], help="salt-pepper or gaussian degradation")
    p.add_argument("--input", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--kind", choices=(ATTACK_SALT_PEPPER, ATTACK_GAUSSIAN), required=True)
    p.add_argument("--param", type=float, required=True)
    p.add_argument("--region", default=None, help="PGM mask; samples >= 0.5 are in the region")
    p.set_defaults(func=cmd_attack)

    p = sub.add_parser(
        "experiment",
        parents=[common],
        help="two-phase attack protocol on important vs non-important regions",
    )
    p.add_argument("--input", required=True)
    p.add_argument("--out-csv", required=True)
    p.add_argument("--out-json", required=True)
    p.add_argument("--sp-density", type=float, default=0.05)
    p.add_argument("--gn-std", type=float, default=0.05)
    p.set_defaults(func=cmd_experiment)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except DimensionMismatchError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DIMENSIONS
    except (OSError, PgmError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
