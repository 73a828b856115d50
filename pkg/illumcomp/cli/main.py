"""
illumcomp command-line interface.

Subcommands:
    gen-data   write a synthetic corpus
    train      train (or resume) and write a checkpoint plus loss CSV
    compose    harmonize one foreground into one background
    eval       held-out metrics as JSON

Exit codes:
    0 success, 1 IO/storage failure, 2 validation failure,
    3 numerical failure (non-finite loss)

Examples:
    python -m illumcomp.cli gen-data --n-scenes 100 --seed 0 --out data/train
    python -m illumcomp.cli train --corpus data/train --out runs/a --set steps=10
    python -m illumcomp.cli train --resume runs/a/checkpoint.ckpt --out runs/a --set steps=10
    python -m illumcomp.cli compose --checkpoint runs/a/checkpoint.ckpt --bg bg.png --fg fg.png \\
        --mask mask.png --region region.json --sh sh.json --out out/
    python -m illumcomp.cli eval --checkpoint runs/a/checkpoint.ckpt --corpus data/test --out metrics.json
"""

import argparse
import json
import logging
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence

from illumcomp.config import Config
from illumcomp.config_loader import load_config
from illumcomp.core.ops import blend
from illumcomp.data.corpus import (
    IMAGE_RANGE,
    MASK_RANGE,
    load_corpus,
    load_png,
    load_region,
    save_png,
    write_manifest,
    write_scene,
)
from illumcomp.data.synth import SceneConfig, gen_scene
from illumcomp.geometry.stm import extract_local, inverse_warp_compose
from illumcomp.illumination.sh import load_sh
from illumcomp.models.checkpoint import load_checkpoint
from illumcomp.models.networks import generate
from illumcomp.training.config import TrainConfig
from illumcomp.training.evaluation import evaluate, generator_harmonizer, oracle_harmonizer
from illumcomp.training.trainer import init_state, load_state, prepare_sample, save_state, train, write_history
from illumcomp.utils.errors import ConfigValidationError, CorpusError, IllumCompError, ShapeMismatchError, StorageError
from illumcomp.utils.logging_config import setup_logging

logger = logging.getLogger("illumcomp.cli")

CHECKPOINT_NAME = "checkpoint.ckpt"
HISTORY_NAME = "loss.csv"


def _overrides(args: argparse.Namespace) -> List[str]:
    overrides = list(args.set or [])
    if args.seed is not None:
        overrides.append(f"seed={args.seed}")
    return overrides


def _ensure_dir(path: Path) -> Path:
    try:
        path.mkdir(parents=True, exist_ok=True)
    except OSError as e:
        raise StorageError(f"cannot create output directory: {e}", path=str(path))
    return path


# ============================================================================
# GEN-DATA
# ============================================================================

def _write_one(job: Dict[str, Any]) -> str:
    """Generate and write one scene (runs in a worker process)."""
    cfg = SceneConfig.model_validate(job["config"])
    return str(write_scene(Path(job["out"]), gen_scene(job["seed"], cfg)))


def cmd_gen_data(args: argparse.Namespace) -> int:
    """
    Write n scenes with seeds base_seed .. base_seed + n - 1 and a manifest.

    Output does not depend on the worker count.
    """
    if args.n_scenes < 1:
        raise ConfigValidationError("--n-scenes must be at least 1", key="n_scenes")
    set_items = list(args.set or [])
    cfg = load_config(SceneConfig, args.config, set_items)
    base_seed = args.seed if args.seed is not None else 0
    out = _ensure_dir(Path(args.out))
    seeds = [base_seed + i for i in range(args.n_scenes)]
    jobs = [{"seed": s, "config": cfg.model_dump(mode="json"), "out": str(out)} for s in seeds]

    workers = max(1, min(args.workers or Config.WORKERS, len(jobs)))
    logger.info(f"Generating {len(jobs)} scenes into {out} with {workers} worker(s)")
    if workers == 1:
        for job in jobs:
            _write_one(job)
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            list(pool.map(_write_one, jobs))

    write_manifest(out, cfg, base_seed, seeds)
    logger.info(f"Corpus written: {out}")
    return 0


# ============================================================================
# TRAIN
# ============================================================================

def cmd_train(args: argparse.Namespace) -> int:
    """
    Train from scratch, or resume from --resume, for config.steps further steps.

    A resumed run starts from the configuration stored in the checkpoint;
    --config and --set are applied on top of it.
    """
    base = load_checkpoint(Path(args.resume)).config if args.resume else None
    cfg = load_config(TrainConfig, args.config, _overrides(args), base=base)

    corpus = args.corpus or cfg.corpus
    if not corpus:
        raise ConfigValidationError("no corpus given (--corpus or the 'corpus' config key)", key="corpus")
    prepared = [prepare_sample(s, cfg) for s in load_corpus(Path(corpus), workers=args.workers)]

    state = load_state(Path(args.resume), cfg) if args.resume else init_state(cfg)
    out = _ensure_dir(Path(args.out))
    history_path = out / HISTORY_NAME
    train(state, prepared, cfg.steps, history_path=history_path)

    ckpt = save_state(out / CHECKPOINT_NAME, state)
    write_history(history_path, state)
    logger.info(f"Training finished at step {state.step}: {ckpt}, {history_path}")
    return 0


# ============================================================================
# COMPOSE
# ============================================================================

def cmd_compose(args: argparse.Namespace) -> int:
    """
    Write direct.png, local.png and global.png.

    direct.png is the unharmonized composite pasted into the background,
    local.png the harmonized local image, global.png the harmonized local
    image warped back into the background.
    """
    state = load_state(Path(args.checkpoint))
    cfg = state.config
    n = cfg.local_size

    bg = load_png(Path(args.bg), 3, IMAGE_RANGE)
    fg = load_png(Path(args.fg), 3, IMAGE_RANGE)
    mask = load_png(Path(args.mask), 1, MASK_RANGE)
    region, _ = load_region(Path(args.region))
    sh = load_sh(Path(args.sh))

    for name, image in (("fg", fg), ("mask", mask)):
        if image.shape[1:] != (n, n):
            raise ShapeMismatchError(f"{name} must be {n}x{n}, the local size of the checkpoint",
                                     shapes={name: image.shape})
    if sh.degree != cfg.sh_degree:
        raise ShapeMismatchError(f"SH degree {sh.degree} does not match the checkpoint ({cfg.sh_degree})")

    X_local = extract_local(bg, region, n).data
    direct_local = blend(fg, X_local, mask).data
    fg_content = fg * mask
    x_h = generate(state.generator, X_local, direct_local, sh, mask, fg_content, cfg.filter, cfg.ablation).x_h.data

    direct_global, _ = inverse_warp_compose(bg, direct_local, region)
    harmonized_global, _ = inverse_warp_compose(bg, x_h, region)

    out = _ensure_dir(Path(args.out))
    save_png(out / "direct.png", direct_global.data, IMAGE_RANGE)
    save_png(out / "local.png", x_h, IMAGE_RANGE)
    save_png(out / "global.png", harmonized_global.data, IMAGE_RANGE)
    logger.info(f"Wrote direct.png, local.png, global.png to {out}")
    return 0


# ============================================================================
# EVAL
# ============================================================================

def cmd_eval(args: argparse.Namespace) -> int:
    """Metrics JSON for a checkpoint (or the analytic oracle) on a corpus."""
    scenes = load_corpus(Path(args.corpus), workers=args.workers, limit=args.limit)
    if args.oracle:
        harmonizer = oracle_harmonizer
    else:
        if not args.checkpoint:
            raise ConfigValidationError("eval needs --checkpoint unless --oracle is given", key="checkpoint")
        state = load_state(Path(args.checkpoint))
        sizes = (scenes[0].image_size, scenes[0].local_size)
        if sizes != (state.config.image_size, state.config.local_size):
            raise CorpusError("corpus image sizes differ from the checkpoint configuration",
                              path=str(args.corpus), details={"corpus": list(sizes)})
        harmonizer = generator_harmonizer(state)

    metrics = evaluate(harmonizer, scenes)
    out = Path(args.out)
    _ensure_dir(out.parent)
    try:
        out.write_text(json.dumps(metrics.model_dump(), indent=2, sort_keys=True), encoding="utf-8")
    except OSError as e:
        raise StorageError(f"cannot write metrics: {e}", path=str(out))
    logger.info(f"Metrics written to {out}: identity {metrics.identity_loss_mean:.4f}, "
                f"median shadow error {metrics.shadow_angle_median_deg}")
    return 0


# ============================================================================
# PARSER / ENTRY POINT
# ============================================================================

def _common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", type=Path, default=None, help="JSON configuration file")
    parser.add_argument("--seed", type=int, default=None, help="Seed (overrides the config)")
    parser.add_argument("--set", action="append", metavar="KEY=VALUE",
                        help="Dotted configuration override, repeatable (e.g. loss_weights.lambda_G=2)")
    parser.add_argument("--workers", type=int, default=None, help="Worker count (default: ILLUMCOMP_WORKERS)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="illumcomp",
        description="Adversarial image composition with auxiliary illumination",
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog=__doc__.split("Examples:")[1],
    )
    parser.add_argument("--log-file", type=Path, default=None, help="Log file (default: <log dir>/illumcomp.log)")
    parser.add_argument("--verbose", action="store_true", help="Debug output on the console")
    sub = parser.add_subparsers(dest="command", required=True)

    gen = sub.add_parser("gen-data", help="Write a synthetic corpus")
    _common(gen)
    gen.add_argument("--n-scenes", type=int, required=True, help="Number of scenes")
    gen.add_argument("--out", required=True, help="Corpus directory")
    gen.set_defaults(handler=cmd_gen_data)

    tr = sub.add_parser("train", help="Train or resume")
    _common(tr)
    tr.add_argument("--corpus", default=None, help="Corpus directory (default: config 'corpus')")
    tr.add_argument("--resume", default=None, help="Checkpoint to resume from")
    tr.add_argument("--out", required=True, help="Output directory for checkpoint.ckpt and loss.csv")
    tr.set_defaults(handler=cmd_train)

    comp = sub.add_parser("compose", help="Harmonize one composite")
    comp.add_argument("--checkpoint", required=True)
    comp.add_argument("--bg", required=True, help="Background PNG (RGB)")
    comp.add_argument("--fg", required=True, help="Foreground PNG (RGB) at the local size")
    comp.add_argument("--mask", required=True, help="Foreground mask PNG (grayscale) at the local size")
    comp.add_argument("--region", required=True, help="region.json")
    comp.add_argument("--sh", required=True, help="sh.json")
    comp.add_argument("--out", required=True, help="Output directory")
    comp.set_defaults(handler=cmd_compose)

    ev = sub.add_parser("eval", help="Held-out metrics")
    ev.add_argument("--checkpoint", default=None)
    ev.add_argument("--corpus", required=True)
    ev.add_argument("--out", required=True, help="Metrics JSON path")
    ev.add_argument("--oracle", action="store_true", help="Score the analytic references instead of a generator")
    ev.add_argument("--limit", type=int, default=None, help="Evaluate only the first N scenes")
    ev.add_argument("--workers", type=int, default=None)
    ev.set_defaults(handler=cmd_eval)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    """Parse arguments, run the subcommand, map errors to exit codes."""
    args = build_parser().parse_args(argv)
    setup_logging("illumcomp", log_file=args.log_file,
                  console_level=logging.DEBUG if args.verbose else logging.INFO)
    try:
        return args.handler(args)
    except IllumCompError as e:
        logger.error(f"{args.command} failed [{e.error_code}]: {e.message}")
        logger.debug(f"error details: {e.to_dict()}")
        return e.exit_code
    except OSError as e:
        logger.error(f"{args.command} failed with an IO error: {e}")
        return 1
