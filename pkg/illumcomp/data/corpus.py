"""
Corpus directory IO.

Layout:
    <root>/manifest.json
    <root>/scene_<seed>/bg.png fg.png m_f.png x.png y.png Y.png m_Y.png
                        region.json sh.json

Colour images are 8-bit RGB mapped linearly from [-1, 1]; fg.png carries the
sprite alpha in its fourth channel; masks are 8-bit grayscale mapped from
[0, 1]. The local background X is not stored: it is re-extracted from bg.png
and the region on load.
"""

import hashlib
import json
import logging
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np
from PIL import Image

from illumcomp.config import Config
from illumcomp.data.synth import CompositeSample, SceneConfig
from illumcomp.geometry.stm import Region, extract_local
from illumcomp.illumination.sh import dominant_light_direction, load_sh, save_sh
from illumcomp.utils.errors import (
    CorpusError,
    IllumCompError,
    InvalidRegionError,
    ShapeMismatchError,
    StorageError,
)

logger = logging.getLogger(__name__)

MANIFEST_NAME = "manifest.json"
IMAGE_RANGE = (-1.0, 1.0)
MASK_RANGE = (0.0, 1.0)
SCENE_FILES = ("bg.png", "fg.png", "m_f.png", "x.png", "y.png", "Y.png", "m_Y.png", "region.json", "sh.json")


# ============================================================================
# PNG CODEC
# ============================================================================

def to_uint8(values: np.ndarray, value_range: Tuple[float, float] = IMAGE_RANGE) -> np.ndarray:
    """Map [C, H, W] floats linearly onto 0..255 (clipped, rounded)."""
    lo, hi = value_range
    scaled = (np.asarray(values, dtype=np.float64) - lo) / (hi - lo) * 255.0
    return np.clip(np.rint(scaled), 0, 255).astype(np.uint8)


def from_uint8(values: np.ndarray, value_range: Tuple[float, float] = IMAGE_RANGE) -> np.ndarray:
    lo, hi = value_range
    return values.astype(np.float64) / 255.0 * (hi - lo) + lo


def save_png(path: Path, values: np.ndarray, value_range: Tuple[float, float] = IMAGE_RANGE) -> None:
    """
    Write a [C, H, W] array (C = 1, 3 or 4) as an 8-bit PNG.

    Raises:
        ShapeMismatchError: On unsupported channel counts
        StorageError: On filesystem errors
    """
    values = np.asarray(values)
    if values.ndim != 3 or values.shape[0] not in (1, 3, 4):
        raise ShapeMismatchError("PNG arrays must be [1|3|4, H, W]", shapes={"array": values.shape})
    pixels = to_uint8(values, value_range)
    image = Image.fromarray(pixels[0]) if pixels.shape[0] == 1 else Image.fromarray(np.moveaxis(pixels, 0, -1))
    try:
        image.save(Path(path), format="PNG")
    except OSError as e:
        raise StorageError(f"cannot write PNG: {e}", path=str(path))


def load_png(path: Path, channels: int, value_range: Tuple[float, float] = IMAGE_RANGE) -> np.ndarray:
    """
    Read an 8-bit PNG into a [channels, H, W] float array.

    Raises:
        StorageError: When the file is missing or unreadable
        ShapeMismatchError: When the channel count differs
    """
    try:
        with Image.open(Path(path)) as image:
            pixels = np.asarray(image)
    except OSError as e:
        raise StorageError(f"cannot read PNG: {e}", path=str(path))
    pixels = pixels[None] if pixels.ndim == 2 else np.moveaxis(pixels, -1, 0)
    if pixels.shape[0] != channels:
        raise ShapeMismatchError(f"{Path(path).name} must have {channels} channel(s)",
                                 shapes={"image": pixels.shape})
    return from_uint8(pixels, value_range)


# ============================================================================
# REGION FILE
# ============================================================================

def save_region(path: Path, region: Region, **extra: Any) -> None:
    payload = {"region": region.to_flat(), **extra}
    try:
        Path(path).write_text(json.dumps(payload, indent=2, sort_keys=True), encoding="utf-8")
    except OSError as e:
        raise StorageError(f"cannot write region file: {e}", path=str(path))


def load_region(path: Path) -> Tuple[Region, Dict[str, Any]]:
    """Read region.json; returns the Region and the whole payload."""
    try:
        payload = json.loads(Path(path).read_text(encoding="utf-8"))
    except OSError as e:
        raise StorageError(f"cannot read region file: {e}", path=str(path))
    except json.JSONDecodeError as e:
        raise InvalidRegionError(f"region file is not valid JSON: {e}", details={"path": str(path)})
    if not isinstance(payload, dict) or "region" not in payload:
        raise InvalidRegionError("region file needs a 'region' entry", details={"path": str(path)})
    return Region.from_flat(payload["region"]), payload


# ============================================================================
# SCENES
# ============================================================================

def scene_dir_name(seed: int) -> str:
    return f"scene_{seed}"


def write_scene(root: Path, sample: CompositeSample) -> Path:
    """Write one sample in the corpus layout; returns the scene directory."""
    scene = Path(root) / scene_dir_name(sample.seed)
    try:
        scene.mkdir(parents=True, exist_ok=True)
    except OSError as e:
        raise StorageError(f"cannot create scene directory: {e}", path=str(scene))

    save_png(scene / "bg.png", sample.bg)
    rgba = np.concatenate([to_uint8(sample.fg), to_uint8(sample.fg_alpha, MASK_RANGE)], axis=0)
    save_png(scene / "fg.png", rgba, value_range=(0.0, 255.0))
    save_png(scene / "m_f.png", sample.m_f, MASK_RANGE)
    save_png(scene / "x.png", sample.x)
    save_png(scene / "y.png", sample.y)
    save_png(scene / "Y.png", sample.Y)
    save_png(scene / "m_Y.png", sample.m_Y, MASK_RANGE)
    save_region(scene / "region.json", sample.region,
                light_dir=[float(v) for v in sample.gt_light_dir],
                bboxes=[list(b) for b in sample.bboxes],
                scene_seed=sample.seed)
    save_sh(scene / "sh.json", sample.gt_sh)
    return scene


def load_scene(scene: Path) -> CompositeSample:
    """
    Read one scene directory.

    Raises:
        CorpusError: When files are missing or inconsistent
    """
    scene = Path(scene)
    missing = [name for name in SCENE_FILES if not (scene / name).is_file()]
    if missing:
        raise CorpusError(f"scene is missing {missing}", path=str(scene))

    try:
        region, payload = load_region(scene / "region.json")
        gt_sh = load_sh(scene / "sh.json")
        bg = load_png(scene / "bg.png", 3)
        fg_rgba = load_png(scene / "fg.png", 4, value_range=(0.0, 255.0))
        x = load_png(scene / "x.png", 3)
        light_dir = (np.asarray(payload["light_dir"], dtype=np.float64)
                     if "light_dir" in payload else dominant_light_direction(gt_sh))
        return CompositeSample(
            seed=int(payload.get("scene_seed", -1)),
            bg=bg,
            fg=from_uint8(fg_rgba[:3].astype(np.uint8)),
            fg_alpha=from_uint8(fg_rgba[3:].astype(np.uint8), MASK_RANGE),
            m_f=load_png(scene / "m_f.png", 1, MASK_RANGE),
            region=region,
            x=x,
            X_local=extract_local(bg, region, x.shape[-1]).data,
            y=load_png(scene / "y.png", 3),
            Y=load_png(scene / "Y.png", 3),
            m_Y=load_png(scene / "m_Y.png", 1, MASK_RANGE),
            gt_sh=gt_sh,
            gt_light_dir=light_dir,
            bboxes=[tuple(b) for b in payload.get("bboxes", [])],
        )
    except CorpusError:
        raise
    except (IllumCompError, ValueError) as e:
        raise CorpusError(f"invalid scene: {e}", path=str(scene))


# ============================================================================
# MANIFEST / CORPUS
# ============================================================================

def config_hash(cfg: SceneConfig) -> str:
    """SHA-256 of the canonical JSON of a scene configuration."""
    canonical = json.dumps(cfg.model_dump(mode="json"), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


def write_manifest(root: Path, cfg: SceneConfig, base_seed: int, seeds: Sequence[int]) -> Path:
    manifest = {
        "n_scenes": len(seeds),
        "base_seed": int(base_seed),
        "scene_config": cfg.model_dump(mode="json"),
        "config_hash": config_hash(cfg),
        "image_format": Config.IMAGE_FORMAT,
        "mask_format": Config.MASK_FORMAT,
        "scenes": [scene_dir_name(s) for s in seeds],
    }
    path = Path(root) / MANIFEST_NAME
    try:
        path.write_text(json.dumps(manifest, indent=2, sort_keys=True), encoding="utf-8")
    except OSError as e:
        raise StorageError(f"cannot write manifest: {e}", path=str(path))
    return path


def load_manifest(root: Path) -> Dict[str, Any]:
    path = Path(root) / MANIFEST_NAME
    if not path.is_file():
        raise CorpusError("corpus has no manifest.json", path=str(root))
    try:
        return json.loads(path.read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as e:
        raise CorpusError(f"unreadable manifest: {e}", path=str(path))


def load_corpus(root: Path, workers: Optional[int] = None, limit: Optional[int] = None) -> List[CompositeSample]:
    """
    Load every scene listed in the manifest, in manifest order.

    Args:
        root: Corpus directory
        workers: Reader threads (default: Config.WORKERS)
        limit: Load only the first `limit` scenes

    Raises:
        CorpusError: Missing manifest, no scenes, a listed scene missing,
            or scenes of differing sizes
    """
    root = Path(root)
    manifest = load_manifest(root)
    names = list(manifest.get("scenes", []))
    if limit is not None:
        names = names[:limit]
    if not names:
        raise CorpusError("corpus contains no scenes", path=str(root))

    with ThreadPoolExecutor(max_workers=workers or Config.WORKERS) as pool:
        samples = list(pool.map(load_scene, [root / name for name in names]))

    sizes = {(s.image_size, s.local_size) for s in samples}
    if len(sizes) != 1:
        raise CorpusError("scenes differ in image sizes", path=str(root), details={"sizes": sorted(sizes)})
    logger.info(f"Loaded {len(samples)} scenes from {root}")
    return samples
