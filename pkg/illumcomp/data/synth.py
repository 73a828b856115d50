"""
Synthetic scenes with analytic shadows and illumination.

Each scene is a flat ground plane under a sky gradient, lit by one
directional light plus ambient. Distractor objects cast hard shadows onto the
ground, a foreground sprite is inserted into a region next to one of them,
and the "real" references carry the sprite's own analytic shadow.

World frame (shared with the SH panorama): x to screen right, y into the
scene, z up. A light at azimuth phi and elevation e has direction
(cos e cos phi, cos e sin phi, sin e). Depth is foreshortened by
DEPTH_FORESHORTENING when projected onto image rows.
"""

import logging
import math
from typing import List, Sequence, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

from illumcomp.core.ops import box_filter, blend
from illumcomp.core.tensor import ArrayLike, Tensor, as_tensor
from illumcomp.geometry.stm import Region, extract_local, inverse_warp_compose, select_region
from illumcomp.illumination.sh import SHCoefficients, light_panorama, project_to_sh
from illumcomp.utils.errors import NearHorizontalLightError, NoRegionFoundError, ShapeMismatchError, ValidationError

logger = logging.getLogger(__name__)

MIN_LIGHT_ELEVATION_DEG = 5.0
DEPTH_FORESHORTENING = 0.5


# ============================================================================
# CONFIGURATION
# ============================================================================

class SceneConfig(BaseModel):
    """Scene generator settings."""

    model_config = ConfigDict(extra="forbid")

    image_size: int = Field(default=64, ge=16, description="Global image size N")
    local_size: int = Field(default=32, ge=8, description="Local patch size n")
    sprite_size: int = Field(default=16, ge=4, description="Foreground sprite size s")
    elevation_range: Tuple[float, float] = Field(default=(20.0, 70.0), description="Light elevation, degrees")
    distractor_range: Tuple[int, int] = Field(default=(1, 3), description="Inclusive distractor count range")
    attenuation: float = Field(default=0.5, ge=0.0, le=1.0)
    soft_edge: int = Field(default=1, ge=0, description="Shadow edge softening radius, px")
    horizon: float = Field(default=0.4, gt=0.0, lt=1.0, description="Horizon row as a fraction of N")
    panorama_height: int = Field(default=64, ge=8)
    panorama_width: int = Field(default=128, ge=8)
    sh_degree: int = Field(default=2, ge=1)
    light_intensity: float = Field(default=3.0, gt=0.0)
    ambient: float = Field(default=0.3, ge=0.0)

    @model_validator(mode="after")
    def _consistent(self) -> "SceneConfig":
        lo, hi = self.elevation_range
        if not MIN_LIGHT_ELEVATION_DEG < lo <= hi <= 90.0:
            raise ValueError(f"elevation_range must satisfy {MIN_LIGHT_ELEVATION_DEG} < lo <= hi <= 90")
        if not 0 <= self.distractor_range[0] <= self.distractor_range[1]:
            raise ValueError("distractor_range must satisfy 0 <= lo <= hi")
        if self.sprite_size > self.local_size:
            raise ValueError("sprite_size must not exceed local_size")
        if self.local_size > self.image_size:
            raise ValueError("local_size must not exceed image_size")
        return self


class CompositeSample(BaseModel):
    """
    One synthetic scene with its direct composite and shadowed references.

    Images are float64 arrays in [-1, 1]; masks are in [0, 1].

    Attributes:
        seed (int): Scene seed
        bg (np.ndarray): Global background [3, N, N]
        fg (np.ndarray): Foreground sprite colour [3, s, s]
        fg_alpha (np.ndarray): Sprite alpha [1, s, s]
        m_f (np.ndarray): Foreground mask on the local patch [1, n, n]
        region (Region): Insertion region in the global frame
        x (np.ndarray): Direct composite [3, n, n]
        X_local (np.ndarray): Local background, the region warped to [3, n, n]
        y (np.ndarray): Real local image with the analytic shadow [3, n, n]
        Y (np.ndarray): Real global image [3, N, N]
        m_Y (np.ndarray): Embedding mask of the region [1, N, N]
        gt_sh (SHCoefficients): Ground-truth illumination
        gt_light_dir (np.ndarray): Unit light direction
        bboxes (List[Tuple[float, float, float, float]]): Distractor boxes
    """

    model_config = ConfigDict(arbitrary_types_allowed=True)

    seed: int
    bg: np.ndarray
    fg: np.ndarray
    fg_alpha: np.ndarray
    m_f: np.ndarray
    region: Region
    x: np.ndarray
    X_local: np.ndarray
    y: np.ndarray
    Y: np.ndarray
    m_Y: np.ndarray
    gt_sh: SHCoefficients
    gt_light_dir: np.ndarray
    bboxes: List[Tuple[float, float, float, float]] = Field(default_factory=list)

    @model_validator(mode="after")
    def _shapes(self) -> "CompositeSample":
        n = self.x.shape[-1]
        big = self.bg.shape[-1]
        expected = {
            "bg": (3, big, big), "Y": (3, big, big), "m_Y": (1, big, big),
            "x": (3, n, n), "X_local": (3, n, n), "y": (3, n, n), "m_f": (1, n, n),
        }
        for name, shape in expected.items():
            if getattr(self, name).shape != shape:
                raise ValueError(f"{name} has shape {getattr(self, name).shape}, expected {shape}")
        if self.fg.shape[0] != 3 or self.fg_alpha.shape != (1,) + self.fg.shape[1:]:
            raise ValueError("fg must be [3, s, s] with alpha [1, s, s]")
        return self

    @property
    def image_size(self) -> int:
        return int(self.bg.shape[-1])

    @property
    def local_size(self) -> int:
        return int(self.x.shape[-1])

    @property
    def fg_content(self) -> np.ndarray:
        """Foreground colour as placed on the local patch, x * m_f."""
        return self.x * self.m_f


# ============================================================================
# LIGHT AND SHADOW GEOMETRY
# ============================================================================

def light_direction(azimuth: float, elevation: float) -> np.ndarray:
    """Unit direction towards the light for angles in radians."""
    return np.array([
        math.cos(elevation) * math.cos(azimuth),
        math.cos(elevation) * math.sin(azimuth),
        math.sin(elevation),
    ])


def sample_light(rng: np.random.Generator, cfg: SceneConfig) -> Tuple[float, float]:
    """Draw (azimuth, elevation) in radians: azimuth uniform on [0, 2pi)."""
    azimuth = float(rng.uniform(0.0, 2.0 * math.pi))
    elevation = math.radians(float(rng.uniform(*cfg.elevation_range)))
    return azimuth, elevation


def shadow_offset(light_dir: Sequence[float]) -> Tuple[float, float]:
    """
    Image-plane displacement (d_col, d_row) of a shadow point per pixel of height.

    Raises:
        NearHorizontalLightError: When the light is within 5 degrees of the horizon
    """
    d = np.asarray(light_dir, dtype=np.float64)
    norm = float(np.linalg.norm(d))
    if norm == 0.0 or not np.isfinite(norm):
        raise ValidationError("light direction must be a finite non-zero vector",
                              details={"light_dir": [float(v) for v in d]})
    d = d / norm
    elevation = math.degrees(math.asin(max(-1.0, min(1.0, d[2]))))
    if elevation <= MIN_LIGHT_ELEVATION_DEG:
        raise NearHorizontalLightError(
            f"light elevation {elevation:.2f} deg gives an unbounded shadow",
            details={"elevation_deg": elevation}
        )
    horizontal = math.hypot(d[0], d[1])
    if horizontal == 0.0:
        return 0.0, 0.0
    cot = horizontal / d[2]
    return -d[0] / horizontal * cot, DEPTH_FORESHORTENING * d[1] / horizontal * cot


def render_shadow(
    object_mask: ArrayLike,
    light_dir: Sequence[float],
    ground_y: int,
    attenuation: float,
    soft_edge: int = 0
) -> Tensor:
    """
    Analytic cast shadow of an object standing on a ground row.

    Every object pixel at height h = ground_y - row above the ground line is
    projected to (ground_y + d_row * h, col + d_col * h), the light's
    image-plane shear scaled by cot(elevation). Heights are sub-sampled so
    long shadows stay connected.

    Args:
        object_mask: Object mask [1, H, W] (pixels > 0.5 are the object)
        light_dir: Direction towards the light
        ground_y: Row of the object's foot
        attenuation: Darkening inside the shadow, in [0, 1]
        soft_edge: Box-blur radius applied to the shadow edge

    Returns:
        Multiplicative map [1, H, W]: 1 outside the shadow, 1 - attenuation inside

    Raises:
        NearHorizontalLightError: When the light elevation is <= 5 degrees
    """
    mask = as_tensor(object_mask).data
    if mask.ndim != 3 or mask.shape[0] != 1:
        raise ShapeMismatchError("object mask must be [1, H, W]", shapes={"object_mask": mask.shape})
    if not 0.0 <= attenuation <= 1.0:
        raise ValidationError(f"attenuation must be in [0, 1], got {attenuation}")
    _, height, width = mask.shape
    if not 0 <= ground_y < height:
        raise ValidationError(f"ground_y {ground_y} outside [0, {height})", details={"ground_y": ground_y})

    d_col, d_row = shadow_offset(light_dir)
    rows, cols = np.nonzero(mask[0] > 0.5)
    keep = rows <= ground_y
    rows, cols = rows[keep], cols[keep]

    samples = int(math.ceil(2.0 * max(1.0, math.hypot(d_col, d_row))))
    sub = (np.arange(samples) + 0.5) / samples - 0.5
    h = np.clip((ground_y - rows)[:, None] + sub[None, :], 0.0, None)
    target_r = np.rint(ground_y + d_row * h).astype(np.int64).ravel()
    target_c = np.rint(cols[:, None] + d_col * h).astype(np.int64).ravel()
    inside = (target_r >= 0) & (target_r < height) & (target_c >= 0) & (target_c < width)

    layer = np.zeros((1, height, width))
    layer[0, target_r[inside], target_c[inside]] = 1.0
    if soft_edge > 0:
        layer = np.maximum(layer, box_filter(layer, soft_edge).data)
    return Tensor(1.0 - attenuation * layer)


def apply_shadow(image: np.ndarray, shadow_map: np.ndarray) -> np.ndarray:
    """Darken an image in [-1, 1] by a multiplicative map; pixels with map 1 are copied exactly."""
    return np.where(shadow_map < 1.0, (image + 1.0) * shadow_map - 1.0, image)


# ============================================================================
# SCENE CONTENT
# ============================================================================

def _background(rng: np.random.Generator, cfg: SceneConfig, elevation: float) -> Tuple[np.ndarray, np.ndarray]:
    """Sky gradient over textured ground; returns (image [3, N, N], ground mask [N, N])."""
    size = cfg.image_size
    horizon_row = int(round(cfg.horizon * size))
    rows = np.arange(size, dtype=np.float64)[:, None]

    sky_top = rng.uniform(0.45, 0.75, size=3)
    sky_bottom = rng.uniform(0.75, 0.95, size=3)
    t = np.clip(rows / max(horizon_row - 1, 1), 0.0, 1.0)
    sky = sky_top[:, None, None] + (sky_bottom - sky_top)[:, None, None] * t[None]

    brightness = 0.6 + 0.4 * math.sin(elevation)
    ground_base = rng.uniform(0.35, 0.65, size=3) * brightness
    depth = np.clip((rows - horizon_row) / max(size - horizon_row, 1), 0.0, 1.0)
    texture = rng.uniform(-0.03, 0.03, size=(size, size))
    ground = ground_base[:, None, None] * (0.85 + 0.15 * depth)[None] + texture[None]

    ground_mask = np.broadcast_to(rows >= horizon_row, (size, size))
    img01 = np.where(ground_mask[None], ground, np.broadcast_to(sky, (3, size, size)))
    return np.clip(img01, 0.0, 1.0) * 2.0 - 1.0, ground_mask.astype(np.float64)


def _object_mask(rng: np.random.Generator, height: int, width: int) -> np.ndarray:
    """Box or ellipse silhouette filling a height x width cell."""
    if rng.uniform() < 0.5:
        return np.ones((height, width), dtype=bool)
    r = (np.arange(height) + 0.5 - height / 2.0) / (height / 2.0)
    c = (np.arange(width) + 0.5 - width / 2.0) / (width / 2.0)
    return (r[:, None] ** 2 + c[None, :] ** 2) <= 1.0


def _pixel_box_to_normalized(top: int, left: int, bottom: int, right: int, size: int) -> Tuple[float, float, float, float]:
    """Inclusive pixel bounds -> normalized (x0, y0, x1, y1) with y up."""
    return (2.0 * left / size - 1.0, 1.0 - 2.0 * (bottom + 1) / size,
            2.0 * (right + 1) / size - 1.0, 1.0 - 2.0 * top / size)


def _place_distractors(
    rng: np.random.Generator,
    cfg: SceneConfig,
    image: np.ndarray,
    ground_mask: np.ndarray,
    light_dir: np.ndarray
) -> Tuple[np.ndarray, List[Tuple[float, float, float, float]]]:
    size = cfg.image_size
    horizon_row = int(round(cfg.horizon * size))
    count = int(rng.integers(cfg.distractor_range[0], cfg.distractor_range[1] + 1))

    objects = []
    for _ in range(count):
        obj_h = int(rng.integers(max(size // 8, 3), max(size // 4, 4) + 1))
        obj_w = int(rng.integers(max(obj_h // 3, 2), max(obj_h // 2, 2) + 2))
        foot = int(rng.integers(horizon_row + 2, size - 2))
        left = int(rng.integers(1, size - obj_w - 1))
        colour = rng.uniform(0.1, 0.9, size=3) * 2.0 - 1.0
        silhouette = _object_mask(rng, obj_h, obj_w)

        top = foot - obj_h + 1
        mask = np.zeros((1, size, size), dtype=bool)
        clipped = max(top, 0)
        mask[0, clipped:foot + 1, left:left + obj_w] = silhouette[clipped - top:]
        objects.append((mask, colour, foot, (clipped, left, foot, left + obj_w - 1)))

    for mask, _, foot, _ in objects:
        shadow = render_shadow(mask.astype(np.float64), light_dir, foot, cfg.attenuation, cfg.soft_edge).data
        shadow = 1.0 - (1.0 - shadow) * ground_mask[None]
        image = apply_shadow(image, shadow)
    for mask, colour, _, _ in objects:
        image = np.where(mask, colour[:, None, None], image)

    bboxes = [_pixel_box_to_normalized(*bounds, size) for _, _, _, bounds in objects]
    return image, bboxes


def _sprite(rng: np.random.Generator, size: int) -> Tuple[np.ndarray, np.ndarray]:
    """Upright elliptical sprite whose lowest pixel row is the bottom row."""
    top = int(rng.integers(0, max(size // 4, 1)))
    half_w = size * float(rng.uniform(0.2, 0.35))
    half_h = (size - top) / 2.0
    r = (np.arange(size) + 0.5 - (top + half_h))[:, None] / half_h
    c = (np.arange(size) + 0.5 - size / 2.0)[None, :] / half_w
    alpha = ((r ** 2 + c ** 2) <= 1.0).astype(np.float64)

    colour = rng.uniform(0.15, 0.85, size=3)
    shade = 0.8 + 0.2 * np.linspace(1.0, 0.0, size)[:, None]
    fg = np.clip(colour[:, None, None] * shade[None], 0.0, 1.0) * 2.0 - 1.0
    return np.broadcast_to(fg, (3, size, size)).copy(), alpha[None]


# ============================================================================
# SCENE GENERATION
# ============================================================================

def gen_scene(seed: int, cfg: SceneConfig) -> CompositeSample:
    """
    Generate one deterministic scene.

    Args:
        seed: Scene seed; the sample is a pure function of (seed, cfg)
        cfg: Scene configuration

    Returns:
        CompositeSample
    """
    rng = np.random.default_rng(seed)
    azimuth, elevation = sample_light(rng, cfg)
    light_dir = light_direction(azimuth, elevation)

    tint = rng.uniform(0.85, 1.0, size=3)
    env = light_panorama(light_dir, cfg.light_intensity * tint, cfg.ambient * np.ones(3),
                         cfg.panorama_height, cfg.panorama_width)
    gt_sh = project_to_sh(env, cfg.sh_degree)

    bg, ground_mask = _background(rng, cfg, elevation)
    bg, bboxes = _place_distractors(rng, cfg, bg, ground_mask, light_dir)

    n, s = cfg.local_size, cfg.sprite_size
    fg, fg_alpha = _sprite(rng, s)
    offset = (n - s) // 2
    foot = offset + s - 1
    fg_local = np.zeros((3, n, n))
    fg_local[:, offset:offset + s, offset:offset + s] = fg
    m_f = np.zeros((1, n, n))
    m_f[:, offset:offset + s, offset:offset + s] = fg_alpha

    region_seed = int(rng.integers(2 ** 31))
    try:
        region = select_region(bboxes, fg_aspect=1.0, rng_seed=region_seed,
                               scale=n / s, ground_offset=(n - foot - 1) / n)
    except NoRegionFoundError:
        logger.warning(f"scene {seed}: no region next to a distractor, placing freely")
        region = select_region([], fg_aspect=1.0, rng_seed=region_seed)

    X_local = extract_local(bg, region, n).data
    x = blend(fg_local, X_local, m_f).data

    local_ground = extract_local(ground_mask[None], region, n).data > 0.5
    shadow = render_shadow(m_f, light_dir, foot, cfg.attenuation, cfg.soft_edge).data
    shadow = np.where(local_ground, shadow, 1.0)
    y = blend(fg_local, apply_shadow(X_local, shadow), m_f).data

    Y, m_Y = inverse_warp_compose(bg, y, region)

    logger.debug(f"scene {seed}: azimuth {math.degrees(azimuth):.1f}, elevation "
                 f"{math.degrees(elevation):.1f}, {len(bboxes)} distractors")
    return CompositeSample(
        seed=seed, bg=bg, fg=fg, fg_alpha=fg_alpha, m_f=m_f, region=region,
        x=x, X_local=X_local, y=y, Y=Y.data, m_Y=m_Y.data,
        gt_sh=gt_sh, gt_light_dir=light_dir, bboxes=bboxes,
    )
