"""
Held-out evaluation: shadow direction, identity loss and mask auditing.

A harmonizer maps (sample, background, composite, fg_content) to a local
image [3, n, n]. It is called twice per scene: on the direct pair
(X, x) for the shadow-direction measurement and on the real pair (Y, y)
for the identity loss.

Shadow direction: pixels outside the foreground mask that the harmonizer
made darker than the direct composite by more than DARKEN_THRESHOLD (mean
over channels) form the generated shadow. Its axis runs from the foreground
mask centroid to the centroid of those pixels. The reference axis is
measured the same way on the analytic real image y.
The generated axis is also compared with the light direction projected onto
the ground plane (light_axis), reported as a second statistic.
"""

import logging
import math
from typing import Callable, List, Optional, Sequence

import numpy as np
from pydantic import BaseModel, Field

from illumcomp.data.synth import CompositeSample, shadow_offset
from illumcomp.geometry.stm import extract_local, inverse_warp_compose, mask_partition_violations
from illumcomp.models.networks import generate
from illumcomp.training.losses import identity_loss
from illumcomp.training.trainer import TrainState
from illumcomp.utils.errors import ValidationError

logger = logging.getLogger(__name__)

DARKEN_THRESHOLD = 0.05

Harmonizer = Callable[[CompositeSample, np.ndarray, np.ndarray, np.ndarray], np.ndarray]


class ShadowDirectionStats(BaseModel):
    """Angular error of generated shadows against the analytic reference."""

    angles_deg: List[float] = Field(default_factory=list, description="Per evaluated scene")
    median_deg: Optional[float] = None
    mean_deg: Optional[float] = None
    no_shadow_count: int = Field(default=0, description="Scenes without darkened pixels")
    no_reference_count: int = Field(default=0, description="Scenes whose reference shadow is hidden")
    light_angles_deg: List[float] = Field(default_factory=list,
                                          description="Generated axis against the projected light direction")
    light_median_deg: Optional[float] = None

    @property
    def detected(self) -> int:
        return len(self.angles_deg)


class EvalMetrics(BaseModel):
    """Metrics written by the eval command."""

    n_scenes: int
    identity_loss_mean: float
    shadow_angle_median_deg: Optional[float]
    shadow_angle_mean_deg: Optional[float]
    shadow_detected: int
    no_shadow_count: int
    no_reference_count: int
    shadow_light_angle_median_deg: Optional[float]
    mask_partition_violations: int


# ============================================================================
# HARMONIZERS
# ============================================================================

def generator_harmonizer(state: TrainState) -> Harmonizer:
    """Harmonize with a snapshot of the state's generator."""
    params = state.generator.copy()
    cfg = state.config

    def harmonize(sample: CompositeSample, background: np.ndarray, composite: np.ndarray,
                  fg_content: np.ndarray) -> np.ndarray:
        return generate(params, background, composite, sample.gt_sh, sample.m_f, fg_content,
                        cfg.filter, cfg.ablation).x_h.data

    return harmonize


def oracle_harmonizer(sample: CompositeSample, background: np.ndarray, composite: np.ndarray,
                      fg_content: np.ndarray) -> np.ndarray:
    """The analytic real image, whatever the input."""
    return sample.y


def direct_harmonizer(sample: CompositeSample, background: np.ndarray, composite: np.ndarray,
                      fg_content: np.ndarray) -> np.ndarray:
    """Returns the composite unchanged (no shadow)."""
    return composite


# ============================================================================
# SHADOW DIRECTION
# ============================================================================

def shadow_axis(
    composite: np.ndarray,
    harmonized: np.ndarray,
    m_f: np.ndarray,
    threshold: float = DARKEN_THRESHOLD
) -> Optional[np.ndarray]:
    """
    Axis (dx, dy) from the foreground centroid to the darkened-pixel centroid.

    x points right and y up. Returns None when no pixel outside the mask is
    darker than the composite by more than threshold, or the mask is empty.
    """
    darker = (np.mean(composite - harmonized, axis=0) > threshold) & (m_f[0] < 0.5)
    fg_rows, fg_cols = np.nonzero(m_f[0] >= 0.5)
    if not darker.any() or fg_rows.size == 0:
        return None
    rows, cols = np.nonzero(darker)
    axis = np.array([cols.mean() - fg_cols.mean(), fg_rows.mean() - rows.mean()])
    return axis if np.any(axis != 0.0) else None


def light_axis(light_dir: Sequence[float]) -> Optional[np.ndarray]:
    """Ground shadow direction of a light as an image axis (x right, y up); None for overhead light."""
    d_col, d_row = shadow_offset(light_dir)
    axis = np.array([d_col, -d_row])
    return axis if np.any(axis != 0.0) else None


def axis_angle_deg(a: np.ndarray, b: np.ndarray) -> float:
    """Unsigned angle between two 2-D axes, in [0, 180]."""
    diff = math.atan2(a[1], a[0]) - math.atan2(b[1], b[0])
    return abs(math.degrees(math.atan2(math.sin(diff), math.cos(diff))))


def evaluate_shadow_direction(
    harmonizer: Harmonizer,
    scenes: Sequence[CompositeSample],
    threshold: float = DARKEN_THRESHOLD
) -> ShadowDirectionStats:
    """
    Angular error between generated and reference shadow axes.

    Args:
        harmonizer: Local harmonization function
        scenes: Held-out samples with analytic references
        threshold: Darkening threshold

    Returns:
        ShadowDirectionStats; scenes without generated shadow are counted
        in no_shadow_count, scenes whose reference shadow is invisible in
        no_reference_count
    """
    stats = ShadowDirectionStats()
    for sample in scenes:
        reference = shadow_axis(sample.x, sample.y, sample.m_f, threshold)
        if reference is None:
            stats.no_reference_count += 1
            logger.warning(f"scene {sample.seed}: reference shadow not visible, skipped")
            continue
        generated = shadow_axis(sample.x, harmonizer(sample, sample.X_local, sample.x, sample.fg_content),
                                sample.m_f, threshold)
        if generated is None:
            stats.no_shadow_count += 1
            continue
        stats.angles_deg.append(axis_angle_deg(generated, reference))
        projected = light_axis(sample.gt_light_dir)
        if projected is not None:
            stats.light_angles_deg.append(axis_angle_deg(generated, projected))

    if stats.angles_deg:
        stats.median_deg = float(np.median(stats.angles_deg))
        stats.mean_deg = float(np.mean(stats.angles_deg))
    if stats.light_angles_deg:
        stats.light_median_deg = float(np.median(stats.light_angles_deg))
    logger.info(f"Shadow direction: {stats.detected} detected, {stats.no_shadow_count} without shadow, "
                f"median error {stats.median_deg}")
    return stats


# ============================================================================
# FULL EVALUATION
# ============================================================================

def evaluate(harmonizer: Harmonizer, scenes: Sequence[CompositeSample]) -> EvalMetrics:
    """
    Identity loss, shadow direction and mask-partition audit over scenes.

    Raises:
        ValidationError: When scenes is empty
    """
    if not scenes:
        raise ValidationError("evaluation needs at least one scene")

    identity = []
    violations = 0
    for sample in scenes:
        n = sample.local_size
        Y_local = extract_local(sample.Y, sample.region, n).data
        real_out = harmonizer(sample, Y_local, sample.y, sample.y * sample.m_f)
        identity.append(identity_loss(real_out, sample.y).item())

        fake = harmonizer(sample, sample.X_local, sample.x, sample.fg_content)
        _, m_X = inverse_warp_compose(sample.bg, fake, sample.region)
        violations += mask_partition_violations(m_X.data, sample.region)
        violations += mask_partition_violations(sample.m_Y, sample.region)

    direction = evaluate_shadow_direction(harmonizer, scenes)
    metrics = EvalMetrics(
        n_scenes=len(scenes),
        identity_loss_mean=float(np.mean(identity)),
        shadow_angle_median_deg=direction.median_deg,
        shadow_angle_mean_deg=direction.mean_deg,
        shadow_detected=direction.detected,
        no_shadow_count=direction.no_shadow_count,
        no_reference_count=direction.no_reference_count,
        shadow_light_angle_median_deg=direction.light_median_deg,
        mask_partition_violations=violations,
    )
    if violations:
        logger.warning(f"{violations} mask-partition violations")
    return metrics
