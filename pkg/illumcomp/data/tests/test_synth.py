"""
Test Suite for synthetic scene generation.

Test Coverage:
- render_shadow geometry: zenith footprint, 45-degree length, monotonic in elevation
- Near-horizontal lights rejected
- gen_scene determinism, shapes and composite invariants
- Ground-truth SH agrees with the sampled light direction
- Light from screen-left casts shadows to the right
- Azimuths uniform over [0, 2pi) (chi-square over 16 bins)

Usage:
python -m pytest illumcomp/data/tests/test_synth.py -v
"""

import math

import numpy as np
import pytest
from pydantic import ValidationError as PydanticValidationError
from scipy.stats import chisquare

from illumcomp.core.ops import blend
from illumcomp.data import synth
from illumcomp.data.synth import (
    SceneConfig,
    gen_scene,
    light_direction,
    render_shadow,
    sample_light,
)
from illumcomp.geometry.stm import extract_local
from illumcomp.illumination.sh import dominant_light_direction
from illumcomp.utils.errors import NearHorizontalLightError

SMALL = SceneConfig(image_size=32, local_size=16, sprite_size=8, panorama_height=32, panorama_width=64)


def bar_mask(size: int, col: int, top: int, bottom: int) -> np.ndarray:
    mask = np.zeros((1, size, size))
    mask[0, top:bottom + 1, col] = 1.0
    return mask


def shadow_extent(shadow_map: np.ndarray) -> int:
    _, cols = np.nonzero(shadow_map[0] < 1.0)
    return int(cols.max() - cols.min() + 1)


def angle_deg(a: np.ndarray, b: np.ndarray) -> float:
    cos = float(a @ b / (np.linalg.norm(a) * np.linalg.norm(b)))
    return math.degrees(math.acos(max(-1.0, min(1.0, cos))))


# ============================================================================
# SHADOW ORACLE
# ============================================================================

class TestRenderShadow:
    """Analytic shadow projection."""

    def test_zenith_footprint(self) -> None:
        shadow = render_shadow(bar_mask(32, 8, 10, 19), [0.0, 0.0, 1.0], 19, 0.5).data
        rows, cols = np.nonzero(shadow[0] < 1.0)
        assert set(rows) == {19}
        assert set(cols) == {8}

    def test_45_degrees_matches_height(self) -> None:
        light = light_direction(math.pi, math.radians(45.0))
        shadow = render_shadow(bar_mask(32, 8, 10, 19), light, 19, 0.5).data
        _, cols = np.nonzero(shadow[0] < 1.0)
        assert shadow_extent(shadow) == 10
        assert cols.min() == 8

    def test_lower_elevation_is_longer(self) -> None:
        mask = bar_mask(48, 40, 21, 30)
        lengths = [
            shadow_extent(render_shadow(mask, light_direction(0.0, math.radians(e)), 30, 0.5).data)
            for e in (15.0, 25.0, 35.0, 45.0, 60.0, 75.0)
        ]
        assert all(a > b for a, b in zip(lengths, lengths[1:]))

    def test_attenuation_and_soft_edge(self) -> None:
        light = light_direction(math.pi, math.radians(45.0))
        hard = render_shadow(bar_mask(32, 8, 10, 19), light, 19, 0.5).data
        soft = render_shadow(bar_mask(32, 8, 10, 19), light, 19, 0.5, soft_edge=1).data
        assert hard.min() == pytest.approx(0.5)
        assert np.all(soft[hard < 1.0] == pytest.approx(0.5))
        fractional = (soft > 0.5) & (soft < 1.0)
        assert np.any(fractional)

    @pytest.mark.parametrize("elevation", [4.99, 2.0, 0.0, -10.0])
    def test_near_horizontal_rejected(self, elevation: float) -> None:
        with pytest.raises(NearHorizontalLightError):
            render_shadow(bar_mask(32, 8, 10, 19), light_direction(0.0, math.radians(elevation)), 19, 0.5)


# ============================================================================
# SCENES
# ============================================================================

class TestGenScene:
    """Scene generation and its invariants."""

    def test_deterministic(self) -> None:
        a, b = gen_scene(3, SMALL), gen_scene(3, SMALL)
        for name in ("bg", "fg", "fg_alpha", "m_f", "x", "X_local", "y", "Y", "m_Y", "gt_light_dir"):
            assert np.array_equal(getattr(a, name), getattr(b, name)), name
        assert a.region == b.region
        assert np.array_equal(a.gt_sh.coeffs, b.gt_sh.coeffs)

    def test_seeds_differ(self) -> None:
        assert not np.array_equal(gen_scene(1, SMALL).bg, gen_scene(2, SMALL).bg)

    def test_shapes(self) -> None:
        sample = gen_scene(0, SMALL)
        assert sample.bg.shape == (3, 32, 32)
        assert sample.x.shape == (3, 16, 16)
        assert sample.m_f.shape == (1, 16, 16)
        assert sample.fg.shape == (3, 8, 8)
        assert sample.m_Y.shape == (1, 32, 32)
        assert 1 <= len(sample.bboxes) <= 3
        assert np.all(np.abs(sample.x) <= 1.0)

    def test_direct_composite(self) -> None:
        sample = gen_scene(5, SMALL)
        background = extract_local(sample.bg, sample.region, 16).data
        fg_local = np.zeros((3, 16, 16))
        fg_local[:, 4:12, 4:12] = sample.fg
        assert np.array_equal(sample.X_local, background)
        assert np.array_equal(sample.x, blend(fg_local, background, sample.m_f).data)

    @pytest.mark.parametrize("seed", [0, 1, 2, 3])
    def test_real_differs_only_by_shadow(self, seed: int) -> None:
        sample = gen_scene(seed, SMALL)
        shadow = render_shadow(sample.m_f, sample.gt_light_dir, 11, SMALL.attenuation, SMALL.soft_edge).data
        support = (shadow[0] < 1.0) | (sample.m_f[0] > 0.0)
        assert np.array_equal(sample.y[:, ~support], sample.x[:, ~support])
        assert np.all(sample.y[:, ~(sample.m_f[0] > 0.0)] <= sample.x[:, ~(sample.m_f[0] > 0.0)])

    def test_real_global_keeps_background(self) -> None:
        sample = gen_scene(4, SMALL)
        outside = sample.m_Y[0] == 0.0
        assert np.array_equal(sample.Y[:, outside], sample.bg[:, outside])

    @pytest.mark.parametrize("seed", range(6))
    def test_sh_matches_light(self, seed: int) -> None:
        sample = gen_scene(seed, SceneConfig(image_size=32, local_size=16, sprite_size=8))
        assert np.linalg.norm(sample.gt_light_dir) == pytest.approx(1.0)
        assert angle_deg(dominant_light_direction(sample.gt_sh), sample.gt_light_dir) < 5.0

    def test_light_from_left_shadows_right(self, monkeypatch: pytest.MonkeyPatch) -> None:
        monkeypatch.setattr(synth, "sample_light", lambda rng, cfg: (math.pi, math.radians(45.0)))
        cfg = SceneConfig(image_size=32, local_size=16, sprite_size=8, distractor_range=(1, 1), soft_edge=0)
        unlit = cfg.model_copy(update={"attenuation": 0.0})
        for seed in range(5):
            shadowed, plain = gen_scene(seed, cfg), gen_scene(seed, unlit)
            _, cols = np.nonzero(np.any(shadowed.bg < plain.bg - 1e-12, axis=0))
            assert cols.size > 0
            x0, _, x1, _ = shadowed.bboxes[0]
            centre_col = ((x0 + x1) / 2.0 + 1.0) / 2.0 * 32
            assert cols.mean() > centre_col

    def test_azimuths_uniform(self) -> None:
        azimuths = [sample_light(np.random.default_rng(seed), SMALL)[0] for seed in range(1000)]
        counts, _ = np.histogram(azimuths, bins=16, range=(0.0, 2.0 * math.pi))
        assert chisquare(counts).pvalue > 0.01

    def test_scene_uses_sampled_light(self) -> None:
        azimuth, elevation = sample_light(np.random.default_rng(7), SMALL)
        assert np.allclose(gen_scene(7, SMALL).gt_light_dir, light_direction(azimuth, elevation))


class TestSceneConfig:
    """Configuration validation."""

    def test_defaults(self) -> None:
        cfg = SceneConfig()
        assert (cfg.image_size, cfg.local_size, cfg.sprite_size) == (64, 32, 16)
        assert cfg.attenuation == 0.5

    @pytest.mark.parametrize("update", [
        {"elevation_range": (3.0, 40.0)},
        {"elevation_range": (50.0, 40.0)},
        {"sprite_size": 40},
        {"distractor_range": (3, 1)},
        {"unknown_key": 1},
    ])
    def test_invalid(self, update: dict) -> None:
        with pytest.raises(PydanticValidationError):
            SceneConfig(**{**SMALL.model_dump(), **update})
