"""
Test Suite for the spatial transformer (regions, homographies, warps).

Test Coverage:
- Region invariants and the eight-real file form
- Homography estimation: identity, pure scale, random quads, composition, degeneracy
- warp: identity, integer translation, round-trip PSNR, gradients, bad homographies
- inverse_warp_compose: round trip, mask algebra, background preservation, mask partition
- select_region: adjacency without overlap, exhaustion, determinism

Usage:
python -m pytest illumcomp/geometry/tests/test_stm.py -v
"""

import numpy as np
import pytest
from scipy.ndimage import binary_erosion

from illumcomp.core.gradcheck import grad_check
from illumcomp.geometry.stm import (
    UNIT_SQUARE,
    Homography,
    Region,
    estimate_homography,
    extract_local,
    inverse_warp_compose,
    mask_partition_violations,
    select_region,
    warp,
    warp_mask,
)
from illumcomp.utils.errors import (
    DegenerateQuadError,
    InvalidRegionError,
    NoRegionFoundError,
    NonInvertibleHomographyError,
)


def natural_image(size: int = 64, channels: int = 3) -> np.ndarray:
    """Smooth multi-frequency test image in [-1, 1]."""
    y, x = np.mgrid[0:size, 0:size] / size
    layers = [
        0.5 * np.sin(2.0 * np.pi * (x + 0.3 * ch)) * np.cos(3.0 * y) + 0.4 * np.cos(4.0 * x * y + ch)
        for ch in range(channels)
    ]
    return np.clip(np.stack(layers), -1.0, 1.0)


def psnr(a: np.ndarray, b: np.ndarray) -> float:
    """PSNR for images in [-1, 1] (peak-to-peak 2)."""
    mse = float(np.mean((a - b) ** 2))
    return float("inf") if mse == 0.0 else 10.0 * np.log10(4.0 / mse)


def random_quad(rng: np.random.Generator) -> np.ndarray:
    """Convex TL, TR, BR, BL quad: a jittered box."""
    cx, cy = rng.uniform(-0.3, 0.3, size=2)
    hw, hh = rng.uniform(0.3, 0.6, size=2)
    box = np.array([[cx - hw, cy + hh], [cx + hw, cy + hh], [cx + hw, cy - hh], [cx - hw, cy - hh]])
    return box + rng.uniform(-0.1, 0.1, size=(4, 2))


@pytest.fixture
def region() -> Region:
    return Region(vertices=[(-0.5, 0.4), (0.35, 0.45), (0.3, -0.5), (-0.45, -0.4)])


class TestRegion:
    """Region invariants."""

    def test_flat_round_trip(self, region: Region) -> None:
        assert Region.from_flat(region.to_flat()) == region

    def test_vertex_on_frame_rejected(self) -> None:
        with pytest.raises(InvalidRegionError):
            Region.from_box(-1.0, -0.5, 0.5, 0.5)

    def test_near_zero_area_rejected(self) -> None:
        with pytest.raises(InvalidRegionError):
            Region.from_box(0.0, 0.0, 1e-3, 1e-3)

    def test_bow_tie_rejected(self) -> None:
        with pytest.raises(InvalidRegionError):
            Region(vertices=[(-0.5, 0.5), (0.5, -0.5), (0.5, 0.5), (-0.5, -0.5)])

    def test_reversed_order_rejected(self) -> None:
        with pytest.raises(InvalidRegionError):
            Region(vertices=[(-0.5, -0.5), (0.5, -0.5), (0.5, 0.5), (-0.5, 0.5)])

    def test_wrong_length_rejected(self) -> None:
        with pytest.raises(InvalidRegionError):
            Region.from_flat([0.0] * 6)


class TestEstimateHomography:
    """Direct linear system solution."""

    def test_identity(self) -> None:
        h = estimate_homography(UNIT_SQUARE, UNIT_SQUARE)
        np.testing.assert_allclose(h.matrix, np.eye(3), atol=1e-14)

    def test_pure_scale(self) -> None:
        h = estimate_homography(Region.from_box(-0.5, -0.5, 0.5, 0.5), UNIT_SQUARE)
        np.testing.assert_allclose(h.matrix, np.diag([2.0, 2.0, 1.0]), atol=1e-14)

    def test_random_pairs_residual(self) -> None:
        rng = np.random.default_rng(0)
        worst = 0.0
        for _ in range(100):
            src, dst = random_quad(rng), random_quad(rng)
            h = estimate_homography(src, dst)
            worst = max(worst, float(np.max(np.abs(h.apply(src) - dst))))
        assert worst < 1e-9

    def test_composition(self) -> None:
        rng = np.random.default_rng(1)
        for _ in range(20):
            a, b, c = random_quad(rng), random_quad(rng), random_quad(rng)
            chained = estimate_homography(b, c).compose(estimate_homography(a, b))
            np.testing.assert_allclose(chained.matrix, estimate_homography(a, c).matrix, atol=1e-6)

    def test_collinear_vertices(self) -> None:
        quad = np.array([[-0.5, 0.5], [0.0, 0.5], [0.5, 0.5], [-0.5, -0.5]])
        with pytest.raises(DegenerateQuadError):
            estimate_homography(quad, UNIT_SQUARE)

    def test_accepts_regions(self, region: Region) -> None:
        h = estimate_homography(region, UNIT_SQUARE)
        np.testing.assert_allclose(h.apply(region.as_array()), UNIT_SQUARE, atol=1e-12)
        assert h.matrix[2, 2] == 1.0


class TestWarp:
    """Inverse-mapped bilinear warping."""

    def test_identity_exact(self) -> None:
        img = natural_image(16)
        np.testing.assert_array_equal(warp(img, Homography.identity(), 16, 16).data, img)

    def test_integer_translation(self) -> None:
        img = natural_image(16)
        shift = Homography([[1.0, 0.0, 2.0 * 3 / 16], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]])
        out = warp(img, shift, 16, 16).data
        np.testing.assert_array_equal(out[:, :, 3:], img[:, :, :-3])
        np.testing.assert_array_equal(out[:, :, :3], 0.0)

    def test_round_trip_psnr(self) -> None:
        img = natural_image(64)
        quad = np.array([[-0.9, 0.85], [0.95, 0.9], [0.85, -0.95], [-0.95, -0.85]])
        h = estimate_homography(UNIT_SQUARE, quad)
        back = warp(warp(img, h, 64, 64), h.inverse(), 64, 64).data
        assert psnr(back[:, 16:48, 16:48], img[:, 16:48, 16:48]) > 35.0

    def test_singular_homography(self) -> None:
        with pytest.raises(NonInvertibleHomographyError):
            warp(natural_image(8), Homography(np.diag([1.0, 0.0, 1.0])), 8, 8)

    def test_ill_conditioned_homography(self) -> None:
        with pytest.raises(NonInvertibleHomographyError):
            warp(natural_image(8), Homography(np.diag([1.0, 1e-9, 1.0])), 8, 8)

    @pytest.mark.parametrize("seed", range(10))
    def test_gradient(self, seed: int) -> None:
        rng = np.random.default_rng(seed)
        img = rng.normal(size=(2, 8, 8))
        h = estimate_homography(UNIT_SQUARE, random_quad(rng))
        w = rng.normal(size=(2, 6, 6))
        report = grad_check(lambda t: (warp(t, h, 6, 6) * w).sum(), img)
        assert report.passed, report.message


class TestInverseWarpCompose:
    """Masked global composite."""

    def test_round_trip(self, region: Region) -> None:
        bg = natural_image(64)
        local = extract_local(bg, region, 32)
        composite, mask = inverse_warp_compose(bg, local, region)
        interior = binary_erosion(mask.data[0] == 1.0, iterations=2)
        assert interior.sum() > 200
        assert psnr(composite.data[:, interior], bg[:, interior]) > 35.0

    def test_zero_local(self, region: Region) -> None:
        bg = natural_image(32)
        composite, mask = inverse_warp_compose(bg, np.zeros((3, 16, 16)), region)
        outside = mask.data[0] == 0.0
        inside = mask.data[0] == 1.0
        np.testing.assert_array_equal(composite.data[:, outside], bg[:, outside])
        np.testing.assert_array_equal(composite.data[:, inside], 0.0)

    def test_background_bit_preserved(self, region: Region) -> None:
        rng = np.random.default_rng(3)
        bg = rng.normal(size=(3, 32, 32))
        composite, mask = inverse_warp_compose(bg, rng.normal(size=(3, 16, 16)), region)
        outside = mask.data[0] == 0.0
        assert np.array_equal(composite.data[:, outside].view(np.int64), bg[:, outside].view(np.int64))

    def test_mask_partition(self, region: Region) -> None:
        mask = warp_mask(region, 48, 48)
        fractional = (mask > 0.0) & (mask < 1.0)
        assert 0 < fractional.sum() < 0.2 * mask.size
        assert mask_partition_violations(mask, region) == 0

    def test_partition_violation_detected(self, region: Region) -> None:
        mask = warp_mask(region, 32, 32)
        mask[0, 0, 0] = 0.5
        assert mask_partition_violations(mask, region) == 1

    def test_gradients(self, region: Region) -> None:
        rng = np.random.default_rng(5)
        bg = rng.normal(size=(1, 12, 12))
        local = rng.normal(size=(1, 8, 8))
        w = rng.normal(size=(1, 12, 12))
        r_local = grad_check(lambda t: (inverse_warp_compose(bg, t, region)[0] * w).sum(), local)
        r_bg = grad_check(lambda t: (inverse_warp_compose(t, local, region)[0] * w).sum(), bg)
        assert r_local.passed, r_local.message
        assert r_bg.passed, r_bg.message


class TestSelectRegion:
    """Insertion-region placement."""

    def test_single_centered_bbox(self) -> None:
        bbox = (-0.15, -0.3, 0.15, 0.2)
        region = select_region([bbox], fg_aspect=0.6, rng_seed=4)
        x0, y0, x1, y1 = region.bounds()
        overlap_w = min(x1, bbox[2]) - max(x0, bbox[0])
        overlap_h = min(y1, bbox[3]) - max(y0, bbox[1])
        assert overlap_w <= 0.0 or overlap_h <= 0.0
        assert y0 == pytest.approx(bbox[1])
        assert (x1 - x0) / (y1 - y0) == pytest.approx(0.6, rel=0.1)

    def test_tiled_image(self) -> None:
        tiles = [(-1.0, -1.0, 0.0, 0.0), (0.0, -1.0, 1.0, 0.0), (-1.0, 0.0, 0.0, 1.0), (0.0, 0.0, 1.0, 1.0)]
        with pytest.raises(NoRegionFoundError):
            select_region(tiles, fg_aspect=1.0, rng_seed=0)

    def test_empty_scene_deterministic(self) -> None:
        first = select_region([], fg_aspect=0.8, rng_seed=11)
        second = select_region([], fg_aspect=0.8, rng_seed=11)
        assert first == second

    def test_never_overlaps(self) -> None:
        boxes = [(-0.8, -0.6, -0.5, -0.1), (0.4, -0.5, 0.7, 0.0)]
        for seed in range(30):
            try:
                region = select_region(boxes, fg_aspect=0.7, rng_seed=seed)
            except NoRegionFoundError:
                continue
            x0, y0, x1, y1 = region.bounds()
            for b in boxes:
                assert min(x1, b[2]) - max(x0, b[0]) <= 0.0 or min(y1, b[3]) - max(y0, b[1]) <= 0.0

    def test_ground_offset(self) -> None:
        bbox = (-0.05, -0.5, 0.05, -0.2)
        region = select_region([bbox], fg_aspect=1.0, rng_seed=4, scale=2.0, ground_offset=0.25)
        x0, y0, x1, y1 = region.bounds()
        assert y0 + 0.25 * (y1 - y0) == pytest.approx(bbox[1])
