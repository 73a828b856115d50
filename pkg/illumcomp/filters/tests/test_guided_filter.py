"""
Test Suite for the guided feature filter.

Test Coverage:
- Fast path vs brute-force per-window regression (100 random 16x16 instances, radii 0-4)
- Closed-form cases: S = C identity, constant S, dominant regularizer
- Shift-equivariance away from the border
- Gradients w.r.t. content and style, shape validation

Usage:
python -m pytest illumcomp/filters/tests/test_guided_filter.py -v
"""

import numpy as np
import pytest

from illumcomp.core.gradcheck import grad_check
from illumcomp.core.ops import box_filter
from illumcomp.core.tensor import Tensor
from illumcomp.filters.guided_filter import FilterConfig, guided_filter, guided_filter_bruteforce
from illumcomp.utils.errors import ShapeMismatchError


def random_pair(seed: int, shape=(1, 16, 16)):
    rng = np.random.default_rng(seed)
    return rng.uniform(-1.0, 1.0, size=shape), rng.uniform(-1.0, 1.0, size=shape)


class TestOracleEquivalence:
    """Box-filter closed form against direct per-window least squares."""

    @pytest.mark.parametrize("radius", [0, 1, 2, 3, 4])
    def test_random_instances(self, radius: int) -> None:
        cfg = FilterConfig(radius=radius, epsilon=0.1)
        worst = 0.0
        for seed in range(20):
            content, style = random_pair(100 * radius + seed)
            fast = guided_filter(content, style, cfg).data
            slow = guided_filter_bruteforce(content, style, cfg).data
            worst = max(worst, float(np.max(np.abs(fast - slow))))
        assert worst <= 1e-10

    def test_reference_sized_instance(self) -> None:
        """Random 8x8 C and S, radius 2, eps 0.1."""
        content, style = random_pair(5, shape=(1, 8, 8))
        cfg = FilterConfig(radius=2, epsilon=0.1)
        np.testing.assert_allclose(
            guided_filter(content, style, cfg).data,
            guided_filter_bruteforce(content, style, cfg).data,
            rtol=0, atol=1e-10
        )

    def test_channels_independent(self) -> None:
        content, style = random_pair(9, shape=(3, 10, 12))
        cfg = FilterConfig(radius=2, epsilon=0.05)
        full = guided_filter(content, style, cfg).data
        for ch in range(3):
            single = guided_filter(content[ch:ch + 1], style[ch:ch + 1], cfg).data
            np.testing.assert_array_equal(full[ch:ch + 1], single)


class TestClosedForms:
    """Cases with an analytic answer."""

    @pytest.mark.parametrize("radius", [0, 1, 3])
    def test_style_equals_content(self, radius: int) -> None:
        """S = C fits a=1, b=0 so the content passes through."""
        content, _ = random_pair(radius)
        cfg = FilterConfig(radius=radius, epsilon=1e-12)
        np.testing.assert_allclose(guided_filter(content, content, cfg).data, content, atol=1e-6)
        np.testing.assert_allclose(guided_filter_bruteforce(content, content, cfg).data, content, atol=1e-6)

    @pytest.mark.parametrize("value,epsilon", [
        (0.3, 0.01), (0.1, 0.0), (0.3, 0.0), (0.7, 0.0), (-0.45, 0.0),
    ])
    @pytest.mark.parametrize("filter_fn", [guided_filter, guided_filter_bruteforce])
    def test_constant_style(self, filter_fn, value: float, epsilon: float) -> None:
        """Zero style covariance leaves the double window mean of C, also without regularizer."""
        content, _ = random_pair(3, shape=(2, 16, 16))
        style = np.full_like(content, value)
        cfg = FilterConfig(radius=2, epsilon=epsilon)
        expected = box_filter(box_filter(content, 2), 2).data
        np.testing.assert_allclose(filter_fn(content, style, cfg).data, expected, rtol=0, atol=1e-12)

    def test_zero_style_zero_epsilon(self) -> None:
        """S = 0 with eps = 0 is well defined and exact."""
        content, _ = random_pair(4)
        cfg = FilterConfig(radius=1, epsilon=0.0)
        expected = box_filter(box_filter(content, 1), 1).data
        np.testing.assert_array_equal(guided_filter(content, np.zeros_like(content), cfg).data, expected)

    def test_large_epsilon(self) -> None:
        content, style = random_pair(6)
        cfg = FilterConfig(radius=2, epsilon=1e12)
        expected = box_filter(box_filter(content, 2), 2).data
        np.testing.assert_allclose(guided_filter(content, style, cfg).data, expected, atol=1e-10)
        np.testing.assert_allclose(guided_filter_bruteforce(content, style, cfg).data, expected, atol=1e-10)


class TestShiftEquivariance:
    """Translating C and S translates T away from the border."""

    def test_interior_shift(self) -> None:
        radius, size, dr, dc = 2, 24, 3, 2
        rng = np.random.default_rng(12)
        big_c = rng.uniform(-1, 1, size=(1, 32, 32))
        big_s = rng.uniform(-1, 1, size=(1, 32, 32))
        cfg = FilterConfig(radius=radius, epsilon=0.05)

        t1 = guided_filter(big_c[:, :size, :size], big_s[:, :size, :size], cfg).data
        t2 = guided_filter(big_c[:, dr:dr + size, dc:dc + size], big_s[:, dr:dr + size, dc:dc + size], cfg).data

        lo = 2 * radius
        hi_r, hi_c = size - 2 * radius - dr, size - 2 * radius - dc
        np.testing.assert_allclose(
            t2[:, lo:hi_r, lo:hi_c],
            t1[:, lo + dr:hi_r + dr, lo + dc:hi_c + dc],
            atol=1e-12
        )


class TestGradients:
    """Differentiability of mean(T) w.r.t. both guides."""

    @pytest.mark.parametrize("seed", range(10))
    def test_wrt_content(self, seed: int) -> None:
        content, style = random_pair(seed, shape=(2, 7, 7))
        cfg = FilterConfig(radius=1, epsilon=0.05)
        report = grad_check(lambda c: guided_filter(c, style, cfg).mean(), content, step=1e-5, tol=1e-4)
        assert report.passed, report.message

    @pytest.mark.parametrize("seed", range(10))
    def test_wrt_style(self, seed: int) -> None:
        content, style = random_pair(seed + 50, shape=(2, 7, 7))
        cfg = FilterConfig(radius=1, epsilon=0.05)
        report = grad_check(lambda s: guided_filter(content, s, cfg).mean(), style, step=1e-5, tol=1e-4)
        assert report.passed, report.message

    def test_weighted_output(self) -> None:
        """A non-uniform readout exercises every coefficient path."""
        content, style = random_pair(77, shape=(1, 6, 6))
        weights = np.random.default_rng(78).normal(size=(1, 6, 6))
        cfg = FilterConfig(radius=2, epsilon=0.02)
        report = grad_check(lambda s: (guided_filter(content, s, cfg) * weights).sum(), style)
        assert report.passed, report.message


class TestValidation:
    """Config and shape validation."""

    def test_shape_mismatch(self) -> None:
        with pytest.raises(ShapeMismatchError):
            guided_filter(np.zeros((1, 4, 4)), np.zeros((1, 4, 5)), FilterConfig(radius=1))

    def test_rank_mismatch(self) -> None:
        with pytest.raises(ShapeMismatchError):
            guided_filter(np.zeros((4, 4)), np.zeros((4, 4)), FilterConfig(radius=1))

    def test_negative_radius_rejected(self) -> None:
        from pydantic import ValidationError as PydanticValidationError
        with pytest.raises(PydanticValidationError):
            FilterConfig(radius=-1)

    def test_defaults(self) -> None:
        cfg = FilterConfig()
        assert cfg.radius == 4
        assert cfg.epsilon == 0.01

    def test_accepts_tensors(self) -> None:
        content, style = random_pair(1, shape=(1, 5, 5))
        out = guided_filter(Tensor(content), Tensor(style), FilterConfig(radius=1))
        assert out.shape == (1, 5, 5)
