"""
Differentiable image primitives built on the tape.

Responsibilities:
- conv2d: strided, zero-padded cross-correlation (no bias)
- box_filter: clipped-window mean with exact per-pixel normalization
- upsample2x: nearest-neighbour doubling used by the decoders
- bilinear_sample: zero-padded bilinear gather at fixed sampling positions
- blend: mask-weighted mix of two images, exact where the mask is 0 or 1

All ops take and return Tensors and register a VJP when recorded. Sampling
positions and window geometry are constants; only image/kernel values are
differentiated.
"""

import logging
from typing import Optional, Tuple

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from illumcomp.core.tensor import ArrayLike, Tensor, as_tensor, record
from illumcomp.utils.errors import ShapeMismatchError, ValidationError

logger = logging.getLogger(__name__)

# Sampling positions this close to an integer are snapped onto it, so
# identity and integer-offset warps reproduce their input bit-exactly.
SNAP_TOLERANCE = 1e-9


# ============================================================================
# CONVOLUTION
# ============================================================================

def conv2d(x: ArrayLike, kernel: ArrayLike, stride: int = 1, pad: int = 0) -> Tensor:
    """
    2-D cross-correlation of a [C_in, H, W] input with a [C_out, C_in, k, k] kernel.

    Args:
        x: Input tensor [C_in, H, W]
        kernel: Kernel tensor [C_out, C_in, k, k]
        stride: Step between output samples (>= 1)
        pad: Zero padding added on every border

    Returns:
        Tensor [C_out, H', W'] with H' = (H + 2*pad - k) // stride + 1

    Raises:
        ShapeMismatchError: On rank or channel mismatch, or kernel larger than padded input
        ValidationError: On non-positive stride or negative padding
    """
    x, kernel = as_tensor(x), as_tensor(kernel)
    if stride < 1:
        raise ValidationError(f"conv2d stride must be >= 1, got {stride}", details={"stride": stride})
    if pad < 0:
        raise ValidationError(f"conv2d pad must be >= 0, got {pad}", details={"pad": pad})
    if x.ndim != 3 or kernel.ndim != 4:
        raise ShapeMismatchError(
            "conv2d expects input [C,H,W] and kernel [O,C,k,k]",
            shapes={"input": x.shape, "kernel": kernel.shape}
        )
    c_in, height, width = x.shape
    c_out, k_in, kh, kw = kernel.shape
    if c_in != k_in:
        raise ShapeMismatchError(
            f"conv2d channel mismatch: input has {c_in}, kernel expects {k_in}",
            shapes={"input": x.shape, "kernel": kernel.shape}
        )
    if kh > height + 2 * pad or kw > width + 2 * pad:
        raise ShapeMismatchError(
            "conv2d kernel larger than padded input",
            shapes={"input": x.shape, "kernel": kernel.shape}
        )

    xp = np.pad(x.data, ((0, 0), (pad, pad), (pad, pad)))
    windows = sliding_window_view(xp, (kh, kw), axis=(1, 2))[:, ::stride, ::stride]
    out = np.einsum("chwij,ocij->ohw", windows, kernel.data, optimize=True)
    out_h, out_w = out.shape[1:]
    k_data = kernel.data

    def vjp(g: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        g_kernel = np.einsum("ohw,chwij->ocij", g, windows, optimize=True)
        g_padded = np.zeros_like(xp)
        for i in range(kh):
            for j in range(kw):
                g_padded[:, i:i + stride * out_h:stride, j:j + stride * out_w:stride] += np.einsum(
                    "ohw,oc->chw", g, k_data[:, :, i, j], optimize=True
                )
        return g_padded[:, pad:pad + height, pad:pad + width], g_kernel

    return record("conv2d", out, (x, kernel), vjp,
                  saved={"windows": windows, "kernel": k_data, "stride": stride, "pad": pad})


def upsample2x(x: ArrayLike) -> Tensor:
    """Nearest-neighbour 2x upsampling over the last two axes."""
    x = as_tensor(x)
    out = x.data.repeat(2, axis=-2).repeat(2, axis=-1)
    lead, (h, w) = x.shape[:-2], x.shape[-2:]

    def vjp(g: np.ndarray) -> Tuple[np.ndarray]:
        return (g.reshape(*lead, h, 2, w, 2).sum(axis=(-3, -1)),)

    return record("upsample2x", out, (x,), vjp)


# ============================================================================
# BOX FILTER
# ============================================================================

def _window_bounds(extent: int, radius: int) -> Tuple[np.ndarray, np.ndarray]:
    idx = np.arange(extent)
    return np.clip(idx - radius, 0, extent), np.clip(idx + radius + 1, 0, extent)


def box_sum(values: np.ndarray, radius: int) -> np.ndarray:
    """Unnormalized sum over clipped (2r+1)^2 windows of the last two axes."""
    height, width = values.shape[-2:]
    lo_r, hi_r = _window_bounds(height, radius)
    lo_c, hi_c = _window_bounds(width, radius)

    pad_rows = [(0, 0)] * (values.ndim - 2) + [(1, 0), (0, 0)]
    csum = np.pad(np.cumsum(values, axis=-2), pad_rows)
    rows = csum[..., hi_r, :] - csum[..., lo_r, :]

    pad_cols = [(0, 0)] * (values.ndim - 1) + [(1, 0)]
    csum = np.pad(np.cumsum(rows, axis=-1), pad_cols)
    return csum[..., hi_c] - csum[..., lo_c]


def box_counts(height: int, width: int, radius: int) -> np.ndarray:
    """Number of in-image pixels in each clipped window."""
    lo_r, hi_r = _window_bounds(height, radius)
    lo_c, hi_c = _window_bounds(width, radius)
    return np.outer(hi_r - lo_r, hi_c - lo_c).astype(np.float64)


def box_filter(t: ArrayLike, radius: int) -> Tensor:
    """
    Mean over clipped (2*radius+1)^2 windows centred on every pixel.

    Windows are clipped at the image border and normalized by the number of
    pixels they actually cover. Leading axes (channels) are filtered independently.

    Args:
        t: Tensor [..., H, W]
        radius: Window radius (>= 0)

    Returns:
        Tensor of the same shape

    Raises:
        ValidationError: On negative radius or radius larger than both extents
    """
    t = as_tensor(t)
    if t.ndim < 2:
        raise ShapeMismatchError("box_filter needs at least 2 dimensions", shapes={"t": t.shape})
    height, width = t.shape[-2:]
    if radius < 0:
        raise ValidationError(f"box_filter radius must be >= 0, got {radius}", details={"radius": radius})
    if radius > height and radius > width:
        raise ValidationError(
            f"box_filter radius {radius} exceeds both image extents {height}x{width}",
            details={"radius": radius, "height": height, "width": width}
        )

    counts = box_counts(height, width, radius)
    out = box_sum(t.data, radius) / counts

    def vjp(g: np.ndarray) -> Tuple[np.ndarray]:
        # Window membership is symmetric, so the adjoint is a box sum of g / counts.
        return (box_sum(g / counts, radius),)

    return record("box_filter", out, (t,), vjp, saved={"counts": counts, "radius": radius})


# ============================================================================
# BILINEAR SAMPLING
# ============================================================================

def _snap(coords: np.ndarray) -> np.ndarray:
    nearest = np.round(coords)
    return np.where(np.abs(coords - nearest) < SNAP_TOLERANCE, nearest, coords)


def bilinear_sample(
    img: ArrayLike,
    rows: np.ndarray,
    cols: np.ndarray,
    valid: Optional[np.ndarray] = None
) -> Tensor:
    """
    Gather img[:, rows, cols] with bilinear interpolation and zero padding.

    Args:
        img: Tensor [C, H, W]
        rows: Fractional row positions, shape [h, w] (pixel-centre units)
        cols: Fractional column positions, shape [h, w]
        valid: Optional boolean [h, w]; False forces the sample to 0

    Returns:
        Tensor [C, h, w]; differentiable with respect to img only
    """
    img = as_tensor(img)
    if img.ndim != 3:
        raise ShapeMismatchError("bilinear_sample expects [C,H,W]", shapes={"img": img.shape})
    channels, height, width = img.shape
    rows, cols = _snap(np.asarray(rows, dtype=np.float64)), _snap(np.asarray(cols, dtype=np.float64))
    if valid is None:
        valid = np.isfinite(rows) & np.isfinite(cols)
    rows = np.where(valid, rows, -10.0)
    cols = np.where(valid, cols, -10.0)

    r0 = np.floor(rows).astype(np.int64)
    c0 = np.floor(cols).astype(np.int64)
    fr = rows - r0
    fc = cols - c0

    taps = []
    for dr, dc, weight in (
        (0, 0, (1.0 - fr) * (1.0 - fc)),
        (0, 1, (1.0 - fr) * fc),
        (1, 0, fr * (1.0 - fc)),
        (1, 1, fr * fc),
    ):
        rr, cc = r0 + dr, c0 + dc
        inside = valid & (rr >= 0) & (rr < height) & (cc >= 0) & (cc < width) & (weight != 0.0)
        flat = np.where(inside, rr * width + cc, 0)
        taps.append((flat, np.where(inside, weight, 0.0)))

    src = img.data.reshape(channels, height * width)
    out = np.zeros((channels,) + rows.shape)
    for flat, weight in taps:
        out += src[:, flat] * weight

    def vjp(g: np.ndarray) -> Tuple[np.ndarray]:
        g_img = np.zeros((channels, height * width))
        for flat, weight in taps:
            contrib = g * weight
            for ch in range(channels):
                g_img[ch] += np.bincount(flat.ravel(), weights=contrib[ch].ravel(),
                                         minlength=height * width)
        return (g_img.reshape(channels, height, width),)

    return record("bilinear_sample", out, (img,), vjp, saved={"taps": taps})


# ============================================================================
# MASKED BLEND
# ============================================================================

def blend(front: ArrayLike, back: ArrayLike, mask: ArrayLike) -> Tensor:
    """
    front * mask + back * (1 - mask), broadcasting the mask over channels.

    Pixels with mask exactly 0 (or 1) copy back (or front) bit-for-bit.

    Args:
        front: Tensor [C, H, W] shown where mask = 1
        back: Tensor [C, H, W] shown where mask = 0
        mask: Tensor [1, H, W] or [C, H, W] with values in [0, 1]

    Returns:
        Blended tensor [C, H, W]; differentiable w.r.t. all three inputs
    """
    front, back, mask = as_tensor(front), as_tensor(back), as_tensor(mask)
    if front.shape != back.shape:
        raise ShapeMismatchError("blend: front and back differ in shape",
                                 shapes={"front": front.shape, "back": back.shape})
    if mask.ndim != front.ndim or mask.shape[-2:] != front.shape[-2:] or mask.shape[0] not in (1, front.shape[0]):
        raise ShapeMismatchError("blend: mask does not broadcast over the images",
                                 shapes={"front": front.shape, "mask": mask.shape})

    m = np.broadcast_to(mask.data, front.shape)
    mixed = front.data * m + back.data * (1.0 - m)
    out = np.where(m == 0.0, back.data, np.where(m == 1.0, front.data, mixed))

    def vjp(g: np.ndarray) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        g_mask = g * (front.data - back.data)
        if mask.shape[0] == 1 and front.shape[0] != 1:
            g_mask = g_mask.sum(axis=0, keepdims=True)
        return g * m, g * (1.0 - m), g_mask

    return record("blend", out, (front, back, mask), vjp, saved={"mask": m})
