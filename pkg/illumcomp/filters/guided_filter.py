"""
Guided feature filter.

A windowed, regularized linear regression that transfers style from a style
guide S onto content C: in every (2r+1)^2 window k the coefficients

    a_k = (mean_k(S*C) - mu_k * Cbar_k) / (sigma_k^2 + eps)
    b_k = Cbar_k - a_k * mu_k

minimize sum_{i in w_k} (a_k*S_i + b_k - C_i)^2 + eps*a_k^2. Coefficients
are averaged over every window covering a pixel and applied to the content:
T_i = abar_i * C_i + bbar_i.

Two implementations:
- guided_filter: box-filter closed form built from tape ops (differentiable)
- guided_filter_bruteforce: per-window 2x2 normal equations, test oracle

Windows are clipped at the image border, matching core.ops.box_filter.
Windows whose style variance is at most VARIANCE_FLOOR * max(1, mean(S^2)) are
treated as flat: a_k = 0 and b_k = Cbar_k.
"""

import logging
from typing import Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from illumcomp.core.ops import box_filter
from illumcomp.core.tensor import Tensor, as_tensor, mul, relu, safe_div
from illumcomp.utils.errors import ShapeMismatchError

logger = logging.getLogger(__name__)

VARIANCE_FLOOR = 1e-12


class FilterConfig(BaseModel):
    """Window radius and regularizer of the guided feature filter."""

    model_config = ConfigDict(extra="forbid")

    radius: int = Field(default=4, ge=0, description="Window radius; window is (2r+1)^2")
    epsilon: float = Field(default=0.01, ge=0.0, description="Regularizer on a_k")


def _check_shapes(content: Tensor, style: Tensor) -> None:
    if content.shape != style.shape:
        raise ShapeMismatchError(
            "guided filter needs content and style of identical shape",
            shapes={"content": content.shape, "style": style.shape}
        )
    if content.ndim != 3:
        raise ShapeMismatchError("guided filter expects [ch, H, W]", shapes={"content": content.shape})


def guided_filter(
    content: Union[Tensor, np.ndarray],
    style: Union[Tensor, np.ndarray],
    cfg: FilterConfig
) -> Tensor:
    """
    Fast guided feature filter (differentiable in content and style).

    Args:
        content: Content guidance C [ch, H, W]
        style: Style guidance S [ch, H, W]
        cfg: Window radius and epsilon

    Returns:
        Filtered features T [ch, H, W]

    Raises:
        ShapeMismatchError: When C and S differ in shape
    """
    content, style = as_tensor(content), as_tensor(style)
    _check_shapes(content, style)
    r = cfg.radius

    mean_s = box_filter(style, r)
    mean_c = box_filter(content, r)
    mean_sc = box_filter(mul(style, content), r)
    mean_ss = box_filter(mul(style, style), r)

    var_raw = relu(mean_ss - mean_s * mean_s)
    # rounding leaves a tiny positive variance on constant style
    varying = (var_raw.data > VARIANCE_FLOOR * np.maximum(1.0, mean_ss.data)).astype(np.float64)
    var_s = mul(var_raw, varying)
    cov_sc = mul(mean_sc - mean_s * mean_c, varying)
    a = safe_div(cov_sc, var_s + cfg.epsilon)
    b = mean_c - a * mean_s

    return box_filter(a, r) * content + box_filter(b, r)


def guided_filter_bruteforce(
    content: Union[Tensor, np.ndarray],
    style: Union[Tensor, np.ndarray],
    cfg: FilterConfig
) -> Tensor:
    """
    Reference implementation solving each window's regression directly.

    For every window the regularized normal equations
        [sum S^2 + n*eps, sum S] [a]   [sum S*C]
        [sum S,           n    ] [b] = [sum C  ]
    are solved by eliminating b, which leaves the centred window moments
    a = sum((S - mu)(C - Cbar)) / (sum((S - mu)^2) + n*eps). Coefficients are
    then averaged per pixel over all windows that contain it. Intended for
    small test inputs.
    """
    content, style = as_tensor(content), as_tensor(style)
    _check_shapes(content, style)
    c_all, s_all = content.data, style.data
    channels, height, width = c_all.shape
    r = cfg.radius
    out = np.empty_like(c_all)

    for ch in range(channels):
        c_img, s_img = c_all[ch], s_all[ch]
        a = np.zeros((height, width))
        b = np.zeros((height, width))
        for kr in range(height):
            for kc in range(width):
                rows = slice(max(kr - r, 0), min(kr + r + 1, height))
                cols = slice(max(kc - r, 0), min(kc + r + 1, width))
                s_win, c_win = s_img[rows, cols], c_img[rows, cols]
                n = s_win.size
                mu, c_bar = s_win.sum() / n, c_win.sum() / n
                s_dev, c_dev = s_win - mu, c_win - c_bar
                var = (s_dev * s_dev).sum() / n
                if var <= VARIANCE_FLOOR * max(1.0, float((s_win * s_win).mean())):
                    slope = 0.0
                else:
                    slope = (s_dev * c_dev).sum() / ((s_dev * s_dev).sum() + n * cfg.epsilon)
                a[kr, kc] = slope
                b[kr, kc] = c_bar - slope * mu

        a_bar = np.zeros((height, width))
        b_bar = np.zeros((height, width))
        for ir in range(height):
            for ic in range(width):
                rows = slice(max(ir - r, 0), min(ir + r + 1, height))
                cols = slice(max(ic - r, 0), min(ic + r + 1, width))
                a_bar[ir, ic] = a[rows, cols].mean()
                b_bar[ir, ic] = b[rows, cols].mean()
        out[ch] = a_bar * c_img + b_bar

    return Tensor(out)
