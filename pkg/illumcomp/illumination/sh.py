"""
Spherical-harmonics lighting.

Responsibilities:
- Real orthonormal SH basis, (l, m) ordered (0,0), (1,-1), (1,0), (1,1), (2,-2), ...
- Illumination-map reconstruction on an equirectangular grid
- Projection of panoramas onto the basis (inverse of reconstruction)
- Dominant light direction from band-1 coefficients
- Tiled coefficient features for the shadow branch, area resampling of maps
- SH coefficient JSON files and analytic point + ambient panoramas

Conventions:
- Directions: x = sin(theta)cos(phi), y = sin(theta)sin(phi), z = cos(theta);
  theta is the polar angle from +z (up).
- Panorama pixel (r, c) of an H x W map looks along
  theta = pi * (r + 0.5) / H, phi = 2 * pi * (c + 0.5) / W.
- Basis signs follow the graphics convention (no Condon-Shortley phase), so
  y_{1,-1}, y_{1,0}, y_{1,1} are positive multiples of y, z, x.
"""

import json
import logging
import math
from pathlib import Path
from typing import Sequence, Tuple, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator
from scipy.special import lpmv

from illumcomp.core.tensor import Tensor
from illumcomp.utils.errors import (
    ConfigValidationError,
    DegenerateIlluminationError,
    StorageError,
    ValidationError,
)

logger = logging.getLogger(__name__)

# Rec.601 luma weights
LUMINANCE_WEIGHTS = np.array([0.299, 0.587, 0.114])
UNIT_TOLERANCE = 1e-9
BAND1_ENERGY_FLOOR = 1e-9


def sh_count(degree: int) -> int:
    """Coefficients per channel for a given degree."""
    return (degree + 1) ** 2


def sh_index(l: int, m: int) -> int:
    """Flat index of basis function (l, m)."""
    return l * l + l + m


class SHCoefficients(BaseModel):
    """Per-channel real SH coefficients, shape [3, (L+1)^2]."""

    model_config = ConfigDict(arbitrary_types_allowed=True)

    degree: int = Field(..., ge=0, description="SH degree L")
    coeffs: np.ndarray = Field(..., description="Coefficients [3, (L+1)^2] in (l, m) order")

    @field_validator("coeffs", mode="before")
    @classmethod
    def _as_array(cls, value: object) -> np.ndarray:
        return np.array(value, dtype=np.float64)

    @model_validator(mode="after")
    def _check_shape(self) -> "SHCoefficients":
        expected = (3, sh_count(self.degree))
        if self.coeffs.shape != expected:
            raise ValueError(f"coeffs must have shape {expected}, got {self.coeffs.shape}")
        if not np.all(np.isfinite(self.coeffs)):
            raise ValueError("coeffs must be finite")
        return self

    @property
    def count(self) -> int:
        """Total coefficient count M = 3 * (L+1)^2."""
        return self.coeffs.size

    def scaled(self, factor: float) -> "SHCoefficients":
        return SHCoefficients(degree=self.degree, coeffs=self.coeffs * factor)

    def to_dict(self) -> dict:
        return {"degree": self.degree, "channels": self.coeffs.tolist()}


# ============================================================================
# BASIS
# ============================================================================

def _basis_from_angles(theta: np.ndarray, phi: np.ndarray, degree: int) -> np.ndarray:
    """Real SH values [..., (L+1)^2] at polar/azimuth angles."""
    cos_t = np.cos(theta)
    out = np.empty(np.shape(theta) + (sh_count(degree),))
    for l in range(degree + 1):
        for m in range(l + 1):
            # lpmv carries the Condon-Shortley phase; (-1)^m removes it.
            legendre = lpmv(m, l, cos_t) * (-1.0) ** m
            norm = math.sqrt((2 * l + 1) / (4.0 * math.pi)
                             * math.factorial(l - m) / math.factorial(l + m))
            if m == 0:
                out[..., sh_index(l, 0)] = norm * legendre
            else:
                out[..., sh_index(l, m)] = math.sqrt(2.0) * norm * np.cos(m * phi) * legendre
                out[..., sh_index(l, -m)] = math.sqrt(2.0) * norm * np.sin(m * phi) * legendre
    return out


def directions_to_angles(dirs: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Unit vectors [..., 3] to (theta, phi)."""
    theta = np.arccos(np.clip(dirs[..., 2], -1.0, 1.0))
    phi = np.arctan2(dirs[..., 1], dirs[..., 0])
    return theta, phi


def sh_basis_batch(dirs: np.ndarray, degree: int) -> np.ndarray:
    """Vectorized basis evaluation for unit directions [..., 3]."""
    if degree < 0:
        raise ValidationError(f"SH degree must be >= 0, got {degree}", details={"degree": degree})
    theta, phi = directions_to_angles(np.asarray(dirs, dtype=np.float64))
    return _basis_from_angles(theta, phi, degree)


def sh_basis(direction: Sequence[float], degree: int) -> np.ndarray:
    """
    Real orthonormal SH basis at one direction.

    Args:
        direction: Unit 3-vector
        degree: SH degree L (>= 0)

    Returns:
        Vector of (L+1)^2 basis values in (l, m) order

    Raises:
        ValidationError: On negative degree or non-unit direction
    """
    if degree < 0:
        raise ValidationError(f"SH degree must be >= 0, got {degree}", details={"degree": degree})
    d = np.asarray(direction, dtype=np.float64)
    if d.shape != (3,):
        raise ValidationError("direction must be a 3-vector", details={"shape": list(d.shape)})
    norm = float(np.linalg.norm(d))
    if abs(norm - 1.0) > UNIT_TOLERANCE:
        raise ValidationError(
            f"direction must be unit length, |d| = {norm:.12f}",
            details={"norm": norm}
        )
    return sh_basis_batch(d, degree)


# ============================================================================
# PANORAMAS
# ============================================================================

def panorama_angles(height: int, width: int) -> Tuple[np.ndarray, np.ndarray]:
    """Per-pixel (theta, phi) grids of an equirectangular map."""
    theta = np.pi * (np.arange(height) + 0.5) / height
    phi = 2.0 * np.pi * (np.arange(width) + 0.5) / width
    return np.meshgrid(theta, phi, indexing="ij")


def panorama_directions(height: int, width: int) -> np.ndarray:
    """Per-pixel unit directions [H, W, 3]."""
    theta, phi = panorama_angles(height, width)
    return np.stack([np.sin(theta) * np.cos(phi), np.sin(theta) * np.sin(phi), np.cos(theta)], axis=-1)


def reconstruct_illum_map(c: SHCoefficients, height: int, width: int) -> Tensor:
    """
    Evaluate M(s) = sum_i SH_i * y_i(s) per channel on an equirectangular grid.

    Args:
        c: SH coefficients
        height: Panorama rows (>= 1)
        width: Panorama columns (>= 1)

    Returns:
        Illumination map Tensor [3, H, W]
    """
    if height < 1 or width < 1:
        raise ValidationError(
            f"panorama size must be positive, got {height}x{width}",
            details={"height": height, "width": width}
        )
    theta, phi = panorama_angles(height, width)
    basis = _basis_from_angles(theta, phi, c.degree)
    return Tensor(np.einsum("hwi,ci->chw", basis, c.coeffs))


def project_to_sh(env: Union[Tensor, np.ndarray], degree: int) -> SHCoefficients:
    """
    Project an equirectangular panorama onto the SH basis.

    Coefficients are the inner products <env, y_i> under the pixel weight
    sin(theta) * (pi / H) * (2 * pi / W), corrected by the inverse of the
    grid's discrete Gram matrix so that band-limited maps project back to
    exactly the coefficients they were reconstructed from.
    When the Gram matrix is the identity this reduces to the plain inner
    product projection.

    Args:
        env: Panorama [3, H, W]
        degree: Target SH degree L (>= 0)

    Returns:
        SHCoefficients of the given degree
    """
    if degree < 0:
        raise ValidationError(f"SH degree must be >= 0, got {degree}", details={"degree": degree})
    data = env.data if isinstance(env, Tensor) else np.asarray(env, dtype=np.float64)
    if data.ndim != 3 or data.shape[0] != 3:
        raise ValidationError("panorama must be [3, H, W]", details={"shape": list(data.shape)})
    _, height, width = data.shape

    theta, phi = panorama_angles(height, width)
    basis = _basis_from_angles(theta, phi, degree).reshape(height * width, -1)
    weight = (np.sin(theta) * (np.pi / height) * (2.0 * np.pi / width)).ravel()

    inner = np.einsum("pi,p,cp->ci", basis, weight, data.reshape(3, -1))
    gram = basis.T @ (basis * weight[:, None])
    coeffs = inner @ np.linalg.pinv(gram, hermitian=True)
    return SHCoefficients(degree=degree, coeffs=coeffs)


def light_panorama(
    direction: Sequence[float],
    intensity: Sequence[float],
    ambient: Sequence[float],
    height: int = 64,
    width: int = 128,
    sharpness: float = 40.0
) -> np.ndarray:
    """
    Analytic panorama of a compact directional light over uniform ambient.

    The light is a narrow lobe exp(k * (cos(angle) - 1)) around direction,
    which keeps its band-1 projection aligned with the direction.

    Returns:
        Panorama [3, H, W]
    """
    d = np.asarray(direction, dtype=np.float64)
    d = d / np.linalg.norm(d)
    cos_angle = panorama_directions(height, width) @ d
    lobe = np.exp(sharpness * (cos_angle - 1.0))
    return (np.asarray(ambient, dtype=np.float64)[:, None, None]
            + np.asarray(intensity, dtype=np.float64)[:, None, None] * lobe[None])


# ============================================================================
# DERIVED QUANTITIES
# ============================================================================

def dominant_light_direction(c: SHCoefficients) -> np.ndarray:
    """
    Direction of maximal band-1 radiance of the luminance channel.

    Returns:
        Unit 3-vector normalize((c_{1,1}, c_{1,-1}, c_{1,0})) of Rec.601 luminance

    Raises:
        DegenerateIlluminationError: When band-1 energy is <= 1e-9
    """
    if c.degree < 1:
        raise DegenerateIlluminationError("degree-0 coefficients carry no direction",
                                          details={"degree": c.degree})
    lum = LUMINANCE_WEIGHTS @ c.coeffs
    band1 = np.array([lum[sh_index(1, 1)], lum[sh_index(1, -1)], lum[sh_index(1, 0)]])
    energy = float(band1 @ band1)
    if energy <= BAND1_ENERGY_FLOOR:
        raise DegenerateIlluminationError(
            f"band-1 energy {energy:.3e} below {BAND1_ENERGY_FLOOR:.0e}",
            details={"energy": energy}
        )
    return band1 / math.sqrt(energy)


def illum_features(c: SHCoefficients, height: int, width: int) -> Tensor:
    """Tile the M coefficient values over an h x w grid (channel-major order)."""
    if height < 1 or width < 1:
        raise ValidationError("feature grid must be at least 1x1",
                              details={"height": height, "width": width})
    flat = c.coeffs.reshape(-1, 1, 1)
    return Tensor(np.broadcast_to(flat, (flat.shape[0], height, width)).copy())


def _area_matrix(n_in: int, n_out: int) -> np.ndarray:
    edges_in = np.arange(n_in + 1) / n_in
    edges_out = np.arange(n_out + 1) / n_out
    lo = np.maximum(edges_out[:-1, None], edges_in[None, :-1])
    hi = np.minimum(edges_out[1:, None], edges_in[None, 1:])
    return np.clip(hi - lo, 0.0, None) * n_out


def area_resample(img: Union[Tensor, np.ndarray], height: int, width: int) -> np.ndarray:
    """Exact overlap-weighted resampling of [C, H, W] to [C, height, width]."""
    data = img.data if isinstance(img, Tensor) else np.asarray(img, dtype=np.float64)
    rows = _area_matrix(data.shape[1], height)
    cols = _area_matrix(data.shape[2], width)
    return np.einsum("rh,chw,sw->crs", rows, data, cols)


def illum_map_for_critic(c: SHCoefficients, size: int) -> Tensor:
    """Reconstruct a 2:1 panorama and area-resample it to a size x size image."""
    panorama = reconstruct_illum_map(c, size, 2 * size)
    return Tensor(area_resample(panorama, size, size))


# ============================================================================
# FILE IO
# ============================================================================

def save_sh(path: Path, c: SHCoefficients) -> None:
    """Write coefficients as UTF-8 JSON {degree, channels}."""
    try:
        Path(path).write_text(json.dumps(c.to_dict(), indent=2), encoding="utf-8")
    except OSError as e:
        raise StorageError(f"cannot write SH file: {e}", path=str(path))


def load_sh(path: Path) -> SHCoefficients:
    """Read an SH coefficient JSON file."""
    try:
        payload = json.loads(Path(path).read_text(encoding="utf-8"))
    except OSError as e:
        raise StorageError(f"cannot read SH file: {e}", path=str(path))
    except json.JSONDecodeError as e:
        raise ConfigValidationError(f"SH file is not valid JSON: {e}", key=str(path))
    try:
        return SHCoefficients(degree=payload["degree"], coeffs=payload["channels"])
    except (KeyError, TypeError, ValueError) as e:
        raise ConfigValidationError(f"invalid SH file: {e}", key=str(path))
