"""
Spatial transformer: regions, homographies, warping and masked compositing.

Responsibilities:
- Region: convex quadrilateral in normalized coordinates (TL, TR, BR, BL)
- Homography: 3x3 projective map, estimated from four vertex pairs
- warp: inverse-mapped bilinear resampling, differentiable w.r.t. the image
- warp_mask / inverse_warp_compose: paste a local patch back into the global image
- select_region: place an insertion region next to an existing bounding box

Conventions:
- Normalized coordinates span [-1, 1]^2 with y pointing up; pixel (r, c) of
  an H x W image has its centre at x = 2(c + 0.5)/W - 1, y = 1 - 2(r + 0.5)/H.
- A homography maps source-frame normalized points to destination-frame
  normalized points; warp(img, H) fills every output pixel q with img(H^-1 q).
- Bounding boxes are (x0, y0, x1, y1) with x0 < x1, y0 < y1 (y0 is the bottom).
"""

import logging
from typing import List, Sequence, Tuple, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator
from scipy.linalg import LinAlgError, solve

from illumcomp.core.ops import bilinear_sample, blend
from illumcomp.core.tensor import ArrayLike, Tensor, as_tensor
from illumcomp.utils.errors import (
    DegenerateQuadError,
    InvalidRegionError,
    NoRegionFoundError,
    NonInvertibleHomographyError,
    ShapeMismatchError,
)

logger = logging.getLogger(__name__)

# Full normalized frame, TL, TR, BR, BL
UNIT_SQUARE = np.array([[-1.0, 1.0], [1.0, 1.0], [1.0, -1.0], [-1.0, -1.0]])

MIN_REGION_AREA = 1e-4
COLLINEAR_TOLERANCE = 1e-12
MAX_CONDITION = 1e8
# Pixel squares reach this far from their centre
EDGE_PIXEL_REACH = np.sqrt(0.5) + 1e-9


# ============================================================================
# COORDINATES
# ============================================================================

def pixel_centers(height: int, width: int) -> Tuple[np.ndarray, np.ndarray]:
    """Normalized (x, y) of every pixel centre, each [height, width]."""
    cols = (np.arange(width) + 0.5) * (2.0 / width) - 1.0
    rows = 1.0 - (np.arange(height) + 0.5) * (2.0 / height)
    return np.meshgrid(cols, rows)


def normalized_to_pixel(x: np.ndarray, y: np.ndarray, height: int, width: int) -> Tuple[np.ndarray, np.ndarray]:
    """Fractional (row, col) positions of normalized points."""
    return (1.0 - y) * (height / 2.0) - 0.5, (x + 1.0) * (width / 2.0) - 0.5


def _cross(o: np.ndarray, a: np.ndarray, b: np.ndarray) -> float:
    return float((a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0]))


# ============================================================================
# REGION
# ============================================================================

class Region(BaseModel):
    """
    Insertion region in the global image.

    Attributes:
        vertices: Four (x, y) vertices ordered top-left, top-right,
            bottom-right, bottom-left, strictly inside (-1, 1)^2
    """

    model_config = ConfigDict(frozen=True)

    vertices: List[Tuple[float, float]] = Field(..., min_length=4, max_length=4)

    @field_validator("vertices")
    @classmethod
    def _inside_frame(cls, value: List[Tuple[float, float]]) -> List[Tuple[float, float]]:
        pts = np.asarray(value, dtype=np.float64)
        if not np.all(np.isfinite(pts)):
            raise InvalidRegionError("region vertices must be finite")
        if np.any(np.abs(pts) >= 1.0):
            raise InvalidRegionError(
                "region vertices must lie strictly inside (-1, 1)",
                details={"vertices": pts.tolist()}
            )
        return value

    @model_validator(mode="after")
    def _strictly_convex(self) -> "Region":
        pts = self.as_array()
        # TL, TR, BR, BL with y up is a clockwise walk: every turn is negative
        turns = [_cross(pts[i], pts[(i + 1) % 4], pts[(i + 2) % 4]) for i in range(4)]
        if max(turns) >= 0.0:
            raise InvalidRegionError(
                "region must be a strictly convex quad ordered TL, TR, BR, BL",
                details={"vertices": pts.tolist(), "turns": turns}
            )
        if self.area() < MIN_REGION_AREA:
            raise InvalidRegionError(
                f"region area {self.area():.2e} below {MIN_REGION_AREA:.0e}",
                details={"vertices": pts.tolist()}
            )
        return self

    def as_array(self) -> np.ndarray:
        return np.asarray(self.vertices, dtype=np.float64)

    def area(self) -> float:
        pts = self.as_array()
        x, y = pts[:, 0], pts[:, 1]
        return 0.5 * abs(float(np.dot(x, np.roll(y, -1)) - np.dot(y, np.roll(x, -1))))

    def to_flat(self) -> List[float]:
        """Eight reals in vertex order (the region file format)."""
        return [float(v) for v in self.as_array().ravel()]

    @classmethod
    def from_flat(cls, values: Sequence[float]) -> "Region":
        if len(values) != 8:
            raise InvalidRegionError(f"region needs 8 reals, got {len(values)}")
        return cls(vertices=[(float(values[2 * i]), float(values[2 * i + 1])) for i in range(4)])

    @classmethod
    def from_box(cls, x0: float, y0: float, x1: float, y1: float) -> "Region":
        """Axis-aligned region from a (x0, y0, x1, y1) box."""
        return cls(vertices=[(x0, y1), (x1, y1), (x1, y0), (x0, y0)])

    def bounds(self) -> Tuple[float, float, float, float]:
        pts = self.as_array()
        return float(pts[:, 0].min()), float(pts[:, 1].min()), float(pts[:, 0].max()), float(pts[:, 1].max())


QuadLike = Union[Region, np.ndarray, Sequence[Sequence[float]]]


def _quad_points(quad: QuadLike, name: str) -> np.ndarray:
    pts = quad.as_array() if isinstance(quad, Region) else np.asarray(quad, dtype=np.float64)
    if pts.shape != (4, 2):
        raise ShapeMismatchError(f"{name} must hold 4 (x, y) vertices", shapes={name: pts.shape})
    for i in range(4):
        a, b, c = pts[i], pts[(i + 1) % 4], pts[(i + 2) % 4]
        if abs(_cross(a, b, c)) <= COLLINEAR_TOLERANCE:
            raise DegenerateQuadError(
                f"{name} has three collinear vertices",
                details={"vertices": pts.tolist(), "index": i}
            )
    return pts


# ============================================================================
# HOMOGRAPHY
# ============================================================================

class Homography:
    """
    Projective map between normalized frames.

    Attributes:
        matrix (np.ndarray): 3x3, scaled so matrix[2, 2] == 1 when possible
    """

    def __init__(self, matrix: ArrayLike) -> None:
        m = np.array(matrix, dtype=np.float64)
        if m.shape != (3, 3):
            raise ShapeMismatchError("homography must be 3x3", shapes={"matrix": m.shape})
        if m[2, 2] != 0.0 and np.isfinite(m[2, 2]):
            m = m / m[2, 2]
        self.matrix = m

    @classmethod
    def identity(cls) -> "Homography":
        return cls(np.eye(3))

    def condition(self) -> float:
        if not np.all(np.isfinite(self.matrix)):
            return float("inf")
        return float(np.linalg.cond(self.matrix))

    def inverse(self) -> "Homography":
        """Raises NonInvertibleHomographyError above the conditioning bound."""
        cond = self.condition()
        if not np.isfinite(cond) or cond >= MAX_CONDITION:
            raise NonInvertibleHomographyError(
                f"homography condition number {cond:.3e} exceeds {MAX_CONDITION:.0e}",
                details={"matrix": self.matrix.tolist()}
            )
        return Homography(np.linalg.inv(self.matrix))

    def compose(self, first: "Homography") -> "Homography":
        """Map that applies `first`, then self."""
        return Homography(self.matrix @ first.matrix)

    def apply(self, points: np.ndarray) -> np.ndarray:
        """Map (..., 2) points; points sent to infinity come back non-finite."""
        pts = np.asarray(points, dtype=np.float64)
        homo = np.concatenate([pts, np.ones(pts.shape[:-1] + (1,))], axis=-1) @ self.matrix.T
        with np.errstate(divide="ignore", invalid="ignore"):
            return homo[..., :2] / homo[..., 2:3]

    def __repr__(self) -> str:
        return f"Homography({self.matrix.tolist()})"


def estimate_homography(src: QuadLike, dst: QuadLike) -> Homography:
    """
    Homography taking the four src vertices onto the dst vertices.

    Solves the 8x8 direct linear system with h33 = 1.

    Args:
        src: Region or (4, 2) vertex array
        dst: Region or (4, 2) vertex array

    Returns:
        Homography H with H(src_i) = dst_i

    Raises:
        DegenerateQuadError: When three vertices of either quad are collinear
    """
    p = _quad_points(src, "src")
    q = _quad_points(dst, "dst")

    a = np.zeros((8, 8))
    rhs = np.zeros(8)
    for i, ((x, y), (u, v)) in enumerate(zip(p, q)):
        a[2 * i] = [x, y, 1.0, 0.0, 0.0, 0.0, -u * x, -u * y]
        a[2 * i + 1] = [0.0, 0.0, 0.0, x, y, 1.0, -v * x, -v * y]
        rhs[2 * i], rhs[2 * i + 1] = u, v

    try:
        h = solve(a, rhs)
    except LinAlgError as e:
        raise DegenerateQuadError(f"vertex system is singular: {e}",
                                  details={"src": p.tolist(), "dst": q.tolist()})
    return Homography(np.append(h, 1.0).reshape(3, 3))


# ============================================================================
# WARPING
# ============================================================================

def warp(img: ArrayLike, homography: Homography, out_height: int, out_width: int) -> Tensor:
    """
    Resample img into an out_height x out_width frame through a homography.

    Args:
        img: Tensor [ch, H, W]
        homography: Map from img's normalized frame to the output frame
        out_height: Output rows
        out_width: Output columns

    Returns:
        Tensor [ch, out_height, out_width]; samples falling outside img read 0

    Raises:
        NonInvertibleHomographyError: When the homography cannot be inverted
    """
    img = as_tensor(img)
    if img.ndim != 3:
        raise ShapeMismatchError("warp expects [ch, H, W]", shapes={"img": img.shape})
    inv = homography.inverse().matrix
    _, height, width = img.shape

    x, y = pixel_centers(out_height, out_width)
    homo = np.stack([x, y, np.ones_like(x)], axis=-1) @ inv.T
    w = homo[..., 2]
    valid = w > 0.0
    safe_w = np.where(valid, w, 1.0)
    rows, cols = normalized_to_pixel(homo[..., 0] / safe_w, homo[..., 1] / safe_w, height, width)
    return bilinear_sample(img, rows, cols, valid=valid)


def _segment_distance(px: np.ndarray, py: np.ndarray, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    d = b - a
    t = np.clip(((px - a[0]) * d[0] + (py - a[1]) * d[1]) / float(d @ d), 0.0, 1.0)
    return np.hypot(px - (a[0] + t * d[0]), py - (a[1] + t * d[1]))


def _polygon_signed_distance(region: Region, height: int, width: int) -> np.ndarray:
    """Pixel-unit distance from each pixel centre to the region boundary, positive inside."""
    pts = region.as_array()
    vr, vc = normalized_to_pixel(pts[:, 0], pts[:, 1], height, width)
    verts = np.stack([vc, vr], axis=-1)
    pr, pc = np.meshgrid(np.arange(height, dtype=np.float64), np.arange(width, dtype=np.float64), indexing="ij")

    dist = np.full((height, width), np.inf)
    inside = np.ones((height, width), dtype=bool)
    centroid = verts.mean(axis=0)
    for i in range(4):
        a, b = verts[i], verts[(i + 1) % 4]
        dist = np.minimum(dist, _segment_distance(pc, pr, a, b))
        edge = b - a
        side = edge[0] * (pr - a[1]) - edge[1] * (pc - a[0])
        centroid_side = edge[0] * (centroid[1] - a[1]) - edge[1] * (centroid[0] - a[0])
        inside &= side * np.sign(centroid_side) >= 0.0
    return np.where(inside, dist, -dist)


def warp_mask(region: Region, height: int, width: int) -> np.ndarray:
    """
    Embedding mask of a region: 1 inside, 0 outside, coverage on a 1-px edge.

    Returns:
        Array [1, height, width] with values clip(d + 0.5, 0, 1), d the signed
        pixel distance to the region boundary
    """
    d = _polygon_signed_distance(region, height, width)
    return np.clip(d + 0.5, 0.0, 1.0)[None]


def mask_partition_violations(mask: np.ndarray, region: Region) -> int:
    """
    Count fractional mask pixels whose pixel square misses the region boundary.

    Args:
        mask: Embedding mask [1, H, W] (or [H, W])
        region: Region the mask was built from

    Returns:
        Number of pixels with 0 < mask < 1 that are not polygon-edge pixels
    """
    m = np.asarray(mask, dtype=np.float64)
    m = m[0] if m.ndim == 3 else m
    d = np.abs(_polygon_signed_distance(region, m.shape[0], m.shape[1]))
    fractional = (m > 0.0) & (m < 1.0)
    return int(np.count_nonzero(fractional & (d > EDGE_PIXEL_REACH)))


def extract_local(background: ArrayLike, region: Region, size: int) -> Tensor:
    """Warp the region of the background onto a size x size local patch."""
    return warp(background, estimate_homography(region, UNIT_SQUARE), size, size)


def inverse_warp_compose(
    background: ArrayLike,
    local: ArrayLike,
    region: Region
) -> Tuple[Tensor, Tensor]:
    """
    Warp a local patch back into its region and mask it over the background.

    Args:
        background: Global image [ch, N, N]
        local: Local patch [ch, n, n]
        region: Region of the background the patch belongs to

    Returns:
        (global image [ch, N, N], warp mask [1, N, N]); the global image is
        differentiable w.r.t. local and background and equals the background
        bit-for-bit wherever the mask is 0
    """
    background, local = as_tensor(background), as_tensor(local)
    if background.ndim != 3 or local.ndim != 3 or background.shape[0] != local.shape[0]:
        raise ShapeMismatchError(
            "inverse_warp_compose expects [ch, N, N] background and [ch, n, n] local",
            shapes={"background": background.shape, "local": local.shape}
        )
    _, height, width = background.shape
    back_map = estimate_homography(UNIT_SQUARE, region)
    warped = warp(local, back_map, height, width)
    mask = Tensor(warp_mask(region, height, width))
    return blend(warped, background, mask), mask


# ============================================================================
# REGION SELECTION
# ============================================================================

def _overlaps(a: Sequence[float], b: Sequence[float]) -> bool:
    return min(a[2], b[2]) - max(a[0], b[0]) > 0.0 and min(a[3], b[3]) - max(a[1], b[1]) > 0.0


def _box_inside_frame(box: Sequence[float], margin: float) -> bool:
    return box[0] > -1.0 + margin and box[1] > -1.0 + margin and box[2] < 1.0 - margin and box[3] < 1.0 - margin


def select_region(
    bboxes: Sequence[Sequence[float]],
    fg_aspect: float,
    rng_seed: int,
    max_attempts: int = 64,
    scale: float = 1.0,
    margin: float = 0.02,
    ground_offset: float = 0.0
) -> Region:
    """
    Choose an axis-aligned insertion region next to an existing bounding box.

    The region stands on the same ground line as a randomly chosen anchor box
    (shared bottom edge), sits to its left or right with a small gap, has
    width / height == fg_aspect and overlaps no box. With no boxes any region
    inside the frame is acceptable.

    Args:
        bboxes: Normalized (x0, y0, x1, y1) boxes
        fg_aspect: Foreground width / height
        rng_seed: Seed; the result is a pure function of the arguments
        max_attempts: Placements tried before giving up
        scale: Region height relative to the anchor height
        margin: Minimum distance to the frame border
        ground_offset: Fraction of the region height that extends below the
            anchor's bottom edge (where a patch's ground line sits above its
            bottom edge)

    Returns:
        Region

    Raises:
        NoRegionFoundError: When every attempt overlaps a box or leaves the frame
    """
    if fg_aspect <= 0.0 or not np.isfinite(fg_aspect):
        raise InvalidRegionError(f"fg_aspect must be positive, got {fg_aspect}")
    boxes = [tuple(float(v) for v in b) for b in bboxes]
    for b in boxes:
        if b[2] <= b[0] or b[3] <= b[1]:
            raise InvalidRegionError(f"bounding box {b} has no area")
    rng = np.random.default_rng(rng_seed)

    for attempt in range(max_attempts):
        if boxes:
            anchor = boxes[int(rng.integers(len(boxes)))]
            height = (anchor[3] - anchor[1]) * scale * rng.uniform(0.9, 1.1)
            width = height * fg_aspect
            gap = rng.uniform(0.0, 0.1) * width
            if rng.uniform() < 0.5:
                x0 = anchor[2] + gap
            else:
                x0 = anchor[0] - gap - width
            y0 = anchor[1] - ground_offset * height
        else:
            height = rng.uniform(0.3, 0.8) * scale
            width = height * fg_aspect
            x0 = rng.uniform(-1.0 + margin, 1.0 - margin - width) if width < 2.0 - 2 * margin else 0.0
            y0 = rng.uniform(-1.0 + margin, 1.0 - margin - height) if height < 2.0 - 2 * margin else 0.0
        candidate = (x0, y0, x0 + width, y0 + height)
        if not _box_inside_frame(candidate, margin):
            continue
        if any(_overlaps(candidate, b) for b in boxes):
            continue
        logger.debug(f"select_region: attempt {attempt} -> {candidate}")
        return Region.from_box(*candidate)

    raise NoRegionFoundError(
        f"no free region found after {max_attempts} attempts",
        attempts=max_attempts,
        details={"n_bboxes": len(boxes), "fg_aspect": fg_aspect}
    )
