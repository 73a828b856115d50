"""
Geometry package: regions, homographies, warping and compositing.
"""

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

__all__ = [
    "UNIT_SQUARE",
    "Homography",
    "Region",
    "estimate_homography",
    "extract_local",
    "inverse_warp_compose",
    "mask_partition_violations",
    "select_region",
    "warp",
    "warp_mask",
]
