"""
Illumination package: spherical-harmonics lighting.
"""

from illumcomp.illumination.sh import (
    SHCoefficients,
    area_resample,
    dominant_light_direction,
    illum_features,
    illum_map_for_critic,
    light_panorama,
    load_sh,
    project_to_sh,
    reconstruct_illum_map,
    save_sh,
    sh_basis,
    sh_basis_batch,
    sh_count,
    sh_index,
)

__all__ = [
    "SHCoefficients",
    "area_resample",
    "dominant_light_direction",
    "illum_features",
    "illum_map_for_critic",
    "light_panorama",
    "load_sh",
    "project_to_sh",
    "reconstruct_illum_map",
    "save_sh",
    "sh_basis",
    "sh_basis_batch",
    "sh_count",
    "sh_index",
]
