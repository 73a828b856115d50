"""
Models package: generator branches, critics, parameters and checkpoints.
"""

from illumcomp.models.params import ParamSet
from illumcomp.models.networks import (
    AblationConfig,
    GeneratorOutput,
    NetworkConfig,
    compose_local,
    discriminate_global,
    discriminate_local,
    encode,
    generate,
    init_critics,
    init_generator,
    shadow_branch,
    texture_branch,
    zeros_like,
)
from illumcomp.models.checkpoint import Checkpoint, load_checkpoint, save_checkpoint

__all__ = [
    "ParamSet",
    "AblationConfig",
    "GeneratorOutput",
    "NetworkConfig",
    "compose_local",
    "discriminate_global",
    "discriminate_local",
    "encode",
    "generate",
    "init_critics",
    "init_generator",
    "shadow_branch",
    "texture_branch",
    "zeros_like",
    "Checkpoint",
    "load_checkpoint",
    "save_checkpoint",
]
