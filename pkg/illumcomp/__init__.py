"""
illumcomp - adversarial image composition with auxiliary illumination.

Packages:
    core: dense tensors, tape-based gradients, image ops, gradient checking
    illumination: spherical-harmonics lighting
    filters: guided feature filter
    geometry: homographies, warping, region selection
    models: generator branches, critics and checkpoints
    training: WGAN losses, optimizer, training loop, shadow evaluation
    data: synthetic scene corpus
    cli: command-line entry point
"""

__version__ = "1.0.0"
