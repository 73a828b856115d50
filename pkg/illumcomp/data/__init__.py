"""
Data package: synthetic scenes with analytic shadows, corpus IO.
"""

from illumcomp.data.corpus import load_corpus, load_manifest, load_scene, write_manifest, write_scene
from illumcomp.data.synth import CompositeSample, SceneConfig, gen_scene, render_shadow

__all__ = [
    "CompositeSample",
    "SceneConfig",
    "gen_scene",
    "render_shadow",
    "write_scene",
    "load_scene",
    "write_manifest",
    "load_manifest",
    "load_corpus",
]
