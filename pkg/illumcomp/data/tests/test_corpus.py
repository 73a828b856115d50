"""
Test Suite for corpus directory IO.

Test Coverage:
- write_scene produces the documented nine files
- load_scene restores a sample to within 8-bit quantization
- Manifest contents and config hashing
- load_corpus ordering and error cases (no manifest, empty, missing scene)
- PNG codec channel checks

Usage:
python -m pytest illumcomp/data/tests/test_corpus.py -v
"""

import hashlib
from pathlib import Path

import numpy as np
import pytest

from illumcomp.data.corpus import (
    SCENE_FILES,
    config_hash,
    load_corpus,
    load_manifest,
    load_png,
    load_scene,
    save_png,
    write_manifest,
    write_scene,
)
from illumcomp.data.synth import SceneConfig, gen_scene
from illumcomp.utils.errors import CorpusError, ShapeMismatchError

CFG = SceneConfig(image_size=32, local_size=16, sprite_size=8, panorama_height=32, panorama_width=64)
QUANT = 1.0 / 127.5 + 1e-12


def file_digests(root: Path) -> dict:
    return {str(p.relative_to(root)): hashlib.sha256(p.read_bytes()).hexdigest()
            for p in sorted(root.rglob("*")) if p.is_file()}


@pytest.fixture
def corpus(tmp_path: Path) -> Path:
    seeds = [10, 11, 12]
    for seed in seeds:
        write_scene(tmp_path, gen_scene(seed, CFG))
    write_manifest(tmp_path, CFG, base_seed=10, seeds=seeds)
    return tmp_path


class TestSceneFiles:
    """write_scene / load_scene."""

    def test_layout(self, tmp_path: Path) -> None:
        scene = write_scene(tmp_path, gen_scene(1, CFG))
        assert scene.name == "scene_1"
        assert sorted(p.name for p in scene.iterdir()) == sorted(SCENE_FILES)

    def test_round_trip(self, tmp_path: Path) -> None:
        sample = gen_scene(2, CFG)
        loaded = load_scene(write_scene(tmp_path, sample))
        assert loaded.seed == 2
        assert loaded.region == sample.region
        assert np.array_equal(loaded.gt_sh.coeffs, sample.gt_sh.coeffs)
        assert np.allclose(loaded.gt_light_dir, sample.gt_light_dir)
        for name in ("bg", "fg", "x", "y", "Y"):
            assert np.max(np.abs(getattr(loaded, name) - getattr(sample, name))) <= QUANT, name
        for name in ("m_f", "m_Y", "fg_alpha"):
            assert np.max(np.abs(getattr(loaded, name) - getattr(sample, name))) <= 0.5 / 255 + 1e-12, name
        assert len(loaded.bboxes) == len(sample.bboxes)

    def test_rewrite_is_byte_identical(self, tmp_path: Path) -> None:
        write_scene(tmp_path / "a", gen_scene(3, CFG))
        write_scene(tmp_path / "b", gen_scene(3, CFG))
        assert file_digests(tmp_path / "a") == file_digests(tmp_path / "b")

    def test_missing_file(self, tmp_path: Path) -> None:
        scene = write_scene(tmp_path, gen_scene(4, CFG))
        (scene / "sh.json").unlink()
        with pytest.raises(CorpusError):
            load_scene(scene)

    def test_corrupt_region(self, tmp_path: Path) -> None:
        scene = write_scene(tmp_path, gen_scene(4, CFG))
        (scene / "region.json").write_text("{not json", encoding="utf-8")
        with pytest.raises(CorpusError):
            load_scene(scene)


class TestCorpus:
    """Manifest and whole-corpus loading."""

    def test_manifest(self, corpus: Path) -> None:
        manifest = load_manifest(corpus)
        assert manifest["n_scenes"] == 3
        assert manifest["scenes"] == ["scene_10", "scene_11", "scene_12"]
        assert manifest["config_hash"] == config_hash(CFG)
        assert "[-1, 1]" in manifest["image_format"]

    def test_config_hash(self) -> None:
        assert config_hash(CFG) == config_hash(SceneConfig(**CFG.model_dump()))
        assert config_hash(CFG) != config_hash(CFG.model_copy(update={"attenuation": 0.4}))
        assert len(config_hash(CFG)) == 64

    def test_load_in_manifest_order(self, corpus: Path) -> None:
        samples = load_corpus(corpus, workers=2)
        assert [s.seed for s in samples] == [10, 11, 12]
        assert len(load_corpus(corpus, limit=2)) == 2

    def test_no_manifest(self, tmp_path: Path) -> None:
        with pytest.raises(CorpusError):
            load_corpus(tmp_path)

    def test_empty_corpus(self, tmp_path: Path) -> None:
        write_manifest(tmp_path, CFG, base_seed=0, seeds=[])
        with pytest.raises(CorpusError):
            load_corpus(tmp_path)

    def test_listed_scene_missing(self, corpus: Path) -> None:
        for path in (corpus / "scene_11").iterdir():
            path.unlink()
        (corpus / "scene_11").rmdir()
        with pytest.raises(CorpusError):
            load_corpus(corpus)


class TestPngCodec:
    """8-bit PNG mapping."""

    def test_linear_mapping(self, tmp_path: Path) -> None:
        values = np.linspace(-1.0, 1.0, 3 * 4 * 5).reshape(3, 4, 5)
        save_png(tmp_path / "ramp.png", values)
        assert np.max(np.abs(load_png(tmp_path / "ramp.png", 3) - values)) <= QUANT
        assert load_png(tmp_path / "ramp.png", 3).min() == -1.0

    def test_channel_mismatch(self, tmp_path: Path) -> None:
        save_png(tmp_path / "gray.png", np.zeros((1, 4, 4)), value_range=(0.0, 1.0))
        with pytest.raises(ShapeMismatchError):
            load_png(tmp_path / "gray.png", 3)
        with pytest.raises(ShapeMismatchError):
            save_png(tmp_path / "bad.png", np.zeros((2, 4, 4)))
