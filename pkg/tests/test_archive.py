import json

import numpy as np
import pytest

from adamerge import data
from adamerge.archive import ArchiveError, load_archive, save_archive


def test_round_trip_bit_exact(tmp_path):
    rng = np.random.default_rng(0)
    tensors = {
        "a": rng.normal(size=(3, 4)).astype(np.float32),
        "b": rng.normal(size=(7,)).astype(np.float32),
        "c": rng.normal(size=(2, 3, 4)).astype(np.float32),
    }
    p = str(tmp_path / "arc")
    save_archive(p, tensors, {"note": "x"})
    back, meta = load_archive(p)
    assert meta["note"] == "x"
    for name, arr in tensors.items():
        assert back[name].shape == arr.shape
        assert back[name].tobytes() == arr.tobytes()


def test_missing_directory(tmp_path):
    with pytest.raises(ArchiveError):
        load_archive(str(tmp_path / "nope"))


def test_bad_format_id(tmp_path):
    p = tmp_path / "arc"
    save_archive(str(p), {"a": np.zeros(2, np.float32)})
    doc = json.loads((p / "manifest.json").read_text())
    doc["format"] = "other"
    (p / "manifest.json").write_text(json.dumps(doc))
    with pytest.raises(ArchiveError, match="format"):
        load_archive(str(p))


def test_wrong_dtype_rejected(tmp_path):
    p = tmp_path / "arc"
    save_archive(str(p), {"a": np.zeros(2, np.float32)})
    doc = json.loads((p / "manifest.json").read_text())
    doc["tensors"]["a"]["dtype"] = "f64"
    (p / "manifest.json").write_text(json.dumps(doc))
    with pytest.raises(ArchiveError, match="dtype"):
        load_archive(str(p))


def test_length_shape_mismatch_rejected(tmp_path):
    p = tmp_path / "arc"
    save_archive(str(p), {"a": np.zeros(4, np.float32)})
    doc = json.loads((p / "manifest.json").read_text())
    doc["tensors"]["a"]["shape"] = [5]
    (p / "manifest.json").write_text(json.dumps(doc))
    with pytest.raises(ArchiveError):
        load_archive(str(p))


class TestSynthData:
    def test_rho_zero_no_prototypes(self):
        imgs = data.synth_images(2, 10, 4, 0.0, seed=1)
        assert imgs.shape == (2, 10, 4)
        # all tokens i.i.d.; no pair should be near-identical
        diffs = np.linalg.norm(imgs[0][:, None] - imgs[0][None, :], axis=-1)
        np.fill_diagonal(diffs, np.inf)
        assert diffs.min() > 0.2

    def test_rho_one_single_prototype_near_duplicates(self):
        imgs = data.synth_images(1, 10, 4, 1.0, seed=2, k_prototypes=1)
        diffs = np.linalg.norm(imgs[0] - imgs[0][0], axis=-1)
        assert diffs.max() < 0.5

    def test_seed_determinism_byte_equality(self, tmp_path):
        for k in range(2):
            imgs = data.synth_images(3, 8, 4, 0.7, seed=9)
            data.save_dataset(str(tmp_path / f"d{k}"), imgs)
        b0 = (tmp_path / "d0" / "tensors.bin").read_bytes()
        b1 = (tmp_path / "d1" / "tensors.bin").read_bytes()
        assert b0 == b1
        m0 = (tmp_path / "d0" / "manifest.json").read_bytes()
        m1 = (tmp_path / "d1" / "manifest.json").read_bytes()
        assert m0 == m1

    def test_dataset_round_trip(self, tmp_path):
        imgs = data.synth_images(3, 8, 4, 0.5, seed=4)
        p = str(tmp_path / "ds")
        data.save_dataset(p, imgs, {"redundancy": 0.5})
        back, meta = data.load_dataset(p)
        assert np.array_equal(back, imgs)
        assert meta["redundancy"] == 0.5

    def test_bad_rho_rejected(self):
        with pytest.raises(ValueError):
            data.synth_images(1, 4, 2, 1.5, seed=0)
