import json
import math

import numpy as np
import pytest

from shadowfreq.imagecore import save_image
from shadowfreq.metrics import (PSNR_CAP, Manifest, ManifestEntry, discover_manifest,
                                evaluate_dataset, evaluate_pair, load_manifest,
                                mask_from_threshold, psnr_from_mse, ssim)
from shadowfreq.synthetic import write_corpus

from conftest import srgb


class TestThreshold:
    def test_identical(self, rng):
        x = rng.random((4, 4, 3))
        assert not mask_from_threshold(x, x).any()

    def test_31_over_255(self):
        a = np.full((3, 3, 3), 100 / 255)
        b = a.copy()
        b[1, 2] += 31 / 255
        m = mask_from_threshold(a, b, 30)
        assert m.sum() == 1 and m[1, 2]

    def test_zero_threshold(self, rng):
        a = rng.random((5, 5, 3))
        b = a.copy()
        b[0, 0, 1] += 0.001
        assert mask_from_threshold(a, b, 0).sum() == 1

    def test_range(self):
        with pytest.raises(ValueError):
            mask_from_threshold(np.zeros((2, 2, 3)), np.zeros((2, 2, 3)), 300)


class TestPair:
    def test_identical(self, rng):
        x = srgb(rng.random((20, 20, 3)))
        m = rng.random((20, 20)) > 0.5
        r = evaluate_pair(x, x, m)
        assert r.rmse_all == r.rmse_s == r.rmse_ns == 0.0
        assert r.psnr_all == PSNR_CAP
        assert r.ssim_all == 1.0

    def test_uniform_offset_20db(self):
        a = srgb(np.full((8, 8, 3), 0.5))
        b = srgb(np.full((8, 8, 3), 0.6))
        r = evaluate_pair(a, b, np.zeros((8, 8), bool))
        assert r.psnr_all == pytest.approx(20.0, abs=1e-9)
        assert r.rmse_all == pytest.approx(25.5, abs=1e-9)
        assert psnr_from_mse(650.25) == pytest.approx(20.0, abs=1e-12)

    def test_additivity(self, rng):
        for _ in range(10):
            a, b = srgb(rng.random((16, 12, 3))), srgb(rng.random((16, 12, 3)))
            m = rng.random((16, 12)) > 0.3
            r = evaluate_pair(a, b, m)
            lhs = r.rmse_all ** 2 * r.count_all
            rhs = r.rmse_s ** 2 * r.count_s + r.rmse_ns ** 2 * r.count_ns
            assert abs(lhs - rhs) <= 1e-6 * lhs

    def test_empty_region_flagged(self, rng):
        x = srgb(rng.random((6, 6, 3)))
        r = evaluate_pair(x, srgb(rng.random((6, 6, 3))), np.zeros((6, 6), bool))
        assert r.rmse_s is None and r.psnr_s is None
        assert "empty_region:s" in r.flags

    def test_psnr_monotone_in_noise(self, rng):
        x = rng.random((32, 32, 3)) * 0.5 + 0.25
        noise = rng.uniform(-1, 1, x.shape)
        m = np.zeros((32, 32), bool)
        vals = [evaluate_pair(srgb(x + s * noise), srgb(x), m).psnr_all for s in (0.01, 0.02, 0.05, 0.1)]
        assert all(a > b for a, b in zip(vals, vals[1:]))

    def test_lab_rmse_option(self, rng):
        a, b = srgb(rng.random((8, 8, 3))), srgb(rng.random((8, 8, 3)))
        m = np.zeros((8, 8), bool)
        assert evaluate_pair(a, b, m, "lab").rmse_all != evaluate_pair(a, b, m).rmse_all
        assert evaluate_pair(a, b, m, "lab").psnr_all == evaluate_pair(a, b, m).psnr_all

    def test_shape_checks(self, rng):
        x = srgb(rng.random((6, 6, 3)))
        with pytest.raises(ValueError):
            evaluate_pair(x, x, np.zeros((5, 6), bool))


class TestSsim:
    def test_self_and_symmetry(self, rng):
        x, y = rng.random((32, 32)) * 255, rng.random((32, 32)) * 255
        assert ssim(x, x) == 1.0
        assert abs(ssim(x, y) - ssim(y, x)) < 1e-12
        assert ssim(x, y) < 0.5


def make_dataset(root, pairs, masks=True):
    for sub in ("shadow", "shadow_free") + (("mask",) if masks else ()):
        (root / sub).mkdir(parents=True)
    for name, (s, f) in pairs.items():
        save_image(srgb(s), root / "shadow" / name)
        save_image(srgb(f), root / "shadow_free" / name)
        if masks:
            save_image(srgb(np.zeros(s.shape[:2])), root / "mask" / name)


class TestDataset:
    def test_single_identical_pair(self, tmp_path, rng):
        x = rng.random((16, 16, 3))
        make_dataset(tmp_path, {"a.png": (x, x)})
        res = evaluate_dataset(discover_manifest(tmp_path))
        one = res["per_image"][0]
        for k in ("psnr_all", "rmse_all", "ssim_all"):
            assert res["aggregate"][k] == one[k]
        assert res["aggregate"]["rmse_all"] == 0.0

    def test_per_image_mean(self, tmp_path):
        base = np.full((4, 4, 3), 100 / 255)
        make_dataset(tmp_path, {"a.png": (base, base + 2 / 255), "b.png": (base, base + 4 / 255)})
        res = evaluate_dataset(discover_manifest(tmp_path))
        assert [r["rmse_all"] for r in res["per_image"]] == pytest.approx([2.0, 4.0], abs=1e-9)
        assert res["aggregate"]["rmse_all"] == pytest.approx(3.0, abs=1e-9)

    def test_unreadable_entry(self, tmp_path, rng):
        x = rng.random((8, 8, 3))
        make_dataset(tmp_path, {"a.png": (x, x), "b.png": (x, x)})
        (tmp_path / "shadow_free" / "b.png").write_bytes(b"\x89PNG\r\n\x1a\n broken")
        res = evaluate_dataset(discover_manifest(tmp_path))
        assert res["aggregate"]["count"] == 1 and res["aggregate"]["failed"] == 1
        assert res["errors"][0]["name"] == "b.png"

    def test_mask_provenance(self, tmp_path):
        write_corpus(tmp_path / "aistd", n_pairs=2, size=32)
        res = evaluate_dataset(discover_manifest(tmp_path / "aistd"))
        assert {r["mask_source"] for r in res["per_image"]} == {"provided"}
        x = np.random.default_rng(0).random((8, 8, 3))
        make_dataset(tmp_path / "srd", {"a.png": (x, x)}, masks=False)
        res = evaluate_dataset(discover_manifest(tmp_path / "srd"))
        assert res["per_image"][0]["mask_source"] == "threshold(30)"

    def test_aistd_names(self, tmp_path, rng):
        x = rng.random((8, 8, 3))
        for sub in ("test_A", "test_B", "test_C"):
            (tmp_path / sub).mkdir()
        save_image(srgb(x), tmp_path / "test_A" / "1.png")
        save_image(srgb(x), tmp_path / "test_C" / "1.png")
        save_image(srgb(np.ones((8, 8))), tmp_path / "test_B" / "1.png")
        man = discover_manifest(tmp_path)
        assert man.dataset == "triplet" and man.entries[0].mask == "test_B/1.png"

    def test_json_manifest(self, tmp_path, rng):
        x = rng.random((8, 8, 3))
        make_dataset(tmp_path / "d", {"a.png": (x, x)})
        (tmp_path / "m.json").write_text(json.dumps(
            {"root": "d", "entries": [{"shadow": "shadow/a.png", "free": "shadow_free/a.png"}]}))
        res = evaluate_dataset(load_manifest(tmp_path / "m.json"))
        assert res["aggregate"]["count"] == 1

    def test_result_column(self, tmp_path, rng):
        x = rng.random((8, 8, 3))
        make_dataset(tmp_path, {"a.png": (x * 0.5, x)})
        (tmp_path / "result").mkdir()
        save_image(srgb(x), tmp_path / "result" / "a.png")
        res = evaluate_dataset(discover_manifest(tmp_path))
        assert res["per_image"][0]["rmse_all"] == 0.0

    def test_empty_manifest(self, tmp_path):
        (tmp_path / "m.json").write_text(json.dumps({"entries": []}))
        with pytest.raises(ValueError):
            load_manifest(tmp_path / "m.json")
