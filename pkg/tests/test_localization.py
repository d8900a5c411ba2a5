import numpy as np
import pytest

from csad import localization as loc
from csad.errors import DimMismatch, NoTrainingMaps
from csad.histogram_scoring import patch_histogram
from csad.tensor_io import LabelMap


def block_map(size, cls_blocks):
    """cls_blocks: list of (class, y0, x0, h, w)."""
    px = np.zeros((size, size), dtype=np.uint8)
    for k, y0, x0, h, w in cls_blocks:
        px[y0:y0 + h, x0:x0 + w] = k
    return LabelMap(px)


class TestNearestTrainingMap:
    def test_exact_match_preferred(self):
        a = block_map(16, [(1, 0, 0, 4, 4)])
        b = block_map(16, [(1, 0, 0, 8, 8)])
        test = block_map(16, [(1, 2, 2, 4, 4)])  # same histogram as a
        got = loc.nearest_training_map(test, [b, a], 1)
        assert got is a

    def test_l1_argmin_oracle(self):
        rng = np.random.default_rng(1)
        from csad.histogram_scoring import class_histogram
        for _ in range(10):
            maps = [LabelMap(rng.integers(0, 3, (12, 12), dtype=np.uint8))
                    for _ in range(6)]
            test = LabelMap(rng.integers(0, 3, (12, 12), dtype=np.uint8))
            got = loc.nearest_training_map(test, maps, 2)
            th = class_histogram(test, 2)
            dists = [np.abs(class_histogram(m, 2) - th).sum() for m in maps]
            assert got is maps[int(np.argmin(dists))]

    def test_empty_training_set(self):
        with pytest.raises(NoTrainingMaps):
            loc.nearest_training_map(block_map(8, []), [], 1)


class TestHistogramAnomalyMap:
    def bank_means(self, train_maps, sizes, n_cls):
        return {s: np.mean([patch_histogram(m, s, n_cls) for m in train_maps], axis=0)
                for s in sizes}

    def test_zero_when_test_matches_training(self):
        train = [block_map(16, [(1, 0, 0, 8, 8)]) for _ in range(3)]
        means = self.bank_means(train, [16, 8], 1)
        m = loc.histogram_anomaly_map(train[0], means, train, [16, 8], 1)
        assert np.all(np.abs(m) <= 1e-12)

    def test_extra_component_mass_on_extra_pixels(self):
        train = [block_map(32, [(1, 4, 4, 8, 8)]) for _ in range(3)]
        test = block_map(32, [(1, 4, 4, 8, 8), (1, 20, 20, 8, 8)])
        means = self.bank_means(train, [32, 16], 1)
        m = loc.histogram_anomaly_map(test, means, train, [32, 16], 1)
        extra = np.zeros((32, 32), bool)
        extra[20:28, 20:28] = True
        assert m.sum() > 0
        assert m[extra].sum() / m.sum() >= 0.6

    def test_missing_component_mass_on_reference_region(self):
        train = [block_map(32, [(1, 4, 4, 8, 8), (2, 20, 20, 8, 8)])
                 for _ in range(3)]
        test = block_map(32, [(1, 4, 4, 8, 8)])  # class 2 gone
        means = self.bank_means(train, [32, 16], 2)
        m = loc.histogram_anomaly_map(test, means, train, [32, 16], 2)
        gone = np.zeros((32, 32), bool)
        gone[20:28, 20:28] = True
        assert m.sum() > 0
        assert m[gone].sum() / m.sum() >= 0.6

    def test_mass_conservation_single_size(self):
        # one patch size covering the whole map: total mass equals the L1
        # histogram discrepancy, as long as every implicated region exists
        train = [block_map(16, [(1, 0, 0, 8, 8), (2, 8, 8, 4, 4)])
                 for _ in range(2)]
        test = block_map(16, [(1, 0, 0, 8, 4), (2, 8, 8, 4, 4)])
        means = self.bank_means(train, [16], 2)
        m = loc.histogram_anomaly_map(test, means, train, [16], 2)
        from csad.histogram_scoring import class_histogram
        l1 = np.abs(class_histogram(test, 2) - class_histogram(train[0], 2)).sum()
        assert np.isclose(m.sum(), l1)

    def test_nonnegative(self):
        rng = np.random.default_rng(2)
        train = [LabelMap(rng.integers(0, 3, (16, 16), dtype=np.uint8))
                 for _ in range(4)]
        test = LabelMap(rng.integers(0, 3, (16, 16), dtype=np.uint8))
        means = self.bank_means(train, [16, 8], 2)
        m = loc.histogram_anomaly_map(test, means, train, [16, 8], 2)
        assert np.all(m >= 0)

    def test_no_training_maps(self):
        with pytest.raises(NoTrainingMaps):
            loc.histogram_anomaly_map(block_map(8, []), {}, [], [8], 1)


class TestMergeMaps:
    def test_both_zero(self):
        z = np.zeros((4, 4))
        assert not loc.merge_maps(z, z).any()

    def test_one_branch_zero(self):
        rng = np.random.default_rng(3)
        m = rng.random((5, 5))
        out = loc.merge_maps(m, np.zeros((5, 5)), sigma_patch_hist=2.0)
        assert np.allclose(out, m / 2.0)

    def test_elementwise_oracle(self):
        rng = np.random.default_rng(4)
        a = rng.random((6, 7))
        b = rng.random((6, 7))
        out = loc.merge_maps(a, b, sigma_patch_hist=0.5, sigma_lgst=4.0)
        for i in range(6):
            for j in range(7):
                assert np.isclose(out[i, j], a[i, j] / 0.5 + b[i, j] / 4.0)

    def test_shape_mismatch(self):
        with pytest.raises(DimMismatch):
            loc.merge_maps(np.zeros((2, 2)), np.zeros((3, 3)))


class TestAnomalyMapPersistence:
    def test_roundtrip_within_quantization(self, tmp_path):
        rng = np.random.default_rng(5)
        m = rng.random((20, 30)) * 7.5 - 2.0
        loc.write_anomaly_map(m, tmp_path / "a.pgm")
        back = loc.read_anomaly_map(tmp_path / "a.pgm")
        step = (m.max() - m.min()) / 65535.0
        assert back.shape == m.shape
        assert np.max(np.abs(back - m)) <= step

    def test_constant_map(self, tmp_path):
        m = np.full((8, 8), 1.5)
        loc.write_anomaly_map(m, tmp_path / "c.pgm")
        back = loc.read_anomaly_map(tmp_path / "c.pgm")
        assert np.allclose(back, 1.5)

    def test_sidecar_records_range(self, tmp_path):
        import json
        m = np.array([[0.0, 4.0]])
        loc.write_anomaly_map(m, tmp_path / "r.pgm")
        meta = json.loads((tmp_path / "r.pgm.json").read_text())
        assert meta == {"min": 0.0, "max": 4.0}
