import numpy as np
import pytest
from scipy import ndimage

from csad import mask_ops
from csad.errors import ClassAbsent, DimMismatch, EmptyMask, EmptySet
from csad.tensor_io import LabelMap, MaskSet

from oracles import (brute_force_min_rect_area, flood_fill_components,
                     random_mask_set, ref_filter_by_combine,
                     ref_filter_masks_by_grounding, ref_intersect_ratio)


def disk(size, cx, cy, r):
    yy, xx = np.mgrid[0:size, 0:size]
    return (xx - cx) ** 2 + (yy - cy) ** 2 <= r * r


class TestIntersectRatio:
    def test_disjoint(self):
        a = np.zeros((8, 8), bool)
        b = np.zeros((8, 8), bool)
        a[0, 0] = True
        b[5, 5] = True
        assert mask_ops.intersect_ratio(a, b) == 0.0

    def test_identical(self):
        m = disk(16, 8, 8, 4)
        assert mask_ops.intersect_ratio(m, m) == 1.0

    def test_contained(self):
        big = np.zeros((8, 8), bool)
        big[0:2, 0:5] = True
        small = np.zeros((8, 8), bool)
        small[0, 0:2] = True
        assert mask_ops.intersect_ratio(big, small) == 1.0

    def test_symmetric_and_bounded(self):
        rng = np.random.default_rng(5)
        for _ in range(50):
            a = rng.random((12, 12)) > 0.5
            b = rng.random((12, 12)) > 0.5
            r1 = mask_ops.intersect_ratio(a, b)
            r2 = mask_ops.intersect_ratio(b, a)
            assert r1 == r2
            assert 0.0 <= r1 <= 1.0

    def test_dim_mismatch(self):
        with pytest.raises(DimMismatch):
            mask_ops.intersect_ratio(np.zeros((2, 2), bool), np.zeros((3, 3), bool))


class TestFilterByGrounding:
    def test_contained_kept(self):
        grounding = np.ones((16, 16), bool)
        m = disk(16, 8, 8, 4)
        out = mask_ops.filter_by_grounding(grounding, MaskSet((m,)))
        assert len(out) == 1

    def test_half_covered_dropped(self):
        grounding = np.zeros((16, 16), bool)
        grounding[:, :8] = True
        m = np.zeros((16, 16), bool)
        m[4, 4:12] = True  # 50% inside
        out = mask_ops.filter_by_grounding(grounding, MaskSet((m,)))
        assert len(out) == 0

    def test_matches_reference(self):
        rng = np.random.default_rng(42)
        for _ in range(50):
            masks = random_mask_set(rng, rng.integers(1, 12))
            grounding = random_mask_set(rng, 1)[0]
            got = mask_ops.filter_by_grounding(grounding, MaskSet(tuple(masks)))
            want = ref_filter_masks_by_grounding(grounding, masks)
            assert len(got) == len(want)
            for a, b in zip(got, want):
                assert np.array_equal(a, b)


class TestFilterByCombine:
    def test_single_mask(self):
        m = disk(16, 8, 8, 4)
        assert len(mask_ops.filter_by_combine(MaskSet((m,)))) == 1

    def test_union_mask_dropped(self):
        a = disk(32, 8, 8, 4)
        b = disk(32, 24, 24, 4)
        out = mask_ops.filter_by_combine(MaskSet((a | b, a, b)))
        kept = list(out)
        assert len(kept) == 2
        assert not any(np.array_equal(m, a | b) for m in kept)

    def test_empty_set(self):
        with pytest.raises(EmptySet):
            mask_ops.filter_by_combine(MaskSet(()))

    def test_matches_reference(self):
        rng = np.random.default_rng(43)
        for _ in range(50):
            masks = random_mask_set(rng, rng.integers(1, 12))
            got = mask_ops.filter_by_combine(MaskSet(tuple(masks)))
            want = ref_filter_by_combine(masks)
            assert len(got) == len(want)
            for a, b in zip(got, want):
                assert np.array_equal(a, b)

    def test_output_union_covered_by_input(self):
        rng = np.random.default_rng(44)
        masks = random_mask_set(rng, 8)
        out = mask_ops.filter_by_combine(MaskSet(tuple(masks)))
        in_union = np.logical_or.reduce(masks)
        out_union = np.logical_or.reduce(list(out))
        assert not np.any(out_union & ~in_union)


class TestConnectedComponents:
    def test_solid_square(self):
        px = np.zeros((10, 10), dtype=np.uint8)
        px[2:6, 2:6] = 3
        out = mask_ops.connected_components(LabelMap(px), 3)
        assert len(out) == 1
        assert out[0].sum() == 16

    def test_diagonal_touch_is_one_component(self):
        px = np.zeros((4, 4), dtype=np.uint8)
        px[0, 0] = 1
        px[1, 1] = 1
        out = mask_ops.connected_components(LabelMap(px), 1)
        assert len(out) == 1

    def test_class_absent(self):
        with pytest.raises(ClassAbsent):
            mask_ops.connected_components(LabelMap(np.zeros((4, 4), np.uint8)), 2)

    def test_matches_flood_fill(self):
        rng = np.random.default_rng(9)
        for _ in range(10):
            px = (rng.random((24, 24)) > 0.6).astype(np.uint8)
            if not px.any():
                continue
            got = mask_ops.connected_components(LabelMap(px), 1)
            want = flood_fill_components(px == 1)
            assert len(got) == len(want)
            got_areas = sorted(int(m.sum()) for m in got)
            want_areas = sorted(int(m.sum()) for m in want)
            assert got_areas == want_areas


class TestMinAreaRect:
    def test_rotated_rectangle_angle(self):
        size = 128
        yy, xx = np.mgrid[0:size, 0:size].astype(float)
        t = np.radians(30.0)
        u = (xx - 64) * np.cos(t) + (yy - 64) * np.sin(t)
        v = -(xx - 64) * np.sin(t) + (yy - 64) * np.cos(t)
        mask = (np.abs(u) <= 40) & (np.abs(v) <= 15)
        _, _, angle = mask_ops.min_area_rect(mask)
        brute_area, brute_angle = brute_force_min_rect_area(mask)
        assert min(abs(angle - 30.0), abs(angle - 120.0)) < 1.0
        assert min(abs(angle % 90 - brute_angle), abs(brute_angle - angle % 90)) < 1.0

    def test_area_not_worse_than_sweep(self):
        rng = np.random.default_rng(17)
        for _ in range(10):
            mask = np.zeros((64, 64), bool)
            n = rng.integers(3, 30)
            ys = rng.integers(5, 59, n)
            xs = rng.integers(5, 59, n)
            mask[ys, xs] = True
            (cx, cy), (w, h), _ = mask_ops.min_area_rect(mask)
            brute_area, _ = brute_force_min_rect_area(mask, step_deg=0.25)
            assert w * h <= brute_area * 1.001

    def test_empty_mask(self):
        with pytest.raises(EmptyMask):
            mask_ops.min_area_rect(np.zeros((4, 4), bool))


class TestNormalizeCrop:
    def test_square_centered(self):
        img = np.zeros((64, 64))
        mask = np.zeros((64, 64), bool)
        mask[20:30, 20:30] = True
        img[mask] = 1.0
        crop = mask_ops.normalize_crop(img, mask, 0.0)
        assert crop.patch.shape == (64, 64)
        # center pixel belongs to the scaled-up square
        assert crop.mask[32, 32]
        # a square's rect diagonal equals the patch diagonal, so it fills the patch
        assert crop.mask.mean() > 0.95
        assert crop.patch[32, 32] > 0.9

    def test_square_90_symmetry(self):
        img = np.zeros((64, 64))
        mask = np.zeros((64, 64), bool)
        mask[20:30, 20:30] = True
        img[mask] = 0.8
        c0 = mask_ops.normalize_crop(img, mask, 0.0)
        c90 = mask_ops.normalize_crop(img, mask, 90.0)
        diff = np.abs(c0.patch - c90.patch).mean()
        assert diff < 0.05

    def test_rotation_equivariance(self):
        size = 96
        yy, xx = np.mgrid[0:size, 0:size].astype(float)
        blob = ((xx - 48) ** 2 / 400 + (yy - 48) ** 2 / 120) <= 1
        img = np.where(blob, 0.7, 0.0)
        theta = 25.0
        rot_img = ndimage.rotate(img, theta, reshape=False, order=1)
        rot_mask = ndimage.rotate(blob.astype(float), theta, reshape=False, order=0) > 0.5
        a = mask_ops.normalize_crop(img, blob, theta).patch
        b = mask_ops.normalize_crop(rot_img, rot_mask, 0.0).patch
        best = min(np.abs(a - b).mean(),
                   np.abs(mask_ops.normalize_crop(img, blob, -theta).patch - b).mean())
        assert best < 0.05

    def test_empty_mask(self):
        with pytest.raises(EmptyMask):
            mask_ops.normalize_crop(np.zeros((4, 4)), np.zeros((4, 4), bool), 0.0)
