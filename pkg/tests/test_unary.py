import math

import numpy as np
import pytest

from mlcrf.fields import LogitField, ProbabilityField
from mlcrf.unary import (
    RegionTranslation,
    UnaryField,
    fuse_object_unary,
    resample_bilinear,
    softmax,
    to_unary,
)


def make_logits(per_pixel):
    return LogitField(np.asarray(per_pixel, np.float32).reshape(1, 1, -1))


class TestSoftmax:
    def test_symmetry(self):
        p = softmax(make_logits([0.0, 0.0]))
        assert np.allclose(p.data, 0.5)

    def test_large_offset_stability(self):
        p = softmax(make_logits([1000.0, 1000.0 + math.log(3.0)]))
        assert abs(p.data[0, 0, 0] - 0.25) < 1e-6
        assert abs(p.data[0, 0, 1] - 0.75) < 1e-6

    def test_analytic_quarter(self):
        p = softmax(make_logits([0.0, math.log(3.0)]))
        assert abs(p.data[0, 0, 0] - 0.25) < 1e-6
        assert abs(p.data[0, 0, 1] - 0.75) < 1e-6

    def test_shift_invariance(self):
        rng = np.random.default_rng(0)
        raw = rng.normal(size=(4, 5, 3)).astype(np.float32)
        shift = rng.normal(size=(4, 5, 1)).astype(np.float32) * 50
        a = softmax(LogitField(raw))
        b = softmax(LogitField(raw + shift))
        assert np.abs(a.data - b.data).max() < 1e-6

    def test_rows_sum_to_one(self):
        rng = np.random.default_rng(1)
        p = softmax(LogitField(rng.normal(size=(8, 8, 4)).astype(np.float32) * 10))
        assert np.abs(p.data.sum(axis=2) - 1.0).max() < 1e-6


class TestToUnary:
    def test_certainty_is_zero_cost(self):
        probs = ProbabilityField(np.array([[[1.0, 0.0]]], np.float32))
        u = to_unary(probs)
        assert u.data[0, 0, 0] == 0.0

    def test_half(self):
        probs = ProbabilityField(np.array([[[0.5, 0.5]]], np.float32))
        u = to_unary(probs)
        assert abs(u.data[0, 0, 0] - 0.6931) < 1e-4

    def test_zero_probability_clamped(self):
        probs = ProbabilityField(np.array([[[1.0, 0.0]]], np.float32))
        u = to_unary(probs, floor=1e-8)
        assert abs(u.data[0, 0, 1] - (-math.log(1e-8))) < 1e-9
        assert abs(u.data[0, 0, 1] - 18.42) < 0.01

    @pytest.mark.parametrize("floor", [0.0, 0.5, 1.0, -1e-3])
    def test_bad_floor(self, floor):
        probs = ProbabilityField(np.array([[[0.5, 0.5]]], np.float32))
        with pytest.raises(ValueError):
            to_unary(probs, floor=floor)

    def test_argmax_invariance(self):
        # Minimizing cost must pick the same class as maximizing probability
        # whenever no clamping fires.
        rng = np.random.default_rng(2)
        raw = rng.random((6, 6, 3)) + 0.05
        probs = ProbabilityField(
            (raw / raw.sum(axis=2, keepdims=True)).astype(np.float32)
        )
        u = to_unary(probs)
        assert np.array_equal(
            np.argmax(probs.data, axis=2), np.argmin(u.data, axis=2)
        )


def uniform_unary(h, w, value=1.0, classes=2):
    return UnaryField(np.full((h, w, classes), value))


class TestFuseObjectUnary:
    def test_empty_region_list(self):
        scene = uniform_unary(4, 4)
        fused = fuse_object_unary(scene, [])
        assert np.array_equal(fused.data, scene.data)

    def test_full_cover(self):
        scene = uniform_unary(4, 4, 1.0)
        region = uniform_unary(4, 4, 2.0)
        fused = fuse_object_unary(scene, [(RegionTranslation(0, 0, 4, 4), region)])
        assert np.array_equal(fused.data, region.data)

    def test_partial_region_membership(self):
        scene = uniform_unary(4, 4, 1.0)
        region = uniform_unary(2, 2, 9.0)
        tr = RegionTranslation(1, 1, 2, 2)
        fused = fuse_object_unary(scene, [(tr, region)])
        replaced = fused.data != scene.data
        # Exactly the 4 region pixels (both classes each) change.
        assert replaced.sum() == 4 * 2
        for i in range(4):
            for j in range(4):
                inside = 1 <= i < 3 and 1 <= j < 3
                expected = 9.0 if inside else 1.0
                assert np.all(fused.data[i, j] == expected)

    def test_overlapping_regions_rejected(self):
        scene = uniform_unary(6, 6)
        r1 = (RegionTranslation(0, 0, 3, 3), uniform_unary(3, 3, 2.0))
        r2 = (RegionTranslation(2, 2, 3, 3), uniform_unary(3, 3, 3.0))
        with pytest.raises(ValueError, match="overlap"):
            fuse_object_unary(scene, [r1, r2])

    def test_touching_regions_allowed(self):
        scene = uniform_unary(6, 6)
        r1 = (RegionTranslation(0, 0, 3, 3), uniform_unary(3, 3, 2.0))
        r2 = (RegionTranslation(0, 3, 3, 3), uniform_unary(3, 3, 3.0))
        fused = fuse_object_unary(scene, [r1, r2])
        assert np.all(fused.data[0:3, 0:3] == 2.0)
        assert np.all(fused.data[0:3, 3:6] == 3.0)

    def test_out_of_bounds_rejected(self):
        scene = uniform_unary(4, 4)
        with pytest.raises(ValueError, match="outside"):
            fuse_object_unary(
                scene, [(RegionTranslation(3, 3, 2, 2), uniform_unary(2, 2))]
            )

    def test_dimension_mismatch_rejected(self):
        scene = uniform_unary(4, 4)
        with pytest.raises(ValueError, match="translation says"):
            fuse_object_unary(
                scene, [(RegionTranslation(0, 0, 2, 2), uniform_unary(3, 3))]
            )


class TestResampleBilinear:
    def test_identity(self):
        rng = np.random.default_rng(3)
        raw = rng.random((5, 7, 2)) + 0.01
        probs = ProbabilityField(
            (raw / raw.sum(axis=2, keepdims=True)).astype(np.float32)
        )
        out = resample_bilinear(probs, 7, 5)
        assert np.abs(out.data - probs.data).max() < 1e-6

    def test_constant_field(self):
        probs = ProbabilityField(np.full((3, 4, 2), 0.5, np.float32))
        out = resample_bilinear(probs, 9, 11)
        assert (out.height, out.width) == (11, 9)
        assert np.abs(out.data - 0.5).max() < 1e-6

    def test_midpoint(self):
        probs = ProbabilityField(
            np.array([[[1.0, 0.0]], [[0.0, 1.0]]], np.float32)
        )
        out = resample_bilinear(probs, 1, 3)
        assert np.allclose(out.data[1, 0], [0.5, 0.5], atol=1e-6)
        # Edge rows clamp to the nearest source pixel.
        assert np.allclose(out.data[0, 0], [1.0, 0.0], atol=1e-6)
        assert np.allclose(out.data[2, 0], [0.0, 1.0], atol=1e-6)

    def test_output_sums_to_one(self):
        rng = np.random.default_rng(4)
        raw = rng.random((6, 5, 3)) + 0.01
        probs = ProbabilityField(
            (raw / raw.sum(axis=2, keepdims=True)).astype(np.float32)
        )
        out = resample_bilinear(probs, 13, 4)
        assert np.abs(out.data.sum(axis=2) - 1.0).max() < 1e-6
