import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from diffpaint import (
    build_partition,
    build_weights,
    extend_add_weighted,
    restrict_to_block,
)

from conftest import rel_err


def reconstruct(field, part, weights):
    """Sum of R_i^T D_i R_i applied to a field: must reproduce it exactly."""
    out = np.zeros_like(field)
    for i, rect in enumerate(part.rects()):
        local = restrict_to_block(field, rect)
        extend_add_weighted(out, rect, weights.block(part, i), local)
    return out


class TestLayout:
    def test_4k_block_counts(self):
        part = build_partition(3840, 2160, 32, 6)
        assert (part.nx, part.ny) == (148, 83)
        assert part.nblocks == 12284
        assert 3 * part.nblocks == 36852  # one local problem per block per color channel

    def test_single_block_when_image_fits(self):
        part = build_partition(32, 32, 32, 6)
        assert part.nblocks == 1
        r = part.rect(0)
        assert (r.w, r.h) == (32, 32)
        assert not (r.inner_left or r.inner_right or r.inner_top or r.inner_bottom)

    def test_64x64_clamped_starts(self):
        part = build_partition(64, 64, 32, 6)
        np.testing.assert_array_equal(part.xs, [0, 26, 32])
        np.testing.assert_array_equal(part.ys, [0, 26, 32])
        assert part.nblocks == 9

    def test_small_image_single_full_block(self):
        part = build_partition(10, 70, 32, 6)
        assert part.nx == 1 and part.block_w == 10
        assert part.ny == 3 and part.block_h == 32

    def test_invalid_overlap(self):
        with pytest.raises(ValueError):
            build_partition(64, 64, 32, 32)
        with pytest.raises(ValueError):
            build_partition(64, 64, 8, -1)

    @given(dim=st.integers(1, 200), block=st.integers(2, 40), overlap=st.integers(0, 12))
    @settings(max_examples=200, deadline=None)
    def test_coverage_and_clamping(self, dim, block, overlap):
        if overlap >= block:
            overlap = block - 1
        part = build_partition(dim, 3, block, overlap)
        assert np.all(part.xs >= 0)
        assert part.xs[-1] + part.block_w == max(dim, min(block, dim))
        covered = np.zeros(dim, dtype=int)
        for s in part.xs:
            covered[s : s + part.block_w] += 1
        assert np.all(covered >= 1)

    def test_overlap_between_adjacent_blocks(self):
        part = build_partition(200, 200, 32, 6)
        for a, b in zip(part.xs[:-1], part.xs[1:]):
            assert a + part.block_w - b >= 6


class TestWeights:
    def test_linear_ramp_values(self):
        part = build_partition(200, 40, 32, 6)
        w = build_weights(part)
        # interior block: both x-sides inner, ramp 0, .2, .4, .6, .8, 1
        np.testing.assert_allclose(w.wx[1][:6], [0.0, 0.2, 0.4, 0.6, 0.8, 1.0], atol=1e-12)
        np.testing.assert_allclose(w.wx[1][-6:], [1.0, 0.8, 0.6, 0.4, 0.2, 0.0], atol=1e-12)
        assert np.all(w.wx[1][6:-6] == 1.0)

    def test_outermost_inner_pixel_weight_zero(self):
        part = build_partition(100, 100, 32, 6)
        w = build_weights(part)
        for ix in range(part.nx):
            if part.xs[ix] > 0:
                assert w.wx[ix][0] == 0.0
            if part.xs[ix] + part.block_w < 100:
                assert w.wx[ix][-1] == 0.0

    def test_single_cover_pixel_weight_one(self):
        part = build_partition(100, 40, 32, 6)
        w = build_weights(part)
        # pixel 15 is covered only by the first block
        assert w.wx[0][15] == 1.0

    def test_corner_overlap_sums_to_one(self):
        # exhaustive sweep over a 64x64 layout with clamped edge blocks
        part = build_partition(64, 64, 32, 6)
        weights = build_weights(part)
        total = np.zeros((64, 64))
        for i, rect in enumerate(part.rects()):
            total[rect.y0 : rect.y0 + rect.h, rect.x0 : rect.x0 + rect.w] += weights.block(
                part, i
            )
        np.testing.assert_allclose(total, 1.0, atol=1e-12)

    @given(
        width=st.integers(1, 150),
        height=st.integers(1, 150),
        seed=st.integers(0, 10_000),
    )
    @settings(max_examples=60, deadline=None)
    def test_partition_of_unity_reconstruction(self, width, height, seed):
        rng = np.random.default_rng(seed)
        part = build_partition(width, height, 32, 6)
        weights = build_weights(part)
        field = rng.normal(size=(height, width))
        assert rel_err(reconstruct(field, part, weights), field) < 1e-12


class TestRestrictExtend:
    def test_roundtrip_identity_single_block(self, rng):
        part = build_partition(20, 20, 32, 6)  # one full-domain block
        field = rng.normal(size=(20, 20))
        local = restrict_to_block(field, part.rect(0))
        np.testing.assert_array_equal(local, field)
        out = np.zeros_like(field)
        extend_add_weighted(out, part.rect(0), np.ones_like(local), local)
        np.testing.assert_array_equal(out, field)

    def test_zero_corrections_leave_global_unchanged(self, rng):
        part = build_partition(50, 50, 32, 6)
        weights = build_weights(part)
        field = rng.normal(size=(50, 50))
        snapshot = field.copy()
        for i, rect in enumerate(part.rects()):
            extend_add_weighted(field, rect, weights.block(part, i), np.zeros((rect.h, rect.w)))
        np.testing.assert_array_equal(field, snapshot)

    def test_bounds_violation(self):
        part = build_partition(50, 50, 32, 6)
        rect = part.rect(0)
        with pytest.raises(ValueError):
            restrict_to_block(np.zeros((10, 10)), rect)
        with pytest.raises(ValueError):
            extend_add_weighted(np.zeros((10, 10)), rect, np.ones((32, 32)), np.zeros((32, 32)))
