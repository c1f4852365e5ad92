import numpy as np
import pytest

from deepref.errors import ConfigError, ShapeMismatchError
from deepref.interp import LUMA_FILTERS, InterpFilterSet, MotionVectorQ, interpolate_block

HALF = (-1, 4, -11, 40, 40, -11, 4, -1)
QUARTER = (-1, 4, -10, 58, 17, -5, 1)


def naive_interpolate(ref, origin, size, mv):
    """Independent scalar reference: per-sample tap loops with clamp addressing."""
    h_img, w_img = ref.shape
    x0, y0 = origin
    w, h = size

    def at(y, x):
        return int(ref[min(max(y, 0), h_img - 1), min(max(x, 0), w_img - 1)])

    def taps_of(frac):
        if frac == 1:
            return QUARTER, -3
        if frac == 2:
            return HALF, -3
        return tuple(reversed(QUARTER)), -2

    ix, fx = mv[0] >> 2, mv[0] & 3
    iy, fy = mv[1] >> 2, mv[1] & 3
    out = np.zeros((h, w), dtype=np.int64)
    for yy in range(h):
        for xx in range(w):
            bx, by = x0 + xx + ix, y0 + yy + iy
            if fx == 0 and fy == 0:
                v = at(by, bx)
            elif fy == 0:
                taps, s = taps_of(fx)
                acc = sum(t * at(by, bx + s + k) for k, t in enumerate(taps))
                v = (acc + 32) >> 6
            elif fx == 0:
                taps, s = taps_of(fy)
                acc = sum(t * at(by + s + k, bx) for k, t in enumerate(taps))
                v = (acc + 32) >> 6
            else:
                taps_x, sx = taps_of(fx)
                taps_y, sy = taps_of(fy)
                acc = 0
                for ky, ty in enumerate(taps_y):
                    row = sum(tx * at(by + sy + ky, bx + sx + kx)
                              for kx, tx in enumerate(taps_x))
                    acc += ty * row
                v = (acc + 2048) >> 12
            out[yy, xx] = min(max(v, 0), 255)
    return out.astype(np.uint8)


class TestFilterSet:
    def test_taps_sum_to_64(self):
        for taps in (LUMA_FILTERS.half, LUMA_FILTERS.quarter, LUMA_FILTERS.three_quarter):
            assert sum(taps) == 64

    def test_half_symmetric_and_three_quarter_mirrors_quarter(self):
        assert LUMA_FILTERS.half == tuple(reversed(LUMA_FILTERS.half))
        assert LUMA_FILTERS.three_quarter == tuple(reversed(LUMA_FILTERS.quarter))

    def test_bad_sum_rejected(self):
        with pytest.raises(ConfigError, match="sum"):
            InterpFilterSet(half=(0, 0, 0, 32, 31, 0, 0, 0),
                            quarter=QUARTER, three_quarter=tuple(reversed(QUARTER)))

    def test_asymmetric_half_rejected(self):
        with pytest.raises(ConfigError, match="symmetric"):
            InterpFilterSet(half=(-2, 5, -11, 40, 40, -11, 4, -1),
                            quarter=QUARTER, three_quarter=tuple(reversed(QUARTER)))


class TestInterpolateBlock:
    def test_integer_mv_is_bit_exact_copy(self, rng):
        ref = rng.integers(0, 256, (24, 24)).astype(np.uint8)
        out = interpolate_block(ref, (4, 6), (8, 8), MotionVectorQ(0, 0))
        np.testing.assert_array_equal(out, ref[6:14, 4:12])
        out = interpolate_block(ref, (4, 6), (8, 8), MotionVectorQ(8, -4))
        np.testing.assert_array_equal(out, ref[5:13, 6:14])

    @pytest.mark.parametrize("fx", [0, 1, 2, 3])
    @pytest.mark.parametrize("fy", [0, 1, 2, 3])
    def test_dc_preserved_on_constant_frame(self, fx, fy):
        ref = np.full((20, 20), 100, dtype=np.uint8)
        out = interpolate_block(ref, (5, 5), (6, 6), MotionVectorQ(fx, fy))
        assert np.all(out == 100)

    def test_half_pel_on_linear_ramp_hits_midpoint(self):
        # f(x) = 2x; the symmetric 8-tap at the half position must give 2x+1
        ref = np.tile(np.arange(0, 64, 2, dtype=np.uint8), (8, 1))
        out = interpolate_block(ref, (8, 2), (8, 4), MotionVectorQ(2, 0))
        expected = 2 * np.arange(8, 16) + 1
        np.testing.assert_array_equal(out, np.tile(expected, (4, 1)))

    @pytest.mark.parametrize("mv", [(1, 0), (3, 0), (0, 2), (2, 2), (1, 3), (-5, 7), (9, -6)])
    def test_matches_naive_oracle(self, rng, mv):
        ref = rng.integers(0, 256, (20, 22)).astype(np.uint8)
        got = interpolate_block(ref, (5, 4), (7, 9), MotionVectorQ(*mv))
        want = naive_interpolate(ref, (5, 4), (7, 9), mv)
        np.testing.assert_array_equal(got, want)

    def test_edge_replication_near_borders(self, rng):
        # block touching the frame corner pulls support from replicated samples
        ref = rng.integers(0, 256, (16, 16)).astype(np.uint8)
        for mv in [(1, 1), (-3, -2), (2, 3)]:
            got = interpolate_block(ref, (0, 0), (6, 6), MotionVectorQ(*mv))
            want = naive_interpolate(ref, (0, 0), (6, 6), mv)
            np.testing.assert_array_equal(got, want)
        for mv in [(1, 1), (3, 2), (-2, -3)]:
            got = interpolate_block(ref, (10, 10), (6, 6), MotionVectorQ(*mv))
            want = naive_interpolate(ref, (10, 10), (6, 6), mv)
            np.testing.assert_array_equal(got, want)

    def test_output_clamped_to_8bit(self):
        # sharp step excites filter overshoot; result must stay in [0, 255]
        ref = np.zeros((16, 16), dtype=np.uint8)
        ref[:, 8:] = 255
        out = interpolate_block(ref, (4, 4), (8, 8), MotionVectorQ(2, 2))
        assert out.dtype == np.uint8

    def test_out_of_frame_origin_rejected(self):
        ref = np.zeros((16, 16), dtype=np.uint8)
        with pytest.raises(ShapeMismatchError, match="outside"):
            interpolate_block(ref, (12, 0), (8, 8), MotionVectorQ(0, 0))
        with pytest.raises(ShapeMismatchError):
            interpolate_block(ref, (-1, 0), (8, 8), MotionVectorQ(0, 0))

    def test_scalar_size_means_square_block(self, rng):
        ref = rng.integers(0, 256, (20, 20)).astype(np.uint8)
        a = interpolate_block(ref, (3, 3), 8, MotionVectorQ(1, 2))
        b = interpolate_block(ref, (3, 3), (8, 8), MotionVectorQ(1, 2))
        np.testing.assert_array_equal(a, b)


def test_mirror_symmetry_between_quarter_phases(rng):
    # reflecting the frame left-right swaps the 1/4 and 3/4 phases
    ref = rng.integers(0, 256, (12, 32)).astype(np.uint8)
    fwd = interpolate_block(ref, (8, 2), (8, 8), MotionVectorQ(1, 0))
    mirrored = ref[:, ::-1].copy()
    x0m = ref.shape[1] - (8 + 8)  # mirrored block origin
    back = interpolate_block(mirrored, (x0m, 2), (8, 8), MotionVectorQ(3 - 4, 0))
    np.testing.assert_array_equal(fwd, back[:, ::-1])
