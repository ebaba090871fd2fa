import math

import numpy as np
import pytest

from anchorspot.geometry import Point, Polygon, points_in_polygon
from anchorspot.labelgen import (
    DEFAULT_LEVELS,
    InstanceAnnotation,
    LevelAssignmentError,
    LevelSpec,
    WeakAnnotationError,
    assign_level,
    average_height,
    build_confidence_gt,
    build_geometry_gt,
    build_mask_gt,
    build_sampling_gt,
    build_targets,
    build_text_gt,
    decode_labels,
    encode_transcription,
)


def rect(x0, y0, x1, y1):
    return Polygon([(x0, y0), (x1, y0), (x1, y1), (x0, y1)])


def strong(poly, text="word"):
    return InstanceAnnotation(transcription=text, polygon=poly)


def weak(x, y, text="word"):
    return InstanceAnnotation(transcription=text, anchor_hint=Point(x, y), is_weak=True)


LEVEL2 = DEFAULT_LEVELS[0]
LEVEL3 = DEFAULT_LEVELS[1]


class TestAlphabet:
    def test_letters_and_digit(self):
        assert encode_transcription("ab1") == [1, 2, 28]

    def test_case_folding(self):
        assert encode_transcription("HELLO") == [8, 5, 12, 12, 15]

    def test_out_of_alphabet_dropped_with_warning(self):
        with pytest.warns(UserWarning):
            assert encode_transcription("héllo") == [8, 12, 12, 15]

    def test_roundtrip(self):
        assert decode_labels(encode_transcription("abc123xyz")) == "abc123xyz"


class TestAverageHeight:
    def test_rectangle(self):
        assert average_height(strong(rect(0, 0, 40, 10))) == 10

    def test_trapezoid_mean(self):
        poly = Polygon([(0, 0), (40, -5), (40, 15), (0, 10)])
        assert average_height(strong(poly)) == pytest.approx(15)

    def test_degenerate(self):
        poly = Polygon([(0, 0), (40, 0), (40, 0), (0, 0)])
        assert average_height(strong(poly)) == 0

    def test_weak_rejected(self):
        with pytest.raises(WeakAnnotationError):
            average_height(weak(3, 4))


class TestAssignLevel:
    def test_small_goes_fine(self):
        assert assign_level(30).level_index == 2

    def test_large_goes_coarse(self):
        assert assign_level(50).level_index == 3

    def test_boundary_goes_coarser(self):
        assert assign_level(40).level_index == 3

    def test_zero_height_rejected(self):
        with pytest.raises(LevelAssignmentError):
            assign_level(0)


class TestConfidenceGt:
    def test_no_instances(self):
        grid = build_confidence_gt([], LEVEL2, (32, 32))
        assert grid.shape == (8, 8) and not grid.any()

    def test_rectangle_matches_shrink_rasterize(self):
        # rect (2,4)-(42,24): shrunk central quad is (18,12)-(26,16)
        grid = build_confidence_gt([strong(rect(2, 4, 42, 24))], LEVEL2, (32, 48))
        expected = np.zeros((8, 12), dtype=np.uint8)
        expected[3, 4:7] = 1  # cell centers (18..26, 14)
        np.testing.assert_array_equal(grid, expected)

    def test_weak_disc(self):
        grid = build_confidence_gt([weak(17, 9)], LEVEL2, (32, 32))
        expected = np.zeros((8, 8), dtype=np.uint8)
        for h, w in ((2, 4), (2, 3), (2, 5), (1, 4), (3, 4)):
            expected[h, w] = 1
        np.testing.assert_array_equal(grid, expected)

    def test_overlap_smaller_wins(self):
        big = strong(rect(0, 0, 64, 32), "big")
        small = strong(rect(24, 6, 48, 26), "small")
        with pytest.warns(UserWarning):
            bundle = build_targets([big, small], (32, 64))
        lt = bundle.levels[0]
        # cells at the shared center belong to the smaller instance
        assert lt.instance_index[3, 8] == 1
        assert (lt.instance_index == 0).any()


class TestGeometryGt:
    def test_centered_anchor(self):
        geo, valid = build_geometry_gt([strong(rect(2, 4, 42, 24))], LEVEL2, (32, 48))
        assert valid[3, 5] == 1
        np.testing.assert_allclose(geo[:, 3, 5], [10, 20, 10, 20])

    def test_shifted_anchor(self):
        geo, valid = build_geometry_gt([strong(rect(2, 4, 42, 24))], LEVEL2, (32, 48))
        assert valid[3, 6] == 1
        np.testing.assert_allclose(geo[:, 3, 6], [10, 16, 10, 24])

    def test_weak_invalid(self):
        geo, valid = build_geometry_gt([weak(17, 9)], LEVEL2, (32, 32))
        assert not valid.any() and not geo.any()

    def test_reconstructs_bbox(self):
        rng = np.random.default_rng(0)
        for _ in range(20):
            x0, y0 = rng.uniform(0, 20, 2)
            w, h = rng.uniform(12, 60), rng.uniform(8, 30)
            inst = strong(rect(x0, y0, x0 + w, y0 + h))
            geo, valid = build_geometry_gt([inst], LEVEL2, (96, 96))
            hh, ww = np.nonzero(valid)
            if len(hh) == 0:
                continue
            cx = (ww + 0.5) * 4.0
            cy = (hh + 0.5) * 4.0
            np.testing.assert_allclose(cy - geo[0, hh, ww], y0, atol=1e-9)
            np.testing.assert_allclose(cx + geo[1, hh, ww], x0 + w, atol=1e-9)
            np.testing.assert_allclose(cy + geo[2, hh, ww], y0 + h, atol=1e-9)
            np.testing.assert_allclose(cx - geo[3, hh, ww], x0, atol=1e-9)


class TestSamplingGt:
    def test_straight_word_offsets(self):
        # center line (2,2)->(26,2); cell (3,0) center is the line midpoint
        samp, valid = build_sampling_gt([strong(rect(2, 0, 26, 4))], LEVEL2, (8, 32), K=25)
        assert valid[0, 3] == 1
        off_x = samp[0::2, 0, 3]
        off_y = samp[1::2, 0, 3]
        np.testing.assert_allclose(off_x, (np.arange(25) - 12) / 4)
        np.testing.assert_allclose(off_y, 0, atol=1e-12)
        # symmetric around the midpoint
        np.testing.assert_allclose(off_x, -off_x[::-1])

    def test_weak_invalid(self):
        samp, valid = build_sampling_gt([weak(17, 9)], LEVEL2, (32, 32))
        assert not valid.any()

    def test_decoded_points_inside_polygon(self):
        rng = np.random.default_rng(1)
        for _ in range(100):
            cx, cy = rng.uniform(40, 88, 2)
            w = rng.uniform(16, 70)
            h = rng.uniform(8, 36)
            ang = rng.uniform(0, 2 * math.pi)
            c, s = math.cos(ang), math.sin(ang)
            local = [(-w / 2, -h / 2), (w / 2, -h / 2), (w / 2, h / 2), (-w / 2, h / 2)]
            poly = Polygon([(cx + c * x - s * y, cy + s * x + c * y) for x, y in local])
            bundle = build_targets([strong(poly)], (128, 128), K=9)
            for lt in bundle.levels:
                hh, ww = np.nonzero(lt.valid_mask)
                for h_i, w_i in zip(hh, ww):
                    anchor_x = (w_i + 0.5) * lt.level.stride
                    anchor_y = (h_i + 0.5) * lt.level.stride
                    px = anchor_x + lt.sampling[0::2, h_i, w_i] * lt.level.stride
                    py = anchor_y + lt.sampling[1::2, h_i, w_i] * lt.level.stride
                    assert points_in_polygon(px, py, poly).all()


class TestMaskAndTextGt:
    def test_mask_rectangle(self):
        masks = build_mask_gt([strong(rect(2, 2, 10, 6))], (12, 16))
        assert masks[0].shape == (12, 16)
        assert masks[0][3:6, 3:10].all()

    def test_mask_weak_none(self):
        assert build_mask_gt([weak(3, 3)], (12, 16)) == [None]

    def test_text_sequences(self):
        texts = build_text_gt([strong(rect(0, 0, 10, 4), "ab1"), weak(2, 2, "zz")])
        assert texts == [[1, 2, 28], [26, 26]]

    def test_unusable_text_skipped(self):
        with pytest.warns(UserWarning):
            texts = build_text_gt([strong(rect(0, 0, 10, 4), "éé")])
        assert texts == [None]


class TestBundleInvariants:
    def test_each_instance_positive_in_exactly_one_level(self):
        rng = np.random.default_rng(2)
        for _ in range(50):
            insts = []
            x = 4.0
            for _ in range(rng.integers(1, 4)):
                w = float(rng.uniform(30, 80))
                h = float(rng.uniform(10, 70))
                y0 = float(rng.uniform(0, 150))
                insts.append(strong(rect(x, y0, x + w, y0 + h)))
                x += w + 20
            bundle = build_targets(insts, (256, 256))
            for idx, inst in enumerate(insts):
                levels_hit = [
                    lt.level.level_index
                    for lt in bundle.levels
                    if (lt.instance_index == idx).any()
                ]
                expected = assign_level(average_height(inst)).level_index
                assert levels_hit == [expected]

    def test_weak_validity_split(self):
        bundle = build_targets(
            [strong(rect(2, 4, 42, 24), "abc"), weak(100, 9, "xy")], (64, 128))
        lt = bundle.levels[0]
        weak_cells = lt.weak_mask
        assert weak_cells.any()
        # weak cells: positive in confidence, carry text, invalid elsewhere
        assert lt.confidence[weak_cells].all()
        assert (lt.instance_index[weak_cells] == 1).all()
        assert not lt.valid_mask[weak_cells].any()
        assert bundle.masks[1] is None
        assert bundle.texts[1] == [24, 25]
        # strong cells valid
        strong_cells = lt.positive_mask & ~weak_cells
        assert lt.valid_mask[strong_cells].all()

    def test_zero_height_skipped_with_warning(self):
        degen = strong(Polygon([(0, 0), (40, 0), (40, 0), (0, 0)]))
        with pytest.warns(UserWarning):
            bundle = build_targets([degen], (32, 32))
        assert not bundle.levels[0].positive_mask.any()
        assert not bundle.levels[1].positive_mask.any()

    def test_positive_mask_matches_confidence(self):
        bundle = build_targets(
            [strong(rect(2, 4, 42, 24)), strong(rect(10, 40, 150, 130), "tall")],
            (160, 160))
        for lt in bundle.levels:
            np.testing.assert_array_equal(lt.positive_mask, lt.confidence.astype(bool))
            assert (lt.weak_mask & ~lt.positive_mask).sum() == 0
