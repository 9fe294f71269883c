import colorsys
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from summatch.features import (
    FeatureSpace,
    FeatureVector,
    FrameDescriptor,
    PixelImage,
    block_bounds,
    block_stats,
    chrominance,
    extract,
    feature_length,
    hue_histogram,
    load_precomputed_features,
    ohta,
    rgb_to_hsv,
    rgb_to_hsv_array,
    split_blocks,
    write_feature_file,
)

EXPECTED_LENGTHS = {
    FeatureSpace.RGB_9blocks: 54,
    FeatureSpace.HSV_9blocks: 54,
    FeatureSpace.CHR_9blocks: 36,
    FeatureSpace.OHT_9blocks: 54,
    FeatureSpace.H8_9blocks: 72,
    FeatureSpace.H16_1block: 16,
    FeatureSpace.H16_4blocks: 64,
    FeatureSpace.H16_9blocks: 144,
    FeatureSpace.H32_1block: 32,
}


def random_image(rng, width, height):
    return PixelImage(rng.random((height, width, 3)))


class TestConversions:
    @pytest.mark.parametrize("rgb, hsv", [
        ((1, 0, 0), (0.0, 1.0, 1.0)),
        ((0, 1, 0), (1 / 3, 1.0, 1.0)),
        ((0.5, 0.5, 0.5), (0.0, 0.0, 0.5)),
        ((0, 0, 0), (0.0, 0.0, 0.0)),
        ((0, 1, 1), (0.5, 1.0, 1.0)),
    ])
    def test_rgb_to_hsv_fixtures(self, rgb, hsv):
        p = rgb_to_hsv(rgb)
        assert (p.h, p.s, p.v) == pytest.approx(hsv)

    def test_rgb_to_hsv_matches_colorsys(self):
        rng = np.random.default_rng(0)
        pixels = rng.random((2000, 3))
        ours = rgb_to_hsv_array(pixels)
        for px, (h, s, v) in zip(pixels, ours):
            rh, rs, rv = colorsys.rgb_to_hsv(*px)
            assert 0.0 <= h < 1.0
            dh = abs(h - rh)
            assert min(dh, 1 - dh) < 1e-12
            assert s == pytest.approx(rs, abs=1e-12)
            assert v == pytest.approx(rv, abs=1e-12)

    def test_hue_never_reaches_one(self):
        # red with a hair of blue sits just below a full turn
        px = np.array([[1.0, 0.0, 1e-17], [1.0, 0.0, 1e-300]])
        assert np.all(rgb_to_hsv_array(px)[:, 0] < 1.0)

    @pytest.mark.parametrize("rgb, expected", [
        ((1, 0, 0), (1.0, 0.0)),
        ((0.4, 0.4, 0.4), (1 / math.sqrt(3), 1 / math.sqrt(3))),
        ((0, 0, 0), (0.0, 0.0)),
    ])
    def test_chrominance(self, rgb, expected):
        assert chrominance(rgb) == pytest.approx(expected)

    @pytest.mark.parametrize("rgb, expected", [
        ((0.7, 0.7, 0.7), (0.7, 0.0, 0.0)),
        ((1, 0, 0), (1 / 3, 1.0, -0.5)),
        ((0, 1, 0), (1 / 3, 0.0, 1.0)),
    ])
    def test_ohta(self, rgb, expected):
        assert ohta(rgb) == pytest.approx(expected)


class TestPixelImage:
    def test_rejects_out_of_range(self):
        with pytest.raises(ValueError):
            PixelImage(np.full((2, 2, 3), 1.5))

    def test_rejects_bad_shape(self):
        with pytest.raises(ValueError):
            PixelImage(np.zeros((2, 2)))


class TestSplitBlocks:
    def test_exact_division(self):
        blocks = split_blocks(PixelImage(np.zeros((9, 9, 3))), 3)
        assert len(blocks) == 9
        assert all((b.width, b.height) == (3, 3) for b in blocks)

    def test_floor_rule_widths(self):
        # boundaries floor(i*10/3) = 0, 3, 6, 10
        assert block_bounds(10, 3) == [(0, 3), (3, 6), (6, 10)]
        blocks = split_blocks(PixelImage(np.zeros((10, 10, 3))), 3)
        assert [b.width for b in blocks[:3]] == [3, 3, 4]
        assert [b.height for b in blocks[::3]] == [3, 3, 4]

    def test_identity_grid(self):
        img = random_image(np.random.default_rng(1), 5, 7)
        (block,) = split_blocks(img, 1)
        assert np.array_equal(block.pixels, img.pixels)

    def test_row_major_order(self):
        px = np.zeros((4, 4, 3))
        px[:2, 2:, 0] = 1.0  # top-right block red
        blocks = split_blocks(PixelImage(px), 2)
        assert [b.pixels[..., 0].max() for b in blocks] == [0.0, 1.0, 0.0, 0.0]

    def test_too_small(self):
        with pytest.raises(ValueError, match="image too small for grid"):
            split_blocks(PixelImage(np.zeros((2, 5, 3))), 3)

    @given(st.integers(3, 64), st.integers(3, 64), st.sampled_from([1, 2, 3]))
    def test_partition(self, width, height, grid):
        # tag every pixel with its own coordinate and check each is seen once
        ys, xs = np.mgrid[0:height, 0:width]
        px = np.stack([ys / height, xs / width, np.zeros_like(ys, dtype=float)], axis=-1)
        blocks = split_blocks(PixelImage(px), grid)
        assert sum(b.width * b.height for b in blocks) == width * height
        seen = {(round(a * height), round(b * width))
                for blk in blocks for a, b, _ in blk.pixels.reshape(-1, 3)}
        assert len(seen) == width * height


class TestBlockStats:
    def test_constant_red(self):
        fv = block_stats(PixelImage.constant(9, 9, (1, 0, 0)), FeatureSpace.RGB_9blocks)
        assert fv.blocks().tolist() == [[1, 0, 0, 0, 0, 0]] * 9

    def test_constant_gray_ohta(self):
        fv = block_stats(PixelImage.constant(9, 9, (0.5, 0.5, 0.5)), FeatureSpace.OHT_9blocks)
        assert np.allclose(fv.blocks(), [[0.5, 0, 0, 0, 0, 0]] * 9)

    def test_two_point_population_std(self):
        # each block of a 3x6 image is 1x2: one black and one white pixel
        px = np.zeros((3, 6, 3))
        px[:, 1::2] = 1.0
        fv = block_stats(PixelImage(px), FeatureSpace.RGB_9blocks)
        assert np.allclose(fv.blocks(), [[0.5] * 6] * 9)

    def test_hsv_block_of_pure_green(self):
        fv = block_stats(PixelImage.constant(3, 3, (0, 1, 0)), FeatureSpace.HSV_9blocks)
        assert np.allclose(fv.blocks()[0], [1 / 3, 1, 1, 0, 0, 0])

    def test_chrominance_block_layout(self):
        fv = block_stats(PixelImage.constant(6, 6, (1, 0, 0)), FeatureSpace.CHR_9blocks)
        assert fv.blocks().shape == (9, 4)
        assert np.allclose(fv.blocks(), [[1, 0, 0, 0]] * 9)

    def test_rejects_histogram_space(self):
        with pytest.raises(ValueError):
            block_stats(PixelImage.constant(3, 3, (1, 0, 0)), FeatureSpace.H32_1block)


class TestHueHistogram:
    def test_constant_red(self):
        fv = hue_histogram(PixelImage.constant(10, 10, (1, 0, 0)), 32, 1)
        expected = np.zeros(32)
        expected[0] = 1.0
        assert np.array_equal(fv.values, expected)
        assert fv.space is FeatureSpace.H32_1block

    def test_half_red_half_cyan(self):
        px = np.zeros((4, 8, 3))
        px[:, :4] = (1, 0, 0)
        px[:, 4:] = (0, 1, 1)
        fv = hue_histogram(PixelImage(px), 32, 1)
        assert fv.values[0] == 0.5 and fv.values[16] == 0.5
        assert fv.values.sum() == 1.0

    def test_constant_green_eight_bins(self):
        fv = hue_histogram(PixelImage.constant(5, 5, (0, 1, 0)), 8, 1, space=FeatureSpace.H8_9blocks)
        assert fv.values[2] == 1.0

    def test_unnamed_combination_needs_space(self):
        with pytest.raises(ValueError):
            hue_histogram(PixelImage.constant(5, 5, (0, 1, 0)), 8, 1)

    @given(st.floats(0, 1))
    def test_gray_levels_collapse(self, level):
        fv = extract(PixelImage.constant(6, 6, (level,) * 3), FeatureSpace.H16_4blocks)
        assert np.array_equal(fv.blocks()[:, 0], np.ones(4))
        assert fv.values.sum() == 4.0

    @settings(max_examples=60, deadline=None)
    @given(st.integers(0, 2**32 - 1), st.integers(3, 64), st.integers(3, 64),
           st.sampled_from([s for s in FeatureSpace if s.is_histogram]))
    def test_normalized_per_block(self, seed, width, height, space):
        fv = extract(random_image(np.random.default_rng(seed), width, height), space)
        sums = fv.blocks().sum(axis=1)
        assert np.all(np.abs(sums - 1) <= 1e-9)
        assert fv.values.min() >= 0

    @settings(max_examples=40, deadline=None)
    @given(st.integers(0, 2**32 - 1), st.sampled_from([8, 16, 32]), st.integers(0, 31),
           st.integers(3, 64), st.integers(3, 64))
    def test_hue_rotation_permutes_bins(self, seed, bins, k, width, height):
        rng = np.random.default_rng(seed)
        k %= bins
        # keep hues well inside their bins so float round-off cannot cross an edge
        bin_idx = rng.integers(0, bins, size=(height, width))
        frac = rng.uniform(0.2, 0.8, size=(height, width))
        s = rng.uniform(0.3, 1.0, size=(height, width))
        v = rng.uniform(0.3, 1.0, size=(height, width))

        def image(shift):
            h = ((bin_idx + shift) % bins + frac) / bins
            rgb = [colorsys.hsv_to_rgb(*hsv) for hsv in zip(h.ravel(), s.ravel(), v.ravel())]
            return PixelImage(np.array(rgb).reshape(height, width, 3))

        grid = 1 if bins == 32 else 3 if bins == 8 else 2
        base = hue_histogram(image(0), bins, grid)
        rotated = hue_histogram(image(k), bins, grid)
        assert np.allclose(np.roll(base.blocks(), k, axis=1), rotated.blocks(), atol=1e-12)


class TestExtract:
    @pytest.mark.parametrize("space, length", EXPECTED_LENGTHS.items())
    def test_lengths(self, space, length):
        img = random_image(np.random.default_rng(space.value), 17, 13)
        assert len(extract(img, space)) == length == feature_length(space)

    def test_cnn_not_extractable(self):
        with pytest.raises(ValueError):
            extract(PixelImage.constant(3, 3, (0, 0, 0)), FeatureSpace.CNN)

    @pytest.mark.parametrize("value", ["h32_1block", 9, "9", FeatureSpace.H32_1block])
    def test_parse_space(self, value):
        assert FeatureSpace.parse(value) is FeatureSpace.H32_1block

    def test_feature_vector_equality(self):
        a = FeatureVector(FeatureSpace.H32_1block, np.ones(32) / 32)
        assert a == FeatureVector(FeatureSpace.H32_1block, np.ones(32) / 32)
        assert a != FeatureVector(FeatureSpace.H16_1block, np.ones(32) / 32)


class TestPrecomputed:
    def test_cnn_rows(self, tmp_path):
        rng = np.random.default_rng(3)
        lines = ["# space=CNN dim=4096"]
        for i in range(3):
            lines.append(" ".join([str(i)] + [f"{x:.6f}" for x in rng.random(4096)]))
        path = tmp_path / "cnn.txt"
        path.write_text("\n".join(lines) + "\n")
        descs = load_precomputed_features(path, "CNN")
        assert [d.frame_index for d in descs] == [0, 1, 2]
        assert all(len(d.vector) == 4096 and d.space is FeatureSpace.CNN for d in descs)

    def test_empty_file(self, tmp_path):
        path = tmp_path / "empty.txt"
        path.write_text("")
        with pytest.raises(ValueError, match="no frames"):
            load_precomputed_features(path, "CNN")

    def test_header_only(self, tmp_path):
        path = tmp_path / "h.txt"
        path.write_text("# space=CNN dim=3\n")
        with pytest.raises(ValueError, match="no frames"):
            load_precomputed_features(path, "CNN")

    def test_dimension_mismatch(self, tmp_path):
        path = tmp_path / "bad.txt"
        path.write_text("# space=CNN dim=3\n0 1 2 3\n1 1 2\n")
        with pytest.raises(ValueError, match="dimension mismatch"):
            load_precomputed_features(path, "CNN")

    def test_unknown_tag(self, tmp_path):
        path = tmp_path / "bad.txt"
        path.write_text("# space=SIFT dim=2\n0 1 2\n")
        with pytest.raises(ValueError, match="unknown space tag"):
            load_precomputed_features(path, None)

    def test_tag_mismatch(self, tmp_path):
        path = tmp_path / "ext.txt"
        path.write_text("# space=external dim=2\n0 1 2\n")
        with pytest.raises(ValueError, match="does not match"):
            load_precomputed_features(path, "CNN")
        assert len(load_precomputed_features(path, "external")) == 1

    def test_missing_header(self, tmp_path):
        path = tmp_path / "bad.txt"
        path.write_text("0 1 2\n")
        with pytest.raises(ValueError, match="malformed"):
            load_precomputed_features(path, "CNN")

    def test_round_trip(self, tmp_path):
        img = random_image(np.random.default_rng(5), 12, 12)
        fv = extract(img, FeatureSpace.H16_9blocks)
        path = tmp_path / "h16.txt"
        with open(path, "w") as fh:
            write_feature_file(fh, "H16_9blocks", [FrameDescriptor(4, fv.space, fv)])
        (back,) = load_precomputed_features(path, "H16_9blocks")
        assert back.frame_index == 4
        assert back.vector == fv
