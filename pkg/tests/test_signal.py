import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from snnvpr.errors import ConfigError, ValidationError
from snnvpr.signal import (
    EncodingConfig,
    encode_poisson,
    firing_rates,
    patch_normalize,
    patch_zscores,
    preprocess,
    resize,
    to_grayscale,
)

images_28 = arrays(np.uint8, (28, 28))


class TestGrayscale:
    def test_luma(self):
        rgb = np.array([[[255, 0, 0], [0, 255, 0], [0, 0, 255], [10, 20, 30]]], dtype=np.uint8)
        # 0.299*255 = 76.245, 0.587*255 = 149.685, 0.114*255 = 29.07, 18.15
        np.testing.assert_array_equal(to_grayscale(rgb), [[76, 150, 29, 18]])

    def test_rejects_bad_shape(self):
        with pytest.raises(ValidationError):
            to_grayscale(np.zeros((2, 2, 2)))


class TestResize:
    def test_identity(self):
        img = np.random.default_rng(0).integers(0, 256, (28, 28)).astype(np.uint8)
        np.testing.assert_array_equal(resize(img, 28, 28), img)

    def test_constant_shrink(self):
        np.testing.assert_array_equal(resize(np.full((56, 56), 100, np.uint8), 28, 28), 100)

    def test_mean_rounds_half_up(self):
        assert resize(np.array([[0, 0], [255, 255]], np.uint8), 1, 1)[0, 0] == 128

    def test_non_integer_factor(self):
        img = np.array([[0, 90, 180]], np.uint8)
        # two output cells cover [0, 1.5) and [1.5, 3)
        np.testing.assert_array_equal(resize(img, 2, 1), [[30, 150]])

    def test_upsample_bilinear(self):
        img = np.array([[0, 100]], np.uint8)
        np.testing.assert_array_equal(resize(img, 4, 1), [[0, 25, 75, 100]])

    def test_bad_size(self):
        with pytest.raises(ValidationError):
            resize(np.zeros((4, 4), np.uint8), 0, 2)

    @given(arrays(np.uint8, st.tuples(st.integers(1, 40), st.integers(1, 40))),
           st.integers(1, 30), st.integers(1, 30))
    def test_range_preserved(self, img, w, h):
        out = resize(img, w, h)
        assert out.shape == (h, w)
        assert img.min() <= out.min() and out.max() <= img.max()


class TestPatchNormalize:
    def test_constant_image(self):
        assert not patch_normalize(np.full((28, 28), 77, np.uint8)).any()

    def test_two_pixel_patch(self):
        z = patch_zscores(np.array([[0, 255]]), 2, 1)
        np.testing.assert_allclose(z, [[-1.0, 1.0]])

    def test_constant_patch_maps_to_zero(self):
        img = np.zeros((2, 4), np.uint8)
        img[:, 2:] = [[10, 20], [30, 40]]
        z = patch_zscores(img, 2, 2)
        np.testing.assert_array_equal(z[:, :2], 0.0)

    def test_not_divisible(self):
        with pytest.raises(ValidationError, match="does not tile"):
            patch_normalize(np.zeros((28, 28), np.uint8), 5, 7)

    @given(images_28)
    def test_output_range_and_zscore_stats(self, img):
        out = patch_normalize(img)
        assert out.dtype == np.uint8
        z = patch_zscores(img, 7, 7).reshape(4, 7, 4, 7)
        raw = img.astype(float).reshape(4, 7, 4, 7)
        live = raw.std(axis=(1, 3)) > 0
        np.testing.assert_allclose(z.mean(axis=(1, 3))[live], 0.0, atol=1e-9)
        np.testing.assert_allclose(z.std(axis=(1, 3))[live], 1.0, atol=1e-9)

    def test_stretch_hits_both_ends(self):
        img = np.random.default_rng(1).integers(0, 256, (28, 28)).astype(np.uint8)
        out = patch_normalize(img)
        assert out.min() == 0 and out.max() == 255

    def test_twice_keeps_zscores(self):
        # equal up to the 8-bit rounding of the first pass
        for seed in range(50):
            img = np.random.default_rng(seed).integers(0, 256, (28, 28)).astype(np.uint8)
            once = patch_normalize(img)
            twice = patch_normalize(once)
            np.testing.assert_allclose(patch_zscores(twice, 7, 7), patch_zscores(once, 7, 7), atol=0.03)

    def test_preprocess_shape(self):
        img = np.random.default_rng(2).integers(0, 256, (60, 80)).astype(np.uint8)
        assert preprocess(img).shape == (28, 28)


class TestEncoding:
    def test_rates(self):
        rates = firing_rates(np.array([[0, 255, 4]], np.uint8), 63.75)
        np.testing.assert_allclose(rates, [0.0, 63.75, 1.0])

    def test_shape_and_determinism(self):
        cfg = EncodingConfig()
        img = np.random.default_rng(0).integers(0, 256, (28, 28)).astype(np.uint8)
        a = encode_poisson(img, cfg, (0, 1, 2))
        b = encode_poisson(img, cfg, (0, 1, 2))
        assert a.shape == (700, 784) and a.dtype == bool
        np.testing.assert_array_equal(a, b)
        assert not np.array_equal(a, encode_poisson(img, cfg, (0, 1, 3)))

    def test_black_is_silent(self):
        assert not encode_poisson(np.zeros((28, 28), np.uint8), EncodingConfig(), 5).any()

    def test_full_intensity_mean_count(self):
        # 10,000 independent full-intensity pixels stand in for 10,000 trials
        cfg = EncodingConfig()
        counts = encode_poisson(np.full((100, 100), 255, np.uint8), cfg, 11).sum(axis=0)
        p = 63.75 * cfg.dt / 1000.0
        n = cfg.n_present_steps
        assert n * p == pytest.approx(22.3125)
        sigma = np.sqrt(n * p * (1 - p) / counts.size)
        assert abs(counts.mean() - 22.3125) <= 3 * sigma

    def test_rate_convergence_per_intensity(self):
        cfg = EncodingConfig()
        img = np.repeat(np.array([[32, 128, 200]], np.uint8), 3334, axis=0)
        counts = encode_poisson(img, cfg, 4).sum(axis=0).reshape(-1, 3)
        for j, level in enumerate((32, 128, 200)):
            p = level / 255 * 63.75 * cfg.dt / 1000.0
            n = cfg.n_present_steps
            sigma = np.sqrt(n * p * (1 - p) / counts.shape[0])
            assert abs(counts[:, j].mean() - n * p) <= 3 * sigma

    def test_rate_cap(self):
        cfg = EncodingConfig()
        assert firing_rates(np.full((2, 2), 255, np.uint8), cfg.max_rate).max() <= 63.75

    def test_pixel_independence(self):
        cfg = EncodingConfig()
        rng = np.random.default_rng(3)
        img = rng.integers(0, 256, (28, 28)).astype(np.uint8)
        other = img.copy()
        other[5, 5] = 255 - img[5, 5]
        a = encode_poisson(img, cfg, 9)
        b = encode_poisson(other, cfg, 9)
        keep = np.ones(784, bool)
        keep[5 * 28 + 5] = False
        np.testing.assert_array_equal(a[:, keep], b[:, keep])

    def test_probability_above_one(self):
        cfg = EncodingConfig(max_rate=1500.0)
        with pytest.raises(ConfigError):
            encode_poisson(np.full((2, 2), 255, np.uint8), cfg, 0, rate_boost=1000.0)

    @pytest.mark.parametrize("kw,field", [({"max_rate": 0}, "max_rate"), ({"t_present": 0}, "t_present"),
                                          ({"t_rest": -1}, "t_rest"), ({"max_rate": 3000.0}, "max_rate")])
    def test_config_validation(self, kw, field):
        with pytest.raises(ConfigError) as exc:
            EncodingConfig(**kw)
        assert exc.value.field == field
