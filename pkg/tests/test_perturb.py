import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

import oracles
from proa.perturb import (
    DEFAULT_BOXES,
    FAMILY_DIMS,
    Family,
    ImageTensor,
    PerturbationSpec,
    affine_transform,
    apply,
    brightness_contrast,
    gaussian_blur,
    gaussian_kernel_1d,
    hue_shift,
    params_to_affine,
    sample_theta,
    saturation_shift,
)

rgb_images = arrays(
    dtype=np.float64,
    shape=(6, 5, 3),
    elements=st.floats(min_value=0.0, max_value=1.0, width=64),
).map(ImageTensor)


def max_abs_diff(a: ImageTensor, b: ImageTensor) -> float:
    return float(np.abs(a.data - b.data).max())


class TestImageTensor:
    def test_rejects_out_of_range(self):
        with pytest.raises(ValueError):
            ImageTensor(np.full((2, 2, 1), 1.5))

    def test_rejects_bad_channels(self):
        with pytest.raises(ValueError):
            ImageTensor(np.zeros((2, 2, 2)))

    def test_rejects_non_finite(self):
        bad = np.zeros((2, 2, 1))
        bad[0, 0, 0] = np.nan
        with pytest.raises(ValueError):
            ImageTensor(bad)

    def test_properties(self):
        img = ImageTensor(np.zeros((3, 4, 1)))
        assert (img.height, img.width, img.channels) == (3, 4, 1)


class TestPerturbationSpec:
    def test_default_boxes_fill_in(self):
        spec = PerturbationSpec(family=Family.ROTATION)
        assert spec.theta_box == DEFAULT_BOXES[Family.ROTATION]

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError):
            PerturbationSpec(family=Family.TRANSLATION, theta_box=((0, 1),))

    def test_inverted_box(self):
        with pytest.raises(ValueError):
            PerturbationSpec(family=Family.ROTATION, theta_box=((1.0, -1.0),))

    def test_family_dims_cover_all_families(self):
        assert set(FAMILY_DIMS) == set(Family)


class TestSampleTheta:
    def test_degenerate_interval(self):
        spec = PerturbationSpec(family=Family.ROTATION, theta_box=((5.0, 5.0),))
        rng = np.random.default_rng(0)
        for _ in range(10):
            assert sample_theta(spec, rng)[0] == 5.0

    def test_uniform_moments(self):
        spec = PerturbationSpec(family=Family.ROTATION, theta_box=((-35.0, 35.0),))
        rng = np.random.default_rng(123)
        draws = np.array([sample_theta(spec, rng)[0] for _ in range(100_000)])
        # mean of U(-35, 35) is 0 with sd 70/sqrt(12)/sqrt(n)
        assert abs(draws.mean()) < 3.0 * (70.0 / math.sqrt(12.0)) / math.sqrt(1e5)
        assert draws.min() >= -35.0 and draws.max() <= 35.0

    def test_equal_seeds_equal_streams(self):
        spec = PerturbationSpec(family=Family.TRANSLATION)
        rng1, rng2 = np.random.default_rng(4), np.random.default_rng(4)
        for _ in range(20):
            assert np.array_equal(sample_theta(spec, rng1), sample_theta(spec, rng2))


class TestParamsToAffine:
    def test_identity(self):
        assert np.array_equal(
            params_to_affine(), np.array([[1.0, 0.0, 0.0], [0.0, 1.0, 0.0]])
        )

    def test_quarter_turn(self):
        m = params_to_affine(theta_r=math.pi / 2.0)
        expected = np.array([[0.0, -1.0, 0.0], [1.0, 0.0, 0.0]])
        assert np.allclose(m, expected, atol=1e-15)

    def test_pure_scaling(self):
        m = params_to_affine(theta_s=1.3)
        assert np.allclose(m, [[1.3, 0.0, 0.0], [0.0, 1.3, 0.0]], atol=1e-15)

    def test_rejects_nonpositive_scale(self):
        with pytest.raises(ValueError):
            params_to_affine(theta_s=0.0)


class TestAffineTransform:
    def test_identity_exact(self, random_image):
        out = affine_transform(random_image, params_to_affine())
        assert np.array_equal(out.data, random_image.data)

    def test_matches_reference_on_random_matrices(self, random_gray_image):
        rng = np.random.default_rng(77)
        for _ in range(12):
            theta_r = rng.uniform(-1.0, 1.0)
            theta_t = tuple(rng.uniform(-0.5, 0.5, size=2))
            theta_s = rng.uniform(0.6, 1.5)
            m = params_to_affine(theta_r, theta_t, theta_s)
            ours = affine_transform(random_gray_image, m)
            ref = oracles.bilinear_affine_reference(random_gray_image.data, m)
            assert float(np.abs(ours.data - ref).max()) < 1e-9

    def test_integer_pixel_shift(self):
        rng = np.random.default_rng(5)
        img = ImageTensor(rng.random((6, 9, 1)))
        w = img.width
        for k in (1, 3):
            m = params_to_affine(theta_t=(2.0 * k / (w - 1), 0.0))
            ours = affine_transform(img, m).data
            expected = np.zeros_like(img.data)
            expected[:, : w - k, :] = img.data[:, k:, :]  # content moves left
            assert float(np.abs(ours - expected).max()) < 1e-9

    def test_half_turn_of_symmetric_pattern(self):
        ys, xs = np.meshgrid(np.linspace(-1, 1, 7), np.linspace(-1, 1, 7),
                             indexing="ij")
        pattern = ImageTensor((0.5 + 0.3 * xs * ys)[..., None])
        out = affine_transform(pattern, params_to_affine(theta_r=math.pi))
        assert max_abs_diff(out, pattern) < 1e-6

    def test_all_out_of_bounds_gives_black(self, random_image):
        m = params_to_affine(theta_t=(10.0, 10.0))
        out = affine_transform(random_image, m)
        assert out.data.max() == 0.0

    def test_rejects_bad_matrix(self, random_image):
        with pytest.raises(ValueError):
            affine_transform(random_image, np.full((2, 3), np.nan))


class TestGaussianBlur:
    def test_zero_variance_is_identity(self, random_image):
        assert max_abs_diff(gaussian_blur(random_image, 0.0), random_image) == 0.0

    def test_constant_image_fixed_point(self):
        img = ImageTensor(np.full((10, 10, 3), 0.37))
        out = gaussian_blur(img, 4.0)
        assert max_abs_diff(out, img) < 1e-12

    def test_kernel_shape_and_mass(self):
        kernel = gaussian_kernel_1d(2.0)
        assert len(kernel) == 2 * math.ceil(3.0 * math.sqrt(2.0)) + 1
        assert kernel.sum() == pytest.approx(1.0, abs=1e-12)

    def test_point_spread_matches_dense_oracle(self):
        theta_g = 2.0
        radius = math.ceil(3.0 * math.sqrt(theta_g))
        size = 4 * radius + 3
        data = np.zeros((size, size, 1))
        data[size // 2, size // 2, 0] = 1.0
        img = ImageTensor(data)
        ours = gaussian_blur(img, theta_g).data
        ref = oracles.dense_blur_reference(data, gaussian_kernel_1d(theta_g))
        interior = slice(radius, size - radius)
        diff = np.abs(ours - ref)[interior, interior]
        assert float(diff.max()) < 1e-9
        # the stamp is the renormalised, truncated 2-D bell
        k = gaussian_kernel_1d(theta_g)
        stamp = np.outer(k, k)
        got = ours[size // 2 - radius : size // 2 + radius + 1,
                   size // 2 - radius : size // 2 + radius + 1, 0]
        assert float(np.abs(got - stamp).max()) < 1e-12

    def test_separable_matches_dense_on_interior(self, random_image):
        theta_g = 1.3
        radius = math.ceil(3.0 * math.sqrt(theta_g))
        rng = np.random.default_rng(11)
        data = rng.random((4 * radius + 2, 4 * radius + 2, 3))
        img = ImageTensor(data)
        ours = gaussian_blur(img, theta_g).data
        ref = oracles.dense_blur_reference(data, gaussian_kernel_1d(theta_g))
        interior = slice(radius, data.shape[0] - radius)
        assert float(np.abs(ours - ref)[interior, interior].max()) < 1e-9

    def test_rejects_negative_variance(self, random_image):
        with pytest.raises(ValueError):
            gaussian_blur(random_image, -0.1)


class TestHueShift:
    def test_zero_shift_identity(self, random_image):
        assert max_abs_diff(hue_shift(random_image, 0.0), random_image) < 1e-6

    def test_full_turn_identity(self, random_image):
        assert max_abs_diff(hue_shift(random_image, 2.0 * math.pi),
                            random_image) < 1e-6

    def test_red_to_green(self):
        red = ImageTensor(np.array([[[1.0, 0.0, 0.0]]]))
        out = hue_shift(red, 2.0 * math.pi / 3.0)
        assert np.allclose(out.data, [[[0.0, 1.0, 0.0]]], atol=1e-6)

    def test_matches_colorsys_reference(self, random_image):
        for theta_h in (0.7, -1.2, 3.0):
            ours = hue_shift(random_image, theta_h).data
            ref = oracles.hue_shift_reference(random_image.data, theta_h)
            assert float(np.abs(ours - ref).max()) < 1e-9

    def test_periodicity(self, random_image):
        theta = 1.1
        back = hue_shift(hue_shift(random_image, theta), 2.0 * math.pi - theta)
        assert max_abs_diff(back, random_image) < 1e-5

    def test_rejects_grayscale(self, random_gray_image):
        with pytest.raises(ValueError):
            hue_shift(random_gray_image, 0.5)


class TestSaturationShift:
    def test_zero_shift_identity(self, random_image):
        assert max_abs_diff(saturation_shift(random_image, 0.0),
                            random_image) < 1e-6

    def test_gray_image_is_fixed_point(self):
        gray = ImageTensor(np.repeat(np.full((4, 4, 1), 0.42), 3, axis=2))
        for theta_s in (-1.0, -0.3, 0.0, 0.8):
            assert max_abs_diff(saturation_shift(gray, theta_s), gray) < 1e-12

    def test_full_desaturation_keeps_brightness(self, random_image):
        out = saturation_shift(random_image, -1.0)
        brightness = random_image.data.max(axis=2, keepdims=True)
        assert float(np.abs(out.data - brightness).max()) < 1e-9
        ref = oracles.saturation_shift_reference(random_image.data, -1.0)
        assert float(np.abs(out.data - ref).max()) < 1e-9

    def test_matches_colorsys_reference(self, random_image):
        for theta_s in (-0.5, 0.25, 0.5):
            ours = saturation_shift(random_image, theta_s).data
            ref = oracles.saturation_shift_reference(random_image.data, theta_s)
            assert float(np.abs(ours - ref).max()) < 1e-9

    def test_rejects_grayscale(self, random_gray_image):
        with pytest.raises(ValueError):
            saturation_shift(random_gray_image, 0.2)

    def test_rejects_below_minus_one(self, random_image):
        with pytest.raises(ValueError):
            saturation_shift(random_image, -1.5)


class TestBrightnessContrast:
    def test_identity(self, random_image):
        out = brightness_contrast(random_image, 0.0, 0.0)
        assert np.array_equal(out.data, random_image.data)

    def test_clamping(self):
        img = ImageTensor(np.array([[[0.9]]]))
        out = brightness_contrast(img, 0.2, 0.3)
        assert out.data[0, 0, 0] == 1.0

    def test_contrast_only(self):
        img = ImageTensor(np.array([[[0.5]]]))
        out = brightness_contrast(img, 0.0, -0.3)
        assert out.data[0, 0, 0] == pytest.approx(0.35, abs=1e-12)

    def test_rejects_degenerate_contrast(self, random_image):
        with pytest.raises(ValueError):
            brightness_contrast(random_image, 0.0, -1.0)


class TestApply:
    def test_identity_rotation_exact(self, random_image):
        spec = PerturbationSpec(family=Family.ROTATION)
        out = apply(spec, [0.0], random_image)
        assert np.array_equal(out.data, random_image.data)

    def test_translation_dispatch(self, random_image):
        spec = PerturbationSpec(family=Family.TRANSLATION)
        via_apply = apply(spec, [0.3, 0.3], random_image)
        direct = affine_transform(
            random_image, params_to_affine(theta_t=(0.3, 0.3))
        )
        assert np.array_equal(via_apply.data, direct.data)

    def test_scaling_dispatch(self, random_image):
        spec = PerturbationSpec(family=Family.SCALING)
        via_apply = apply(spec, [1.2], random_image)
        direct = affine_transform(random_image, params_to_affine(theta_s=1.2))
        assert np.array_equal(via_apply.data, direct.data)

    def test_blur_dispatch(self, random_image):
        spec = PerturbationSpec(family=Family.GAUSSIAN_BLUR)
        via_apply = apply(spec, [4.0], random_image)
        direct = gaussian_blur(random_image, 4.0)
        assert np.array_equal(via_apply.data, direct.data)

    def test_dimension_mismatch(self, random_image):
        spec = PerturbationSpec(family=Family.ROTATION)
        with pytest.raises(ValueError):
            apply(spec, [0.1, 0.2], random_image)


IDENTITY_THETAS = {
    Family.ROTATION: [0.0],
    Family.TRANSLATION: [0.0, 0.0],
    Family.SCALING: [1.0],
    Family.HUE: [0.0],
    Family.SATURATION: [0.0],
    Family.BRIGHTNESS_CONTRAST: [0.0, 0.0],
    Family.GAUSSIAN_BLUR: [0.0],
}


class TestFamilyProperties:
    @pytest.mark.parametrize("family", list(Family))
    def test_identity_elements(self, family, random_image):
        spec = PerturbationSpec(family=family)
        out = apply(spec, IDENTITY_THETAS[family], random_image)
        assert max_abs_diff(out, random_image) < 1e-6

    @pytest.mark.parametrize("family", list(Family))
    def test_range_and_shape_preserved_on_default_box(self, family):
        rng = np.random.default_rng(31)
        spec = PerturbationSpec(family=family)
        image = ImageTensor(rng.random((7, 7, 3)))
        for _ in range(25):
            theta = sample_theta(spec, rng)
            out = apply(spec, theta, image)
            assert out.shape == image.shape
            assert out.data.min() >= 0.0 and out.data.max() <= 1.0

    @given(rgb_images, st.floats(min_value=-0.3, max_value=0.3),
           st.floats(min_value=-0.3, max_value=0.3))
    @settings(max_examples=40, deadline=None)
    def test_brightness_contrast_range(self, image, theta_b, theta_c):
        out = brightness_contrast(image, theta_b, theta_c)
        assert out.data.min() >= 0.0 and out.data.max() <= 1.0

    @given(rgb_images, st.floats(min_value=-math.pi, max_value=math.pi))
    @settings(max_examples=25, deadline=None)
    def test_hue_shift_preserves_brightness(self, image, theta_h):
        out = hue_shift(image, theta_h)
        assert np.allclose(
            out.data.max(axis=2), image.data.max(axis=2), atol=1e-9
        )
