import numpy as np
import pytest

from cism.image import Image2D, image_new
from cism.sampling import (MeasurementVector, SamplingMask, embed,
                           make_full_mask, make_skip_mask, measure)


class TestSkipMask:
    def test_4x4_pattern(self):
        mask = make_skip_mask(4, 4)
        sampled = {tuple(idx) for idx in np.argwhere(mask.pattern)}
        assert sampled == {(0, 0), (0, 2), (2, 0), (2, 2)}
        assert mask.n_sampled == 4

    def test_single_point(self):
        assert make_skip_mask(1, 1).n_sampled == 1

    def test_odd_dims_count(self):
        assert make_skip_mask(5, 5).n_sampled == 9

    def test_even_dims_quarter(self):
        mask = make_skip_mask(256, 256)
        assert mask.n_sampled == 256 * 256 // 4 == 16384

    def test_pattern_is_even_indices(self):
        mask = make_skip_mask(7, 6)
        i, j = np.indices((7, 6))
        assert np.array_equal(mask.pattern, (i % 2 == 0) & (j % 2 == 0))

    def test_sample_independent(self):
        a = make_skip_mask(32, 16)
        b = make_skip_mask(32, 16)
        assert np.array_equal(a.pattern, b.pattern)

    def test_invalid_dims(self):
        with pytest.raises(ValueError):
            make_skip_mask(0, 4)


class TestMeasure:
    def test_2x2_gathers_corner(self):
        img = Image2D([[1.0, 2.0], [3.0, 4.0]], 25.0)
        y = measure(make_skip_mask(2, 2), img)
        assert np.array_equal(y.values, [1.0])

    def test_zero_image_zero_vector(self):
        y = measure(make_skip_mask(6, 6), image_new(6, 6, 25.0, 0.0))
        assert not y.values.any()

    def test_linear(self, gen):
        mask = make_skip_mask(8, 8)
        a = gen.normal(size=(8, 8))
        b = gen.normal(size=(8, 8))
        ya = measure(mask, Image2D(a, 25.0)).values
        yb = measure(mask, Image2D(b, 25.0)).values
        yab = measure(mask, Image2D(2.0 * a - 3.0 * b, 25.0)).values
        assert np.allclose(yab, 2.0 * ya - 3.0 * yb, atol=1e-12)

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError, match="shape"):
            measure(make_skip_mask(4, 4), image_new(4, 6, 25.0, 0.0))


class TestEmbed:
    def test_scatter_to_corner(self):
        mask = make_skip_mask(2, 2)
        img = embed(MeasurementVector([5.0], mask))
        assert np.array_equal(img.data, [[5.0, 0.0], [0.0, 0.0]])

    def test_zero_vector_zero_image(self):
        mask = make_skip_mask(4, 4)
        img = embed(MeasurementVector(np.zeros(mask.n_sampled), mask))
        assert not img.data.any()

    def test_length_mismatch(self):
        with pytest.raises(ValueError, match="length"):
            MeasurementVector([1.0, 2.0], make_skip_mask(2, 2))

    def test_gather_scatter_gather_is_identity(self, gen):
        mask = make_skip_mask(10, 12)
        y = MeasurementVector(gen.normal(size=mask.n_sampled), mask)
        assert np.array_equal(measure(mask, embed(y)).values, y.values)

    def test_scatter_gather_is_pattern_mask(self, gen):
        # embed(measure(img)) equals pixelwise multiplication by the pattern
        mask = make_skip_mask(9, 7)
        img = Image2D(gen.normal(size=(9, 7)), 25.0)
        projected = embed(measure(mask, img))
        assert np.array_equal(projected.data, img.data * mask.pattern)

    def test_adjoint_identity(self, gen):
        mask = make_skip_mask(8, 8)
        x = gen.normal(size=(8, 8))
        y = gen.normal(size=mask.n_sampled)
        ax_dot_y = measure(mask, Image2D(x, 25.0)).values @ y
        x_dot_aty = (x * embed(MeasurementVector(y, mask)).data).sum()
        assert ax_dot_y == pytest.approx(x_dot_aty, abs=1e-12)


def test_full_mask_identity(gen):
    mask = make_full_mask(5, 6)
    img = Image2D(gen.normal(size=(5, 6)), 25.0)
    assert np.array_equal(embed(measure(mask, img)).data, img.data)


def test_empty_mask_rejected():
    with pytest.raises(ValueError, match="no scan points"):
        SamplingMask(np.zeros((3, 3), dtype=bool))


def test_generic_pattern_supported(gen):
    pattern = gen.random((6, 6)) > 0.5
    pattern[0, 0] = True
    mask = SamplingMask(pattern)
    img = Image2D(gen.normal(size=(6, 6)), 25.0)
    assert measure(mask, img).values.size == mask.n_sampled
