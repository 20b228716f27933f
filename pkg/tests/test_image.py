import numpy as np
import pytest

from cism.image import Image2D, ISMDataset, frobenius_norm, image_new
from cism.psf import DetectorGeometry


class TestImageNew:
    def test_fill_constructor(self):
        img = image_new(2, 2, 25.0, 0.0)
        assert img.rows == 2 and img.cols == 2
        assert np.array_equal(img.data, np.zeros((2, 2)))

    def test_single_pixel(self):
        img = image_new(1, 1, 25.0, 3.5)
        assert img.data[0, 0] == 3.5

    def test_fill_sum(self):
        img = image_new(256, 256, 25.0, 1.0)
        assert img.data.sum() == 65536.0

    @pytest.mark.parametrize("rows,cols", [(0, 4), (4, 0), (-1, 4)])
    def test_zero_dimension_rejected(self, rows, cols):
        with pytest.raises(ValueError):
            image_new(rows, cols, 25.0, 0.0)

    @pytest.mark.parametrize("pixel", [0.0, -25.0])
    def test_nonpositive_pixel_size_rejected(self, pixel):
        with pytest.raises(ValueError):
            image_new(4, 4, pixel, 0.0)

    def test_nonfinite_fill_rejected(self):
        with pytest.raises(ValueError):
            image_new(2, 2, 25.0, np.nan)


class TestImage2D:
    def test_nan_data_rejected(self):
        data = np.ones((3, 3))
        data[1, 1] = np.inf
        with pytest.raises(ValueError):
            Image2D(data, 25.0)

    def test_data_is_readonly(self):
        img = image_new(3, 3, 25.0, 1.0)
        with pytest.raises(ValueError):
            img.data[0, 0] = 2.0

    def test_construction_copies_input(self):
        src = np.ones((2, 2))
        img = Image2D(src, 25.0)
        src[0, 0] = 7.0
        assert img.data[0, 0] == 1.0

    def test_with_data_keeps_pixel_size(self):
        img = image_new(2, 2, 12.5, 0.0)
        other = img.with_data(np.ones((4, 4)))
        assert other.pixel_size_nm == 12.5 and other.rows == 4


class TestFrobeniusNorm:
    def test_zero_image(self):
        assert frobenius_norm(image_new(4, 4, 25.0, 0.0)) == 0.0

    def test_three_four_five(self):
        assert frobenius_norm(Image2D([[3.0, 4.0], [0.0, 0.0]], 25.0)) == 5.0

    def test_all_ones(self):
        assert frobenius_norm(Image2D([[1.0, 1.0], [1.0, 1.0]], 25.0)) == 2.0

    def test_absolute_homogeneity(self, gen):
        img = Image2D(gen.normal(size=(6, 7)), 25.0)
        base = frobenius_norm(img)
        for a in (-3.5, 0.25, 7.0):
            scaled = frobenius_norm(img.with_data(a * img.data))
            assert scaled == pytest.approx(abs(a) * base, rel=1e-12)


class TestISMDataset:
    def test_central_element(self, small_geometry):
        images = tuple(image_new(4, 4, 25.0, float(k)) for k in range(9))
        ds = ISMDataset(images, small_geometry)
        assert ds.central_index == 4
        assert ds.central.data[0, 0] == 4.0
        assert len(ds) == 9

    def test_count_must_match_geometry(self, small_geometry):
        images = tuple(image_new(4, 4, 25.0, 0.0) for _ in range(8))
        with pytest.raises(ValueError, match="geometry"):
            ISMDataset(images, small_geometry)

    def test_shapes_must_match(self, small_geometry):
        images = [image_new(4, 4, 25.0, 0.0) for _ in range(9)]
        images[3] = image_new(4, 5, 25.0, 0.0)
        with pytest.raises(ValueError, match="shape"):
            ISMDataset(tuple(images), small_geometry)

    def test_pixel_sizes_must_match(self, small_geometry):
        images = [image_new(4, 4, 25.0, 0.0) for _ in range(9)]
        images[5] = image_new(4, 4, 20.0, 0.0)
        with pytest.raises(ValueError, match="pixel size"):
            ISMDataset(tuple(images), small_geometry)

    def test_stack_shape(self):
        geometry = DetectorGeometry(array_rows=1, array_cols=3)
        images = tuple(image_new(2, 5, 25.0, float(k)) for k in range(3))
        ds = ISMDataset(images, geometry)
        assert ds.stack().shape == (3, 2, 5)
