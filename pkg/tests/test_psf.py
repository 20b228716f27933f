import math

import numpy as np
import pytest

from cism.errors import ConfigError
from cism.io import read_sidecar, read_stack
from cism.metrics import fwhm
from cism.psf import (DetectorGeometry, OpticalConfig, PSFStack,
                      element_displacement, generate_psf_stack, write_psf_stack)

PIXEL = 25.0


@pytest.fixture(scope="module")
def default_stack():
    return generate_psf_stack(DetectorGeometry(), OpticalConfig(), PIXEL)


class TestGeometry:
    def test_even_array_rejected(self):
        with pytest.raises(ConfigError, match="odd"):
            DetectorGeometry(array_rows=4)

    def test_pitch_below_size_rejected(self):
        with pytest.raises(ConfigError, match="pitch"):
            DetectorGeometry(element_size_nm=80.0, element_pitch_nm=75.0)

    def test_element_count(self):
        assert DetectorGeometry().n_elements == 25


class TestOptics:
    def test_stokes_shift_enforced(self):
        with pytest.raises(ConfigError, match="Stokes"):
            OpticalConfig(wavelength_exc_nm=660.0, wavelength_em_nm=640.0)

    def test_na_range(self):
        with pytest.raises(ConfigError):
            OpticalConfig(numerical_aperture=1.7)

    def test_even_support_rejected(self):
        with pytest.raises(ConfigError):
            OpticalConfig(psf_support_px=64)

    def test_gaussian_width_from_wavelength(self):
        optics = OpticalConfig()
        expected_fwhm = 0.51 * 640.0 / 1.4
        assert optics.sigma_exc_nm() * 2 * math.sqrt(2 * math.log(2)) == pytest.approx(expected_fwhm)


class TestElementDisplacement:
    def test_central_element(self):
        assert element_displacement(DetectorGeometry(), 2, 2) == (0.0, 0.0)

    def test_one_pitch_right(self):
        assert element_displacement(DetectorGeometry(), 2, 3) == (0.0, 75.0)

    def test_corner(self):
        assert element_displacement(DetectorGeometry(), 0, 0) == (-150.0, -150.0)

    def test_out_of_bounds(self):
        with pytest.raises(ValueError, match="outside"):
            element_displacement(DetectorGeometry(), 5, 0)


class TestGeneratePSFStack:
    def test_shape_and_count(self, default_stack):
        assert len(default_stack) == 25
        assert default_stack.psfs.rows == 65

    def test_unit_sums(self, default_stack):
        for img in default_stack.psfs.elements:
            assert img.data.sum() == pytest.approx(1.0, abs=1e-9)
            assert img.data.min() >= 0.0

    def test_central_peak_at_grid_center(self, default_stack):
        central = default_stack.psfs.central.data
        assert np.unravel_index(np.argmax(central), central.shape) == (32, 32)

    def test_displaced_peak_between_zero_and_displacement(self, default_stack):
        # element (2, 4): displacement (0, +150 nm) = +6 px
        psf = default_stack.psfs[2 * 5 + 4].data
        i, j = np.unravel_index(np.argmax(psf), psf.shape)
        assert i == 32
        assert 32 < j < 32 + 6

    def test_central_displacement_exactly_zero(self, default_stack):
        assert tuple(default_stack.displacements_nm[12]) == (0.0, 0.0)

    def test_mirror_symmetry(self, default_stack):
        for k in range(25):
            mirrored = 24 - k  # 180 degrees about the array center
            a = default_stack.psfs[k].data
            b = default_stack.psfs[mirrored].data
            assert np.abs(a - b[::-1, ::-1]).max() < 1e-10

    def test_monotone_peak_shift_along_row(self, default_stack):
        peak_cols = []
        for col in range(5):
            psf = default_stack.psfs[2 * 5 + col].data
            peak_cols.append(np.unravel_index(np.argmax(psf), psf.shape)[1])
        assert peak_cols == sorted(peak_cols)
        assert len(set(peak_cols)) > 1

    def test_off_center_narrower_than_excitation_alone(self, default_stack):
        optics = OpticalConfig()
        fwhm_exc_px = 0.51 * optics.wavelength_exc_nm / optics.numerical_aperture / PIXEL
        for col in (0, 1, 3, 4):
            psf = default_stack.psfs[2 * 5 + col]
            assert fwhm(psf, axis=1) <= fwhm_exc_px

    def test_support_mass_precondition(self):
        with pytest.raises(ConfigError, match="psf_support_px >= "):
            generate_psf_stack(DetectorGeometry(), OpticalConfig(psf_support_px=21), PIXEL)

    def test_reported_support_is_sufficient(self):
        try:
            generate_psf_stack(DetectorGeometry(), OpticalConfig(psf_support_px=21), PIXEL)
        except ConfigError as exc:
            needed = int(str(exc).rsplit(">=", 1)[1].split()[0])
        generate_psf_stack(DetectorGeometry(), OpticalConfig(psf_support_px=needed), PIXEL)

    def test_stack_validation_catches_bad_normalization(self, default_stack):
        scaled = default_stack.psfs[0].with_data(default_stack.psfs[0].data * 2)
        images = (scaled,) + default_stack.psfs.elements[1:]
        from cism.image import ISMDataset
        bad = ISMDataset(images, default_stack.psfs.geometry)
        with pytest.raises(ValueError, match="normalized"):
            PSFStack(bad, default_stack.displacements_nm)


def test_write_psf_stack_round_trip(tmp_path, default_stack):
    path = tmp_path / "psf.cisms"
    write_psf_stack(default_stack, path, DetectorGeometry(), OpticalConfig())
    images = read_stack(path)
    assert len(images) == 25
    meta = read_sidecar(str(path) + ".meta.txt")
    assert meta["array_rows"] == "5"
    assert float(meta["element_pitch_nm"]) == 75.0
    assert float(meta["pixel_size_nm"]) == PIXEL
