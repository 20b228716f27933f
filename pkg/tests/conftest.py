import numpy as np
import pytest

from cism.forward import AcquisitionConfig
from cism.phantom import PhantomConfig
from cism.pipeline import PipelineConfig
from cism.psf import DetectorGeometry, OpticalConfig
from cism.solver import SolverConfig


@pytest.fixture
def gen():
    return np.random.default_rng(1234)


@pytest.fixture
def small_geometry():
    return DetectorGeometry(array_rows=3, array_cols=3)


@pytest.fixture
def small_optics():
    # 50 nm pixels keep the support compact for fast tests
    return OpticalConfig(psf_support_px=41)


@pytest.fixture
def small_pipeline_config(small_geometry, small_optics):
    """Scaled-down end-to-end config: 3x3 array, 48x48 scans, 50 nm pixels."""
    return PipelineConfig(
        phantom=PhantomConfig(rows=48, cols=48, pixel_size_nm=50.0,
                              n_filaments=4, seed=0),
        geometry=small_geometry,
        optics=small_optics,
        acquisition=AcquisitionConfig(photon_budget=150.0, seed=0),
        solver=SolverConfig(max_outer=60),
        max_shift_px=5.0,
        n_samples=2,
        seed=7,
    )
