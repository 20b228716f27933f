"""Compressive image scanning microscopy.

Simulates a SPAD-array laser-scanning microscope, subsamples the scan with
a fixed skip-alternate-rows-and-columns pattern, reconstructs each detector
element's image by equality-constrained total-variation minimization, and
fuses the parallel images by adaptive pixel reassignment.
"""

from .apr import ShiftEstimate, estimate_shifts, fuse, shift_image
from .forward import AcquisitionConfig, acquire, convolve2d
from .image import Image2D, ISMDataset, frobenius_norm, image_new
from .io import (RasterFormatError, read_raster, read_stack, write_png16,
                 write_raster, write_stack)
from .metrics import ExperimentStats, aggregate, fwhm, relative_error
from .phantom import PhantomConfig, generate_phantom
from .pipeline import (PipelineConfig, default_config, parse_config,
                       read_config, run_experiment, run_sample)
from .psf import (DetectorGeometry, OpticalConfig, PSFStack,
                  element_displacement, generate_psf_stack)
from .sampling import (MeasurementVector, SamplingMask, embed,
                       make_full_mask, make_skip_mask, measure)
from .solver import (SolverConfig, SolverReport, gradient_adjoint,
                     gradient_ops, shrink, solve_tv, tv_norm)

__version__ = "0.1.0"

__all__ = [
    "AcquisitionConfig", "DetectorGeometry", "ExperimentStats", "Image2D",
    "ISMDataset", "MeasurementVector", "OpticalConfig", "PSFStack",
    "PhantomConfig", "PipelineConfig", "RasterFormatError", "SamplingMask",
    "ShiftEstimate", "SolverConfig", "SolverReport", "acquire", "aggregate",
    "convolve2d", "default_config", "element_displacement", "embed",
    "estimate_shifts", "frobenius_norm", "fuse", "fwhm", "generate_phantom",
    "generate_psf_stack", "gradient_adjoint", "gradient_ops", "image_new",
    "make_full_mask", "make_skip_mask", "measure", "parse_config",
    "read_config", "read_raster", "read_stack", "relative_error",
    "run_experiment", "run_sample", "shift_image", "shrink", "solve_tv",
    "tv_norm", "write_png16", "write_raster", "write_stack",
]
