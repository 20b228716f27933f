"""Scan-point subsampling: the fixed measurement operator of the pipeline.

The production pattern keeps every other row and every other column
(even indices), cutting the number of scanned points by four on
even-sized grids.  The operator acts by gather/scatter, never as a dense
matrix, and the same functions accept arbitrary boolean patterns so
alternative masks can be benchmarked.
"""

from dataclasses import dataclass

import numpy as np

from .image import Image2D
from .io import write_pbm


@dataclass(frozen=True, eq=False)
class SamplingMask:
    """Boolean grid of scan points; True marks a sampled location."""

    pattern: np.ndarray

    def __post_init__(self):
        arr = np.array(self.pattern, dtype=bool, copy=True)
        if arr.ndim != 2:
            raise ValueError(f"mask pattern must be 2D, got {arr.ndim}D")
        if arr.shape[0] < 1 or arr.shape[1] < 1:
            raise ValueError(f"mask dimensions must be >= 1, got {arr.shape}")
        if not arr.any():
            raise ValueError("mask selects no scan points")
        arr.setflags(write=False)
        object.__setattr__(self, "pattern", arr)

    @property
    def rows(self) -> int:
        return self.pattern.shape[0]

    @property
    def cols(self) -> int:
        return self.pattern.shape[1]

    @property
    def n_sampled(self) -> int:
        return int(self.pattern.sum())

    def to_pbm(self, path) -> None:
        write_pbm(self.pattern, path)


@dataclass(frozen=True, eq=False)
class MeasurementVector:
    """Values gathered at the sampled scan points, row-major order."""

    values: np.ndarray
    mask: SamplingMask
    pixel_size_nm: float = 25.0

    def __post_init__(self):
        arr = np.array(self.values, dtype=np.float64, copy=True).ravel()
        if arr.size != self.mask.n_sampled:
            raise ValueError(
                f"measurement length {arr.size} does not match mask "
                f"sampled count {self.mask.n_sampled}"
            )
        if not np.all(np.isfinite(arr)):
            raise ValueError("measurement values contain NaN or Inf")
        arr.setflags(write=False)
        object.__setattr__(self, "values", arr)
        object.__setattr__(self, "pixel_size_nm", float(self.pixel_size_nm))


def make_skip_mask(rows: int, cols: int) -> SamplingMask:
    """Mask that samples even rows and even columns only.

    Sample-independent by construction: the pattern depends on the grid
    shape alone, so it is computed once per image size.  Sampled count is
    ceil(rows/2)*ceil(cols/2), exactly rows*cols/4 for even dimensions.
    """
    if rows < 1 or cols < 1:
        raise ValueError(f"mask dimensions must be >= 1, got {rows}x{cols}")
    pattern = np.zeros((rows, cols), dtype=bool)
    pattern[::2, ::2] = True
    return SamplingMask(pattern)


def make_full_mask(rows: int, cols: int) -> SamplingMask:
    """Mask that samples every scan point (identity measurement)."""
    return SamplingMask(np.ones((rows, cols), dtype=bool))


def measure(mask: SamplingMask, img: Image2D) -> MeasurementVector:
    """Gather image values at the sampled locations (the forward action)."""
    if (img.rows, img.cols) != (mask.rows, mask.cols):
        raise ValueError(
            f"image shape {(img.rows, img.cols)} does not match mask "
            f"shape {(mask.rows, mask.cols)}"
        )
    return MeasurementVector(img.data[mask.pattern], mask, img.pixel_size_nm)


def embed(y: MeasurementVector) -> Image2D:
    """Scatter measurements back onto the grid, zero elsewhere (the adjoint)."""
    out = np.zeros((y.mask.rows, y.mask.cols))
    out[y.mask.pattern] = y.values
    return Image2D(out, y.pixel_size_nm)
