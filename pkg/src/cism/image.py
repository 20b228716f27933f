"""Core raster types shared by the whole pipeline.

An :class:`Image2D` is a dense rectangular grid of finite real intensities
together with its physical pixel pitch in nanometers (sample space).  An
:class:`ISMDataset` is a stack of such images, one per detector element,
ordered row-major over the detector array.  Both are immutable after
construction; the backing arrays are marked read-only so they can be shared
across threads and processes without copies.
"""

from dataclasses import dataclass

import numpy as np


def _as_readonly_f64(values) -> np.ndarray:
    arr = np.array(values, dtype=np.float64, order="C", copy=True)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class Image2D:
    """Dense 2D intensity grid with physical pixel pitch.

    ``data`` is stored row-major as float64 and frozen; index ``(i, j)``
    is (row, column).
    """

    data: np.ndarray
    pixel_size_nm: float

    def __post_init__(self):
        arr = _as_readonly_f64(self.data)
        if arr.ndim != 2:
            raise ValueError(f"image data must be 2D, got {arr.ndim}D")
        if arr.shape[0] < 1 or arr.shape[1] < 1:
            raise ValueError(f"image dimensions must be >= 1, got {arr.shape}")
        if not float(self.pixel_size_nm) > 0:
            raise ValueError(f"pixel_size_nm must be > 0, got {self.pixel_size_nm}")
        if not np.all(np.isfinite(arr)):
            raise ValueError("image data contains NaN or Inf")
        object.__setattr__(self, "data", arr)
        object.__setattr__(self, "pixel_size_nm", float(self.pixel_size_nm))

    @property
    def rows(self) -> int:
        return self.data.shape[0]

    @property
    def cols(self) -> int:
        return self.data.shape[1]

    def with_data(self, data) -> "Image2D":
        """New image with the same pixel pitch and different values."""
        return Image2D(data, self.pixel_size_nm)


def image_new(rows: int, cols: int, pixel_size_nm: float, fill: float = 0.0) -> Image2D:
    """Constant-filled image of the given shape and pixel pitch."""
    if rows < 1 or cols < 1:
        raise ValueError(f"image dimensions must be >= 1, got {rows}x{cols}")
    if not np.isfinite(fill):
        raise ValueError(f"fill value must be finite, got {fill}")
    return Image2D(np.full((rows, cols), float(fill)), pixel_size_nm)


def frobenius_norm(img: Image2D) -> float:
    """sqrt of the sum of squared pixel values."""
    return float(np.linalg.norm(img.data))


@dataclass(frozen=True, eq=False)
class ISMDataset:
    """Stack of parallel scanned images, one per detector element.

    Elements are ordered row-major over the detector array described by
    ``geometry`` (anything exposing ``array_rows`` and ``array_cols``).
    All member images share shape and pixel pitch.
    """

    elements: tuple
    geometry: object

    def __post_init__(self):
        elements = tuple(self.elements)
        if not elements:
            raise ValueError("dataset must contain at least one element image")
        first = elements[0]
        for k, img in enumerate(elements):
            if not isinstance(img, Image2D):
                raise ValueError(f"element {k} is not an Image2D")
            if (img.rows, img.cols) != (first.rows, first.cols):
                raise ValueError(
                    f"element {k} shape {(img.rows, img.cols)} differs from "
                    f"element 0 shape {(first.rows, first.cols)}"
                )
            if img.pixel_size_nm != first.pixel_size_nm:
                raise ValueError(f"element {k} pixel size differs from element 0")
        n_expected = self.geometry.array_rows * self.geometry.array_cols
        if len(elements) != n_expected:
            raise ValueError(
                f"dataset has {len(elements)} elements, geometry implies {n_expected}"
            )
        object.__setattr__(self, "elements", elements)

    def __len__(self) -> int:
        return len(self.elements)

    def __getitem__(self, k) -> Image2D:
        return self.elements[k]

    @property
    def rows(self) -> int:
        return self.elements[0].rows

    @property
    def cols(self) -> int:
        return self.elements[0].cols

    @property
    def pixel_size_nm(self) -> float:
        return self.elements[0].pixel_size_nm

    @property
    def central_index(self) -> int:
        g = self.geometry
        return (g.array_rows // 2) * g.array_cols + (g.array_cols // 2)

    @property
    def central(self) -> Image2D:
        return self.elements[self.central_index]

    def stack(self) -> np.ndarray:
        """All element values as one (n_elements, rows, cols) array."""
        return np.stack([img.data for img in self.elements])
