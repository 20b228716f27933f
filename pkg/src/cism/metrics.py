"""Reconstruction quality metrics and experiment statistics."""

from dataclasses import dataclass

import numpy as np

from .image import Image2D, frobenius_norm


class MeasurementError(ValueError):
    """A profile measurement could not be taken (bad peak or no crossing)."""


def relative_error(reference: Image2D, candidate: Image2D) -> float:
    """Frobenius norm of the difference over the norm of the reference."""
    if (reference.rows, reference.cols) != (candidate.rows, candidate.cols):
        raise ValueError("images must share dimensions")
    ref_norm = frobenius_norm(reference)
    if ref_norm == 0.0:
        raise ZeroDivisionError("reference image is all-zero")
    return float(np.linalg.norm(reference.data - candidate.data)) / ref_norm


@dataclass(frozen=True)
class ExperimentStats:
    """Per-sample relative errors with their mean and sample std (n-1)."""

    errors: tuple
    mean: float
    std: float

    def formatted_percent(self) -> str:
        return f"{self.mean * 100:.2f}±{self.std * 100:.2f} %"


def aggregate(errors) -> ExperimentStats:
    values = tuple(float(e) for e in errors)
    if len(values) < 2:
        raise ValueError(f"need at least 2 samples, got {len(values)}")
    arr = np.array(values)
    return ExperimentStats(values, float(arr.mean()), float(arr.std(ddof=1)))


def fwhm(img: Image2D, axis: int) -> float:
    """Full width at half maximum through the global peak, in pixels.

    The profile runs along the given axis (0 = down a column, 1 = across a
    row) through the argmax; half-max crossings are located by linear
    interpolation.  Requires a unique interior peak with crossings on both
    sides.
    """
    if axis not in (0, 1):
        raise ValueError(f"axis must be 0 or 1, got {axis}")
    data = img.data
    peak = data.max()
    peak_locs = np.argwhere(data == peak)
    if len(peak_locs) != 1:
        raise MeasurementError(f"global maximum is not unique ({len(peak_locs)} pixels)")
    pi, pj = peak_locs[0]
    if pi in (0, data.shape[0] - 1) or pj in (0, data.shape[1] - 1):
        raise MeasurementError(f"global maximum at ({pi}, {pj}) lies on the boundary")
    profile = data[:, pj] if axis == 0 else data[pi, :]
    center = pi if axis == 0 else pj
    half = peak / 2.0
    return _crossing(profile, center, half, +1) - _crossing(profile, center, half, -1)


def _crossing(profile: np.ndarray, start: int, half: float, direction: int) -> float:
    k = start
    while 0 <= k + direction < len(profile):
        nxt = k + direction
        if profile[nxt] <= half:
            # linear interpolation between k (above) and nxt (at or below)
            frac = (profile[k] - half) / (profile[k] - profile[nxt])
            return k + direction * frac
        k = nxt
    raise MeasurementError("profile never crosses half maximum")
