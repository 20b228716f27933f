"""Filament phantoms used as ground truth.

Filaments are bounded-curvature random walks: each starts at a uniform
position with a uniform heading, advances by a fixed step length, and turns
by Gaussian heading increments until it leaves the frame.  Walk points are
deposited with bilinear anti-aliasing, blurred to the requested linewidth,
and the result is rescaled so the brightest pixel equals ``intensity_peak``.
Everything is a pure function of the config, including its seed.
"""

import math
from dataclasses import dataclass

import numpy as np
from scipy.ndimage import gaussian_filter

from . import rng
from .errors import ConfigError
from .image import Image2D

# hard cap on walk length so pathological configs cannot spin forever
_MAX_STEPS_PER_FILAMENT = 1 << 17


@dataclass(frozen=True)
class PhantomConfig:
    rows: int = 256
    cols: int = 256
    pixel_size_nm: float = 25.0
    n_filaments: int = 15
    step_px: float = 1.0
    curvature_sigma_rad: float = 0.08
    intensity_peak: float = 1.0
    linewidth_sigma_px: float = 1.0
    seed: int = 0

    def __post_init__(self):
        if self.rows < 1 or self.cols < 1:
            raise ConfigError("phantom dimensions must be >= 1")
        if self.pixel_size_nm <= 0:
            raise ConfigError("pixel_size_nm must be > 0")
        if self.n_filaments < 1:
            raise ConfigError("n_filaments must be >= 1")
        if self.step_px <= 0:
            raise ConfigError("step_px must be > 0")
        if self.curvature_sigma_rad < 0:
            raise ConfigError("curvature_sigma_rad must be >= 0")
        if self.intensity_peak <= 0:
            raise ConfigError("intensity_peak must be > 0")
        if self.linewidth_sigma_px <= 0:
            raise ConfigError("linewidth_sigma_px must be > 0")
        rng.check_seed(self.seed)


def _deposit(acc: np.ndarray, i: float, j: float) -> None:
    # bilinear splat of unit mass onto the four neighboring pixels
    i0 = math.floor(i)
    j0 = math.floor(j)
    fi = i - i0
    fj = j - j0
    rows, cols = acc.shape
    for di, dj, w in ((0, 0, (1 - fi) * (1 - fj)), (0, 1, (1 - fi) * fj),
                      (1, 0, fi * (1 - fj)), (1, 1, fi * fj)):
        ii, jj = i0 + di, j0 + dj
        if 0 <= ii < rows and 0 <= jj < cols and w > 0.0:
            acc[ii, jj] += w


def generate_phantom(cfg: PhantomConfig) -> Image2D:
    """Render one seeded filament phantom."""
    gen = rng.stream(cfg.seed)
    acc = np.zeros((cfg.rows, cfg.cols))
    for _ in range(cfg.n_filaments):
        i = gen.uniform(0.0, cfg.rows)
        j = gen.uniform(0.0, cfg.cols)
        heading = gen.uniform(0.0, 2.0 * math.pi)
        for _ in range(_MAX_STEPS_PER_FILAMENT):
            if not (0.0 <= i < cfg.rows and 0.0 <= j < cfg.cols):
                break
            _deposit(acc, i, j)
            i += cfg.step_px * math.cos(heading)
            j += cfg.step_px * math.sin(heading)
            heading += gen.normal(0.0, cfg.curvature_sigma_rad)
    blurred = gaussian_filter(acc, cfg.linewidth_sigma_px, mode="constant")
    peak = blurred.max()
    if peak > 0:
        blurred *= cfg.intensity_peak / peak
    return Image2D(blurred, cfg.pixel_size_nm)
