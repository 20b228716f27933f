"""Adaptive pixel reassignment: estimate per-element shifts and fuse.

Each detector element's image is registered against the central element by
normalized cross-correlation (computed in the frequency domain), refined to
sub-pixel precision with a 3x3 paraboloid fit around the integer peak.  The
estimated shift is corrective: translating element k by ``shifts[k]`` aligns
it with the central image.  Fusion translates every element by its shift and
sums in fixed element order.
"""

from dataclasses import dataclass

import numpy as np

from .image import Image2D, ISMDataset

# least-squares design for z = c0 + c1*u + c2*v + c3*u^2 + c4*u*v + c5*v^2
# on the 3x3 neighborhood u, v in {-1, 0, 1}
_U, _V = np.meshgrid((-1.0, 0.0, 1.0), (-1.0, 0.0, 1.0), indexing="ij")
_DESIGN = np.stack([np.ones(9), _U.ravel(), _V.ravel(),
                    (_U * _U).ravel(), (_U * _V).ravel(), (_V * _V).ravel()], axis=1)
_DESIGN_PINV = np.linalg.pinv(_DESIGN)


@dataclass(frozen=True, eq=False)
class ShiftEstimate:
    """Corrective sub-pixel shifts, one (dy, dx) row per detector element."""

    shifts_px: np.ndarray
    correlation_peaks: np.ndarray
    flat_elements: np.ndarray
    max_shift_px: float

    def __post_init__(self):
        shifts = np.array(self.shifts_px, dtype=np.float64, copy=True)
        peaks = np.array(self.correlation_peaks, dtype=np.float64, copy=True)
        flats = np.array(self.flat_elements, dtype=bool, copy=True)
        if shifts.ndim != 2 or shifts.shape[1] != 2:
            raise ValueError(f"shifts must have shape (n, 2), got {shifts.shape}")
        if peaks.shape != (shifts.shape[0],) or flats.shape != (shifts.shape[0],):
            raise ValueError("per-element arrays have inconsistent lengths")
        if np.abs(shifts).max(initial=0.0) > self.max_shift_px:
            raise ValueError("shift magnitude exceeds max_shift_px")
        for arr in (shifts, peaks, flats):
            arr.setflags(write=False)
        object.__setattr__(self, "shifts_px", shifts)
        object.__setattr__(self, "correlation_peaks", peaks)
        object.__setattr__(self, "flat_elements", flats)

    def __len__(self) -> int:
        return self.shifts_px.shape[0]


def _parabolic_offset(patch: np.ndarray) -> tuple[float, float]:
    c = _DESIGN_PINV @ patch.ravel()
    hessian = np.array([[2.0 * c[3], c[4]], [c[4], 2.0 * c[5]]])
    det = np.linalg.det(hessian)
    if det <= 0:  # not a proper maximum; keep the integer peak
        return 0.0, 0.0
    off = np.linalg.solve(hessian, -c[1:3])
    return float(np.clip(off[0], -1.0, 1.0)), float(np.clip(off[1], -1.0, 1.0))


def estimate_shifts(dataset: ISMDataset, max_shift_px: float = 10.0) -> ShiftEstimate:
    """Register every element against the central element.

    Parameters
    ----------
    dataset : ISMDataset
        Parallel images; the central element is the reference.
    max_shift_px : float
        Half-width of the correlation search window.

    Returns
    -------
    ShiftEstimate
        Corrective shifts with the central element pinned to exactly
        (0, 0).  Zero-variance elements get shift (0, 0), correlation 0
        and a raised ``flat_elements`` flag.
    """
    rows, cols = dataset.rows, dataset.cols
    reach = int(np.floor(max_shift_px))
    if max_shift_px <= 0:
        raise ValueError("max_shift_px must be > 0")
    if reach + 1 > min(rows, cols) // 2 - 1:
        raise ValueError(f"max_shift_px {max_shift_px} too large for "
                         f"{rows}x{cols} images")
    ref = dataset.central.data
    ref0 = ref - ref.mean()
    ref_norm = float(np.linalg.norm(ref0))
    ref_fft = np.fft.fft2(ref0)
    center = (rows // 2, cols // 2)

    n = len(dataset)
    shifts = np.zeros((n, 2))
    peaks = np.zeros(n)
    flats = np.zeros(n, dtype=bool)
    for k, element in enumerate(dataset.elements):
        if k == dataset.central_index:
            peaks[k] = 1.0 if ref_norm > 0 else 0.0
            flats[k] = ref_norm == 0.0
            continue
        el0 = element.data - element.data.mean()
        el_norm = float(np.linalg.norm(el0))
        if el_norm == 0.0 or ref_norm == 0.0:
            flats[k] = True
            continue
        cc = np.fft.ifft2(ref_fft * np.conj(np.fft.fft2(el0))).real
        cc = np.fft.fftshift(cc)
        window = cc[center[0] - reach:center[0] + reach + 1,
                    center[1] - reach:center[1] + reach + 1]
        iy, ix = np.unravel_index(np.argmax(window), window.shape)
        peaks[k] = float(np.clip(window[iy, ix] / (ref_norm * el_norm), -1.0, 1.0))
        gy = iy + center[0] - reach
        gx = ix + center[1] - reach
        patch = cc[gy - 1:gy + 2, gx - 1:gx + 2]
        off_y, off_x = _parabolic_offset(patch)
        shifts[k, 0] = np.clip(gy - center[0] + off_y, -max_shift_px, max_shift_px)
        shifts[k, 1] = np.clip(gx - center[1] + off_x, -max_shift_px, max_shift_px)
    return ShiftEstimate(shifts, peaks, flats, float(max_shift_px))


def shift_image(img: Image2D, shift) -> Image2D:
    """Translate by a real-valued (dy, dx) via a frequency-domain phase ramp.

    Content moves in the +shift direction with circular boundary; integer
    shifts reproduce an exact roll.  Nyquist bins use the real (cosine)
    ramp so the output stays real; the residual imaginary part is checked
    against 1e-9 of the image peak.
    """
    sy, sx = float(shift[0]), float(shift[1])
    rows, cols = img.rows, img.cols
    if abs(sy) > rows / 4 or abs(sx) > cols / 4:
        raise ValueError(f"shift {(sy, sx)} exceeds quarter-frame limit "
                         f"for {rows}x{cols} image")
    if sy == 0.0 and sx == 0.0:
        return img
    ramp_y = np.exp(-2j * np.pi * np.fft.fftfreq(rows) * sy)
    ramp_x = np.exp(-2j * np.pi * np.fft.fftfreq(cols) * sx)
    if rows % 2 == 0:
        ramp_y[rows // 2] = np.cos(np.pi * sy)
    if cols % 2 == 0:
        ramp_x[cols // 2] = np.cos(np.pi * sx)
    out = np.fft.ifft2(np.fft.fft2(img.data) * ramp_y[:, None] * ramp_x[None, :])
    residue = float(np.abs(out.imag).max())
    if residue > 1e-9 * max(1.0, float(np.abs(img.data).max())):
        raise FloatingPointError(f"imaginary residue {residue:.3e} after shift")
    return img.with_data(out.real)


def fuse(dataset: ISMDataset, shifts: ShiftEstimate) -> Image2D:
    """Shift-and-sum all elements; summation order is fixed (element order)."""
    if len(shifts) != len(dataset):
        raise ValueError(f"{len(shifts)} shifts for {len(dataset)} elements")
    acc = np.zeros((dataset.rows, dataset.cols))
    for element, shift in zip(dataset.elements, shifts.shifts_px):
        acc += shift_image(element, shift).data
    return Image2D(acc, dataset.pixel_size_nm)


def write_shifts_csv(est: ShiftEstimate, geometry, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("element_row,element_col,shift_y_px,shift_x_px,correlation_peak\n")
        for k in range(len(est)):
            r, c = divmod(k, geometry.array_cols)
            fh.write(f"{r},{c},{float(est.shifts_px[k, 0])!r},"
                     f"{float(est.shifts_px[k, 1])!r},"
                     f"{float(est.correlation_peaks[k])!r}\n")
