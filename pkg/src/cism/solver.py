"""Equality-constrained total-variation reconstruction.

Solves  min_x TV(x)  subject to  S x = y  (optionally x >= 0), where S
gathers pixels at the sampled scan points.  The method is an alternating
direction augmented Lagrangian with a splitting w = Dx:

* w-update: closed-form shrinkage of Dx - nu/beta at threshold 1/beta;
* x-update: Barzilai-Borwein projected gradient steps on the quadratic
  x-subproblem, safeguarded by nonmonotone backtracking;
* outer loop: multiplier updates for both the splitting and the data
  constraint, then penalty continuation up to fixed caps.

Measurements are normalized to unit peak internally and the solution is
rescaled on exit, so the returned minimizer is positively homogeneous in y
and the penalty defaults are independent of the photon scale.
"""

from dataclasses import dataclass, field

import numpy as np

from .image import Image2D
from .sampling import MeasurementVector, SamplingMask

_TV_VARIANTS = ("anisotropic", "isotropic")

# inner iterations stop at this fraction of the outer relative-change
# tolerance; see solve_tv
_INNER_TOL_FACTOR = 0.1


def gradient_ops(img: Image2D) -> tuple[Image2D, Image2D]:
    """Forward differences down rows and across columns.

    Out-of-range differences are omitted (last row of dv and last column
    of dh are zero), which keeps the operator's adjoint clean.
    """
    dv, dh = _fwd_diff(img.data)
    return img.with_data(dv), img.with_data(dh)


def gradient_adjoint(dv: Image2D, dh: Image2D) -> Image2D:
    """Adjoint of :func:`gradient_ops`: the negative discrete divergence."""
    if (dv.rows, dv.cols) != (dh.rows, dh.cols):
        raise ValueError("dv and dh shapes differ")
    return dv.with_data(_fwd_diff_adjoint(dv.data, dh.data))


def _fwd_diff(x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    dv = np.zeros_like(x)
    dh = np.zeros_like(x)
    dv[:-1, :] = x[1:, :] - x[:-1, :]
    dh[:, :-1] = x[:, 1:] - x[:, :-1]
    return dv, dh


def _fwd_diff_adjoint(dv: np.ndarray, dh: np.ndarray) -> np.ndarray:
    out = np.zeros_like(dv)
    out[:-1, :] -= dv[:-1, :]
    out[1:, :] += dv[:-1, :]
    out[:, :-1] -= dh[:, :-1]
    out[:, 1:] += dh[:, :-1]
    return out


def tv_norm(img: Image2D, variant: str = "anisotropic") -> float:
    """Total variation of the image under the stated difference scheme."""
    if variant not in _TV_VARIANTS:
        raise ValueError(f"unknown tv variant {variant!r}")
    dv, dh = _fwd_diff(img.data)
    if variant == "anisotropic":
        return float(np.abs(dv).sum() + np.abs(dh).sum())
    return float(np.sqrt(dv * dv + dh * dh).sum())


def shrink(z, threshold: float, variant: str = "anisotropic"):
    """Closed-form minimizer of the w-subproblem.

    Anisotropic: componentwise soft threshold of ``z``.  Isotropic: ``z``
    is a pair (dv, dh) shrunk jointly by its pointwise Euclidean length,
    mapping zero to zero.
    """
    if threshold < 0:
        raise ValueError(f"threshold must be >= 0, got {threshold}")
    if variant == "anisotropic":
        z = np.asarray(z, dtype=np.float64)
        out = np.sign(z) * np.maximum(np.abs(z) - threshold, 0.0)
        return float(out) if out.ndim == 0 else out
    if variant == "isotropic":
        zv, zh = (np.asarray(c, dtype=np.float64) for c in z)
        norm = np.sqrt(zv * zv + zh * zh)
        scale = np.zeros_like(norm)
        np.divide(np.maximum(norm - threshold, 0.0), norm, out=scale, where=norm > 0)
        wv, wh = scale * zv, scale * zh
        if wv.ndim == 0:
            return float(wv), float(wh)
        return wv, wh
    raise ValueError(f"unknown tv variant {variant!r}")


@dataclass(frozen=True)
class SolverConfig:
    """Penalty schedule and stopping rules for :func:`solve_tv`.

    The splitting penalty beta stays moderate (its cap controls how long
    the shrinkage threshold 1/beta remains active) while the data penalty
    mu may grow larger; constraint accuracy beyond the caps comes from
    the multiplier updates.
    """

    beta_init: float = 2.0**5
    mu_init: float = 2.0**8
    beta_max: float = 2.0**8
    mu_max: float = 2.0**13
    continuation_factor: float = 2.0
    tol_rel_change: float = 1e-4
    tol_constraint: float = 1e-5
    max_outer: int = 80
    max_inner: int = 20
    tv_variant: str = "anisotropic"
    nonneg: bool = True

    def __post_init__(self):
        if self.beta_init <= 0 or self.mu_init <= 0:
            raise ValueError("penalty parameters must be > 0")
        if self.beta_init > self.beta_max or self.mu_init > self.mu_max:
            raise ValueError("initial penalty exceeds its cap")
        if self.continuation_factor <= 1:
            raise ValueError("continuation_factor must be > 1")
        if self.tol_rel_change <= 0 or self.tol_constraint <= 0:
            raise ValueError("tolerances must be > 0")
        if self.max_outer < 1 or self.max_inner < 1:
            raise ValueError("iteration caps must be >= 1")
        if self.tv_variant not in _TV_VARIANTS:
            raise ValueError(f"unknown tv variant {self.tv_variant!r}")


@dataclass(frozen=True)
class SolverReport:
    """Convergence diagnostics of one reconstruction."""

    outer_iterations: int
    final_constraint_residual: float
    final_rel_change: float
    objective_trace: tuple = field(default_factory=tuple)
    residual_trace: tuple = field(default_factory=tuple)
    converged: bool = False

    def as_text(self) -> str:
        lines = [
            f"outer_iterations = {self.outer_iterations}",
            f"final_constraint_residual = {self.final_constraint_residual!r}",
            f"final_rel_change = {self.final_rel_change!r}",
            f"converged = {str(self.converged).lower()}",
        ]
        return "\n".join(lines) + "\n"


def write_report(report: SolverReport, text_path, trace_csv_path) -> None:
    with open(text_path, "w", encoding="utf-8") as fh:
        fh.write(report.as_text())
    with open(trace_csv_path, "w", encoding="utf-8") as fh:
        fh.write("outer_iteration,tv_objective\n")
        for k, value in enumerate(report.objective_trace, start=1):
            fh.write(f"{k},{value!r}\n")


def solve_tv(mask: SamplingMask, y: MeasurementVector,
             cfg: SolverConfig | None = None,
             init: Image2D | None = None) -> tuple[Image2D, SolverReport]:
    """Reconstruct an image from subsampled scan points.

    Parameters
    ----------
    mask : SamplingMask
        Scan-point selection; must be the mask the measurements came from.
    y : MeasurementVector
        Values at the sampled locations.
    cfg : SolverConfig, optional
        Defaults reconstruct photon-count images at production sizes.
    init : Image2D, optional
        Warm start; defaults to the measurements scattered onto the grid.

    Returns
    -------
    (Image2D, SolverReport)
        Best iterate and its diagnostics.  Hitting the iteration caps is
        reported via ``converged=False``, not raised.
    """
    cfg = cfg or SolverConfig()
    if y.mask is not mask and not np.array_equal(y.mask.pattern, mask.pattern):
        raise ValueError("measurement vector was built with a different mask")
    if y.values.size == 0:
        raise ValueError("empty measurement vector")
    sel = mask.pattern
    shape = sel.shape

    scale = float(np.abs(y.values).max())
    if scale == 0.0:
        # x = 0 is feasible with zero objective; nothing to iterate.
        zero = Image2D(np.zeros(shape), y.pixel_size_nm)
        return zero, SolverReport(0, 0.0, 0.0, (0.0,), (0.0,), True)
    ys = y.values / scale
    ys_norm = float(np.linalg.norm(ys))

    if init is not None:
        if (init.rows, init.cols) != shape:
            raise ValueError("init image shape does not match mask")
        x = init.data / scale
    else:
        x = np.zeros(shape)
        x[sel] = ys
    if cfg.nonneg:
        x = np.maximum(x, 0.0)

    beta = float(cfg.beta_init)
    mu = float(cfg.mu_init)
    nu_v = np.zeros(shape)
    nu_h = np.zeros(shape)
    lam = np.zeros_like(ys)
    aniso = cfg.tv_variant == "anisotropic"

    dv = np.empty(shape)
    dh = np.empty(shape)
    dv_new = np.empty(shape)
    dh_new = np.empty(shape)

    def diff_into(src, out_v, out_h):
        np.subtract(src[1:, :], src[:-1, :], out=out_v[:-1, :])
        out_v[-1, :] = 0.0
        np.subtract(src[:, 1:], src[:, :-1], out=out_h[:, :-1])
        out_h[:, -1] = 0.0

    def state_at(xc, dvc, dhc):
        # With w at its closed-form optimum, the splitting terms reduce to
        # the saturation of u = beta*Dx - nu: the gradient contribution is
        # c = clip(u) (componentwise, or onto the unit ball pointwise for
        # the isotropic variant), phi(w) = sum max(|u| - 1, 0)/beta, the
        # multiplier updates become nu <- -c, and the subproblem value is
        # phi + (|c|^2 - |nu|^2)/(2 beta) + (|a|^2 - |lam|^2)/(2 mu) with
        # a = mu*(Sx - y) - lam.  Constant terms are dropped: comparisons
        # stay within one outer iteration where nu, lam are fixed.
        uv = beta * dvc - nu_v
        uh = beta * dhc - nu_h
        if aniso:
            cv = np.clip(uv, -1.0, 1.0)
            ch = np.clip(uh, -1.0, 1.0)
            phi = (np.maximum(np.abs(uv, out=uv) - 1.0, 0.0).sum()
                   + np.maximum(np.abs(uh, out=uh) - 1.0, 0.0).sum()) / beta
        else:
            norm = np.hypot(uv, uh)
            shrink_scale = np.minimum(1.0, 1.0 / np.maximum(norm, 1e-300))
            cv = uv * shrink_scale
            ch = uh * shrink_scale
            phi = np.maximum(norm - 1.0, 0.0).sum() / beta
        a = mu * (xc[sel] - ys) - lam
        value = (phi
                 + (np.vdot(cv, cv).real + np.vdot(ch, ch).real) / (2.0 * beta)
                 + np.vdot(a, a).real / (2.0 * mu))
        return cv, ch, a, value

    trace = []
    residuals = []
    converged = False
    outer = 0
    cres = np.inf
    rel_outer = np.inf
    for outer in range(1, cfg.max_outer + 1):
        x_outer = x
        diff_into(x, dv, dh)
        cv, ch, a, f_here = state_at(x, dv, dh)
        x_prev = None
        g_prev = None
        recent = []
        for _ in range(cfg.max_inner):
            g = _fwd_diff_adjoint(cv, ch)
            g[sel] += a
            gnorm2 = float(np.vdot(g, g).real)
            if gnorm2 == 0.0:
                break
            if x_prev is None:
                diff_into(g, dv_new, dh_new)
                curvature = (beta * (np.vdot(dv_new, dv_new).real
                                     + np.vdot(dh_new, dh_new).real)
                             + mu * float(np.vdot(g[sel], g[sel]).real))
                alpha = gnorm2 / max(curvature, 1e-300)
            else:
                s = x - x_prev
                dg = g - g_prev
                sdg = float(np.vdot(s, dg).real)
                alpha = float(np.vdot(s, s).real) / sdg if sdg > 1e-300 else 1.0
            recent.append(f_here)
            f_ref = max(recent[-5:])
            x_prev, g_prev = x, g
            x_new = None
            for _ in range(30):
                x_new = x - alpha * g
                if cfg.nonneg:
                    np.maximum(x_new, 0.0, out=x_new)
                diff_into(x_new, dv_new, dh_new)
                cv_new, ch_new, a_new, f_new = state_at(x_new, dv_new, dh_new)
                if f_new <= f_ref - 1e-4 * alpha * gnorm2:
                    break
                alpha *= 0.5
            step = float(np.linalg.norm(x_new - x))
            x = x_new
            dv, dv_new = dv_new, dv
            dh, dh_new = dh_new, dh
            cv, ch, a, f_here = cv_new, ch_new, a_new, f_new
            # the x-subproblem must be solved tighter than the outer test,
            # or multiplier updates act on stale iterates and stall
            if step <= _INNER_TOL_FACTOR * cfg.tol_rel_change * max(
                    float(np.linalg.norm(x_prev)), 1e-300):
                break
        nu_v = -cv
        nu_h = -ch
        lam = -a
        beta = min(cfg.continuation_factor * beta, cfg.beta_max)
        mu = min(cfg.continuation_factor * mu, cfg.mu_max)

        if aniso:
            trace.append(float((np.abs(dv).sum() + np.abs(dh).sum()) * scale))
        else:
            trace.append(float(np.sqrt(dv * dv + dh * dh).sum() * scale))
        cres = float(np.linalg.norm(x[sel] - ys)) / ys_norm
        residuals.append(cres)
        rel_outer = (float(np.linalg.norm(x - x_outer))
                     / max(float(np.linalg.norm(x_outer)), 1e-300))
        if cres < cfg.tol_constraint and rel_outer < cfg.tol_rel_change:
            converged = True
            break

    result = Image2D(x * scale, y.pixel_size_nm)
    report = SolverReport(outer, cres, rel_outer, tuple(trace),
                          tuple(residuals), converged)
    return result, report
