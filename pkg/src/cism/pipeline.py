"""End-to-end pipeline: configs, per-sample runs, and the error experiment.

A pipeline config is a flat 'key = value' text file ('#' starts a comment).
Unknown keys are rejected so typos fail loudly.  Every run artifact gets a
copy of the effective config for provenance.

The experiment measures, per seeded sample, the relative error between the
fully sampled and compressively reconstructed images for both imaging modes
(central-element confocal and fused parallel-element stacks), then
aggregates mean and sample standard deviation over all samples.  Sample
directories are self-contained and a finished sample is skipped on re-run,
so interrupted experiments resume where they stopped.
"""

import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace

from . import rng
from .apr import estimate_shifts, fuse, write_shifts_csv
from .errors import ConfigError
from .forward import AcquisitionConfig, acquire
from .image import Image2D, ISMDataset
from .io import parse_kv_text, read_stack, write_png16, write_raster, write_sidecar
from .metrics import ExperimentStats, aggregate, relative_error
from .phantom import PhantomConfig, generate_phantom
from .psf import DetectorGeometry, OpticalConfig, PSFStack, generate_psf_stack
from .sampling import SamplingMask, make_full_mask, make_skip_mask, measure
from .solver import SolverConfig, SolverReport, solve_tv

# substream tags for deriving per-sample seeds from the experiment seed
_PHANTOM_TAG = 1
_ACQUIRE_TAG = 2


@dataclass(frozen=True)
class PipelineConfig:
    phantom: PhantomConfig
    geometry: DetectorGeometry
    optics: OpticalConfig
    acquisition: AcquisitionConfig
    solver: SolverConfig
    max_shift_px: float = 10.0
    reuse_reference_shifts: bool = False
    n_samples: int = 25
    seed: int = 1
    output_dir: str = ""

    def __post_init__(self):
        if self.max_shift_px <= 0:
            raise ConfigError("max_shift_px must be > 0")
        if self.n_samples < 1:
            raise ConfigError("n_samples must be >= 1")
        rng.check_seed(self.seed)

    def with_seed(self, seed) -> "PipelineConfig":
        return replace(self, seed=rng.check_seed(seed))


def default_config() -> PipelineConfig:
    return PipelineConfig(
        phantom=PhantomConfig(),
        geometry=DetectorGeometry(),
        optics=OpticalConfig(),
        acquisition=AcquisitionConfig(),
        solver=SolverConfig(),
    )


def _parse_bool(text: str) -> bool:
    if text.lower() in ("true", "1", "yes"):
        return True
    if text.lower() in ("false", "0", "no"):
        return False
    raise ValueError(f"expected a boolean, got {text!r}")


# flat key -> (sub-config attribute or '' for top level, field name, parser)
_SCHEMA = {
    "rows": ("phantom", "rows", int),
    "cols": ("phantom", "cols", int),
    "pixel_size_nm": ("phantom", "pixel_size_nm", float),
    "n_filaments": ("phantom", "n_filaments", int),
    "step_px": ("phantom", "step_px", float),
    "curvature_sigma_rad": ("phantom", "curvature_sigma_rad", float),
    "intensity_peak": ("phantom", "intensity_peak", float),
    "linewidth_sigma_px": ("phantom", "linewidth_sigma_px", float),
    "array_rows": ("geometry", "array_rows", int),
    "array_cols": ("geometry", "array_cols", int),
    "element_size_nm": ("geometry", "element_size_nm", float),
    "element_pitch_nm": ("geometry", "element_pitch_nm", float),
    "magnification": ("geometry", "magnification", float),
    "wavelength_exc_nm": ("optics", "wavelength_exc_nm", float),
    "wavelength_em_nm": ("optics", "wavelength_em_nm", float),
    "numerical_aperture": ("optics", "numerical_aperture", float),
    "psf_support_px": ("optics", "psf_support_px", int),
    "photon_budget": ("acquisition", "photon_budget", float),
    "beta_init": ("solver", "beta_init", float),
    "mu_init": ("solver", "mu_init", float),
    "beta_max": ("solver", "beta_max", float),
    "mu_max": ("solver", "mu_max", float),
    "continuation_factor": ("solver", "continuation_factor", float),
    "tol_rel_change": ("solver", "tol_rel_change", float),
    "tol_constraint": ("solver", "tol_constraint", float),
    "max_outer": ("solver", "max_outer", int),
    "max_inner": ("solver", "max_inner", int),
    "tv_variant": ("solver", "tv_variant", str),
    "nonneg": ("solver", "nonneg", _parse_bool),
    "max_shift_px": ("", "max_shift_px", float),
    "reuse_reference_shifts": ("", "reuse_reference_shifts", _parse_bool),
    "n_samples": ("", "n_samples", int),
    "seed": ("", "seed", int),
    "output_dir": ("", "output_dir", str),
}


def parse_config(text: str) -> PipelineConfig:
    try:
        entries = parse_kv_text(text)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    sections = {"phantom": {}, "geometry": {}, "optics": {},
                "acquisition": {}, "solver": {}, "": {}}
    for key, raw in entries.items():
        if key not in _SCHEMA:
            raise ConfigError(f"unknown config key {key!r}")
        section, name, parser = _SCHEMA[key]
        try:
            sections[section][name] = parser(raw)
        except ValueError as exc:
            raise ConfigError(f"config key {key!r}: {exc}") from exc
    try:
        return PipelineConfig(
            phantom=PhantomConfig(**sections["phantom"]),
            geometry=DetectorGeometry(**sections["geometry"]),
            optics=OpticalConfig(**sections["optics"]),
            acquisition=AcquisitionConfig(**sections["acquisition"]),
            solver=SolverConfig(**sections["solver"]),
            **sections[""],
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def read_config(path) -> PipelineConfig:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_config(fh.read())


def config_text(cfg: PipelineConfig) -> str:
    """Canonical flat rendering; parse_config(config_text(cfg)) == cfg."""
    lines = []
    for key, (section, name, parser) in _SCHEMA.items():
        if key == "output_dir" and not cfg.output_dir:
            continue
        holder = cfg if section == "" else getattr(cfg, section)
        value = getattr(holder, name)
        if parser is _parse_bool:
            value = str(bool(value)).lower()
        elif parser is float:
            value = repr(float(value))
        lines.append(f"{key} = {value}")
    return "\n".join(lines) + "\n"


def write_config(cfg: PipelineConfig, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(config_text(cfg))


def phantom_seed(cfg: PipelineConfig, sample_index: int) -> int:
    return rng.substream_key(cfg.seed, _PHANTOM_TAG, sample_index)


def acquire_seed(cfg: PipelineConfig, sample_index: int) -> int:
    return rng.substream_key(cfg.seed, _ACQUIRE_TAG, sample_index)


def build_psf_stack(cfg: PipelineConfig) -> PSFStack:
    return generate_psf_stack(cfg.geometry, cfg.optics, cfg.phantom.pixel_size_nm)


def simulate_sample(cfg: PipelineConfig, sample_index: int,
                    psfs: PSFStack) -> tuple[Image2D, ISMDataset, ISMDataset]:
    """(phantom, noisy, noiseless) for one seeded sample."""
    ph_cfg = replace(cfg.phantom, seed=phantom_seed(cfg, sample_index))
    phantom = generate_phantom(ph_cfg)
    acq_cfg = replace(cfg.acquisition, seed=acquire_seed(cfg, sample_index))
    noisy, noiseless = acquire(phantom, psfs, acq_cfg)
    return phantom, noisy, noiseless


def reconstruct_dataset(dataset: ISMDataset, mask: SamplingMask,
                        solver_cfg: SolverConfig) -> tuple[ISMDataset, tuple[SolverReport, ...]]:
    """Subsample and TV-reconstruct every element image independently."""
    images = []
    reports = []
    for element in dataset.elements:
        y = measure(mask, element)
        x, report = solve_tv(mask, y, solver_cfg)
        images.append(x)
        reports.append(report)
    return ISMDataset(tuple(images), dataset.geometry), tuple(reports)


@dataclass(frozen=True)
class SampleResult:
    """The four panel images of one sample plus its two relative errors."""

    fs_confocal: Image2D
    fs_ism: Image2D
    cs_confocal: Image2D
    cs_ism: Image2D
    err_confocal: float
    err_ism: float
    n_converged: int
    reference_shifts: object
    compressive_shifts: object


def run_sample(cfg: PipelineConfig, sample_index: int, psfs: PSFStack) -> SampleResult:
    """Full pipeline for one sample: simulate, reconstruct, fuse, score."""
    _, noisy, _ = simulate_sample(cfg, sample_index, psfs)
    mask = make_skip_mask(noisy.rows, noisy.cols)

    fs_confocal = noisy.central
    ref_shifts = estimate_shifts(noisy, cfg.max_shift_px)
    fs_ism = fuse(noisy, ref_shifts)

    recon, reports = reconstruct_dataset(noisy, mask, cfg.solver)
    cs_confocal = recon.central
    if cfg.reuse_reference_shifts:
        cs_shifts = ref_shifts
    else:
        cs_shifts = estimate_shifts(recon, cfg.max_shift_px)
    cs_ism = fuse(recon, cs_shifts)

    return SampleResult(
        fs_confocal=fs_confocal,
        fs_ism=fs_ism,
        cs_confocal=cs_confocal,
        cs_ism=cs_ism,
        err_confocal=relative_error(fs_confocal, cs_confocal),
        err_ism=relative_error(fs_ism, cs_ism),
        n_converged=sum(r.converged for r in reports),
        reference_shifts=ref_shifts,
        compressive_shifts=cs_shifts,
    )


_PANEL_FILES = {
    "fs_confocal": "fs_clsm.cism",
    "fs_ism": "fs_ism.cism",
    "cs_confocal": "cs_clsm.cism",
    "cs_ism": "cs_ism.cism",
}
_RESULT_FILE = "errors.txt"


def _sample_dir(out_dir: str, sample_index: int) -> str:
    return os.path.join(out_dir, "samples", f"sample_{sample_index:03d}")


def _run_sample_to_dir(cfg: PipelineConfig, sample_index: int, out_dir: str,
                       write_png: bool) -> dict:
    """Worker body: compute one sample and persist it into its own directory."""
    sample_dir = _sample_dir(out_dir, sample_index)
    os.makedirs(sample_dir, exist_ok=True)
    psfs = build_psf_stack(cfg)
    result = run_sample(cfg, sample_index, psfs)
    for attr, name in _PANEL_FILES.items():
        img = getattr(result, attr)
        write_raster(img, os.path.join(sample_dir, name))
        if write_png:
            write_png16(img, os.path.join(sample_dir, name.replace(".cism", ".png")))
    write_shifts_csv(result.reference_shifts, cfg.geometry,
                     os.path.join(sample_dir, "shifts_reference.csv"))
    write_shifts_csv(result.compressive_shifts, cfg.geometry,
                     os.path.join(sample_dir, "shifts_compressive.csv"))
    record = {
        "err_confocal": repr(result.err_confocal),
        "err_ism": repr(result.err_ism),
        "n_converged": result.n_converged,
    }
    # written last, atomically: its presence marks the sample as complete
    tmp = os.path.join(sample_dir, _RESULT_FILE + ".tmp")
    write_sidecar(tmp, record)
    os.replace(tmp, os.path.join(sample_dir, _RESULT_FILE))
    return {"err_confocal": result.err_confocal, "err_ism": result.err_ism,
            "n_converged": result.n_converged}


def _load_sample_record(out_dir: str, sample_index: int) -> dict | None:
    path = os.path.join(_sample_dir(out_dir, sample_index), _RESULT_FILE)
    if not os.path.exists(path):
        return None
    with open(path, "r", encoding="utf-8") as fh:
        entries = parse_kv_text(fh.read())
    return {"err_confocal": float(entries["err_confocal"]),
            "err_ism": float(entries["err_ism"]),
            "n_converged": int(entries["n_converged"])}


@dataclass(frozen=True)
class ExperimentOutcome:
    confocal: ExperimentStats
    ism: ExperimentStats
    table_path: str


def run_experiment(cfg: PipelineConfig, out_dir: str, jobs: int = 1,
                   write_png: bool = False) -> ExperimentOutcome:
    """Run (or resume) the full multi-sample error experiment."""
    if cfg.n_samples < 2:
        raise ConfigError("experiment needs n_samples >= 2 to aggregate")
    os.makedirs(out_dir, exist_ok=True)
    write_config(cfg, os.path.join(out_dir, "config.txt"))
    build_psf_stack(cfg)  # validate geometry and optics before spawning work

    records: dict[int, dict] = {}
    pending = []
    for i in range(cfg.n_samples):
        record = _load_sample_record(out_dir, i)
        if record is None:
            pending.append(i)
        else:
            records[i] = record
    if pending:
        if jobs > 1:
            with ProcessPoolExecutor(max_workers=jobs) as pool:
                futures = {i: pool.submit(_run_sample_to_dir, cfg, i, out_dir, write_png)
                           for i in pending}
                for i, future in futures.items():
                    records[i] = future.result()
        else:
            for i in pending:
                records[i] = _run_sample_to_dir(cfg, i, out_dir, write_png)

    err_confocal = [records[i]["err_confocal"] for i in range(cfg.n_samples)]
    err_ism = [records[i]["err_ism"] for i in range(cfg.n_samples)]
    stats_confocal = aggregate(err_confocal)
    stats_ism = aggregate(err_ism)

    table_path = os.path.join(out_dir, "table.csv")
    with open(table_path, "w", encoding="utf-8") as fh:
        fh.write("sample_id,err_confocal,err_ism\n")
        for i in range(cfg.n_samples):
            fh.write(f"{i},{err_confocal[i]!r},{err_ism[i]!r}\n")
        fh.write(f"summary,{stats_confocal.formatted_percent()},"
                 f"{stats_ism.formatted_percent()}\n")
    return ExperimentOutcome(stats_confocal, stats_ism, table_path)


def dataset_from_rasters(images, geometry: DetectorGeometry) -> ISMDataset:
    return ISMDataset(tuple(images), geometry)


def full_or_skip_mask(rows: int, cols: int, full: bool) -> SamplingMask:
    return make_full_mask(rows, cols) if full else make_skip_mask(rows, cols)


def load_dataset(path, geometry: DetectorGeometry) -> ISMDataset:
    return dataset_from_rasters(read_stack(path), geometry)


__all__ = [
    "PipelineConfig", "default_config", "parse_config", "read_config",
    "config_text", "write_config", "build_psf_stack", "simulate_sample",
    "reconstruct_dataset", "run_sample", "run_experiment", "SampleResult",
    "ExperimentOutcome", "load_dataset", "full_or_skip_mask",
    "phantom_seed", "acquire_seed",
]
