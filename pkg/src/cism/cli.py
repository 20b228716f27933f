"""Command-line pipeline driver.

Subcommands mirror the pipeline stages: ``psf``, ``simulate``,
``reconstruct``, ``fuse`` and ``experiment``.  Every command takes
``--config`` (flat key = value file; built-in defaults when omitted),
``--out``, ``--jobs`` and ``--seed`` (overrides the config seed).  Exit
codes: 0 success, 2 configuration error, 3 I/O error, 4 numerical failure.
"""

import argparse
import os
import sys
from concurrent.futures import ProcessPoolExecutor

import numpy as np

from . import pipeline
from .apr import estimate_shifts, fuse, write_shifts_csv
from .errors import ConfigError
from .io import RasterFormatError, write_png16, write_raster, write_sidecar, write_stack
from .psf import write_psf_stack
from .sampling import measure
from .solver import solve_tv, write_report

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_IO = 3
EXIT_NUMERICAL = 4


def _load_config(args) -> pipeline.PipelineConfig:
    if args.config:
        cfg = pipeline.read_config(args.config)
    else:
        cfg = pipeline.default_config()
    if args.seed is not None:
        cfg = cfg.with_seed(args.seed)
    return cfg


def _ensure_out(args, cfg) -> str:
    out = args.out or cfg.output_dir
    if not out:
        raise ConfigError("--out is required (or set output_dir in the config)")
    os.makedirs(out, exist_ok=True)
    return out


def cmd_psf(args) -> int:
    cfg = _load_config(args)
    out = _ensure_out(args, cfg)
    stack = pipeline.build_psf_stack(cfg)
    write_psf_stack(stack, os.path.join(out, "psf.cisms"), cfg.geometry, cfg.optics)
    pipeline.write_config(cfg, os.path.join(out, "config.txt"))
    return EXIT_OK


def cmd_simulate(args) -> int:
    cfg = _load_config(args)
    out = _ensure_out(args, cfg)
    psfs = pipeline.build_psf_stack(cfg)
    phantom, noisy, noiseless = pipeline.simulate_sample(cfg, 0, psfs)
    write_raster(phantom, os.path.join(out, "phantom.cism"))
    write_stack(noisy, os.path.join(out, "noisy.cisms"))
    write_stack(noiseless, os.path.join(out, "noiseless.cisms"))
    pipeline.write_config(cfg, os.path.join(out, "config.txt"))
    write_sidecar(os.path.join(out, "phantom.cism.meta.txt"), {
        "seed": pipeline.phantom_seed(cfg, 0),
        "acquire_seed": pipeline.acquire_seed(cfg, 0),
    })
    if args.png:
        write_png16(phantom, os.path.join(out, "phantom.png"))
    return EXIT_OK


def _solve_one(mask, element, solver_cfg):
    y = measure(mask, element)
    return solve_tv(mask, y, solver_cfg)


def cmd_reconstruct(args) -> int:
    cfg = _load_config(args)
    out = _ensure_out(args, cfg)
    dataset = pipeline.load_dataset(args.dataset, cfg.geometry)
    mask = pipeline.full_or_skip_mask(dataset.rows, dataset.cols, args.full_mask)
    if args.jobs > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            results = list(pool.map(_solve_one, [mask] * len(dataset),
                                    dataset.elements, [cfg.solver] * len(dataset)))
    else:
        results = [_solve_one(mask, el, cfg.solver) for el in dataset.elements]
    images = [img for img, _ in results]
    write_stack(images, os.path.join(out, "reconstructed.cisms"))
    for k, (_, report) in enumerate(results):
        write_report(report,
                     os.path.join(out, f"report_element_{k:02d}.txt"),
                     os.path.join(out, f"report_element_{k:02d}.trace.csv"))
    pipeline.write_config(cfg, os.path.join(out, "config.txt"))
    mask.to_pbm(os.path.join(out, "mask.pbm"))
    return EXIT_OK


def cmd_fuse(args) -> int:
    cfg = _load_config(args)
    out = _ensure_out(args, cfg)
    dataset = pipeline.load_dataset(args.dataset, cfg.geometry)
    shifts = estimate_shifts(dataset, cfg.max_shift_px)
    ism = fuse(dataset, shifts)
    write_raster(dataset.central, os.path.join(out, "confocal.cism"))
    write_raster(ism, os.path.join(out, "ism.cism"))
    write_shifts_csv(shifts, cfg.geometry, os.path.join(out, "shifts.csv"))
    if args.png:
        write_png16(dataset.central, os.path.join(out, "confocal.png"))
        write_png16(ism, os.path.join(out, "ism.png"))
    return EXIT_OK


def cmd_experiment(args) -> int:
    cfg = _load_config(args)
    out = _ensure_out(args, cfg)
    outcome = pipeline.run_experiment(cfg, out, jobs=args.jobs, write_png=args.png)
    print(f"confocal: {outcome.confocal.formatted_percent()}")
    print(f"ism:      {outcome.ism.formatted_percent()}")
    print(f"table:    {outcome.table_path}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="cism",
        description="Compressive image scanning microscopy pipeline",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, dataset=False):
        if dataset:
            p.add_argument("dataset", help="input .cisms stack")
        p.add_argument("--config", help="flat key = value config file")
        p.add_argument("--out", help="output directory (created if missing)")
        p.add_argument("--jobs", type=int, default=1, help="worker processes")
        p.add_argument("--seed", type=int, help="override the config seed")
        p.add_argument("--png", action="store_true", help="also export viewing PNGs")

    p = sub.add_parser("psf", help="generate the per-element PSF stack")
    common(p)
    p.set_defaults(func=cmd_psf)

    p = sub.add_parser("simulate", help="phantom, noiseless and noisy stacks")
    common(p)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("reconstruct", help="subsample and TV-reconstruct a stack")
    common(p, dataset=True)
    p.add_argument("--full-mask", action="store_true",
                   help="sample every point instead of skipping rows/columns")
    p.set_defaults(func=cmd_reconstruct)

    p = sub.add_parser("fuse", help="pixel-reassignment fusion of a stack")
    common(p, dataset=True)
    p.set_defaults(func=cmd_fuse)

    p = sub.add_parser("experiment", help="multi-sample error experiment")
    common(p)
    p.set_defaults(func=cmd_experiment)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except RasterFormatError as exc:
        print(f"format error: {exc}", file=sys.stderr)
        return EXIT_IO
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_IO
    except ValueError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (ArithmeticError, np.linalg.LinAlgError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
