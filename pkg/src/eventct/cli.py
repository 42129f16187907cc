"""Subcommand CLI: phantom / simulate / reconstruct / analyze / pipeline.

Every run resolves one config file, honors ``--seed`` / ``--threads`` /
``--output-dir`` overrides, and writes a ``manifest.txt`` with the code
version and the resolved configuration, so a run can be reproduced from its
output directory alone.

Exit codes: 0 success, 1 usage error, 2 data/config error, 3 numerical
failure.
"""

import argparse
import csv
import os
import sys

import numba
import numpy as np

from . import __version__
from . import io as storage
from .analysis import (angular_breakdown, cooccurrence_hist, difference_sinogram,
                       estimate_event_time, mae_transition, write_breakdown_csv,
                       write_hist_csv, write_metrics)
from .baseline import reconstruct_sirt, reconstruct_sliding_window
from .config import RunConfig
from .core import EventVolume, NumericsError
from .dyrect import initial_event_volume, reconstruct_dyrect
from .projector import forward_project


class _Parser(argparse.ArgumentParser):
    """argparse with usage failures mapped to exit code 1."""

    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        sys.exit(1)


def _build_parser():
    parser = _Parser(prog="eventct",
                     description="Event-based 4D CT simulation and reconstruction.")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def add(name, help_text):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", required=True, help="key=value run configuration")
        p.add_argument("--seed", type=int, default=None,
                       help="override every seed in the config")
        p.add_argument("--threads", type=int, default=None,
                       help="compute thread budget")
        p.add_argument("--output-dir", default=None,
                       help="override output.dir from the config")
        return p

    add("phantom", "build the ground-truth event volume")
    add("simulate", "forward-project the phantom into measured projections")
    p = add("reconstruct", "reconstruct from stored projections")
    p.add_argument("--method", choices=("dyrect", "sirt", "sliding"), default="dyrect")
    p = add("analyze", "compare reconstruction against ground truth")
    p.add_argument("--metric", choices=("mae", "hist", "angles", "diffsino"),
                   default="mae")
    add("pipeline", "run all configured stages in order")
    return parser


def _set_threads(requested):
    limit = numba.config.NUMBA_NUM_THREADS
    if requested is None:
        return numba.get_num_threads()
    n = max(1, min(requested, limit))
    numba.set_num_threads(n)
    return n


def _prepare(args):
    cfg = RunConfig.load(args.config)
    if args.seed is not None:
        cfg.override("phantom.seed", args.seed)
        cfg.override("recon.seed", args.seed)
        cfg.override("noise.seed", args.seed)
    outdir = args.output_dir or str(cfg.get("output.dir", "eventct_out"))
    os.makedirs(outdir, exist_ok=True)
    threads = _set_threads(args.threads)
    with open(os.path.join(outdir, "manifest.txt"), "w") as fh:
        fh.write(f"version={__version__}\n")
        fh.write(f"command={args.command}\n")
        fh.write(f"threads={threads}\n")
        for line in cfg.resolved_lines():
            fh.write(line + "\n")
    return cfg, outdir


def _merge_metrics(outdir, new_metrics):
    path = os.path.join(outdir, "metrics.txt")
    merged = {}
    if os.path.exists(path):
        with open(path) as fh:
            for line in fh:
                key, _, value = line.strip().partition("=")
                if key:
                    merged[key] = value
    merged.update(new_metrics)
    write_metrics(path, merged)
    return path


def _stage_phantom(cfg, outdir):
    _, gt = cfg.build_phantoms()
    storage.write_volume(os.path.join(outdir, "phantom_gt.raw"), gt)


def _stage_simulate(cfg, outdir):
    fine, _ = cfg.build_phantoms()
    geometry = cfg.geometry()
    step = float(cfg.get("simulate.ray_step", 0.5))
    pset = forward_project(fine, geometry, ray_step=step)
    model, sigma, seed = cfg.noise()
    if model == "gaussian" and sigma > 0:
        rng = np.random.default_rng(seed)
        pset.data += rng.normal(0.0, sigma, size=pset.data.shape)
    storage.write_projections(os.path.join(outdir, "projections.raw"), pset)


def _projections(cfg, outdir):
    path = cfg.get("input.projections", os.path.join(outdir, "projections.raw"))
    return storage.read_projections(path)


def _write_residuals(path, residuals):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["iteration", "mean_squared_error"])
        for i, r in enumerate(residuals):
            writer.writerow([i, f"{r:.9g}"])


def _stage_reconstruct(cfg, outdir, method):
    measured = _projections(cfg, outdir)
    grid = cfg.grid()
    geometry = measured.geometry
    if method == "dyrect":
        params = cfg.recon_params()
        init_mode = str(cfg.get("recon.init", "zero"))
        freeze = bool(cfg.get("recon.freeze_attenuations", False))
        if init_mode == "truth":
            _, gt = cfg.build_phantoms()
            mid = initial_event_volume(grid, geometry)
            init = EventVolume(gt.mu0.copy(), gt.mu1.copy(), mid.tstar)
        elif init_mode == "sirt":
            base = reconstruct_sirt(measured, np.arange(geometry.n_views), grid,
                                    n_iterations=int(cfg.get("recon.sirt_iterations", 20)),
                                    relax=float(cfg.get("recon.relax", 0.5)),
                                    ray_step=params.ray_step)
            init = initial_event_volume(grid, geometry, base)
        elif init_mode == "zero":
            init = initial_event_volume(grid, geometry)
        else:
            raise ValueError(f"unknown recon.init {init_mode!r}")
        result = reconstruct_dyrect(measured, params, init,
                                    freeze_attenuations=freeze)
        storage.write_volume(os.path.join(outdir, "recon.raw"), result.volume)
        _write_residuals(os.path.join(outdir, "residuals.csv"), result.residuals)
    elif method == "sirt":
        residuals = []
        field = reconstruct_sirt(measured, np.arange(geometry.n_views), grid,
                                 n_iterations=int(cfg.get("recon.sirt_iterations", 20)),
                                 relax=float(cfg.get("recon.relax", 0.5)),
                                 ray_step=float(cfg.get("recon.ray_step", 0.5)),
                                 residual_out=residuals)
        storage.write_volume(os.path.join(outdir, "sirt.raw"), field)
        _write_residuals(os.path.join(outdir, "residuals.csv"), residuals)
    else:
        times = []
        frames = reconstruct_sliding_window(
            measured,
            int(cfg.get("recon.window", geometry.projections_per_rotation)),
            int(cfg.get("recon.stride", geometry.projections_per_rotation)),
            grid,
            n_iterations=int(cfg.get("recon.window_iterations", 3)),
            relax=float(cfg.get("recon.relax", 0.5)),
            ray_step=float(cfg.get("recon.ray_step", 0.5)),
            times_out=times)
        for i, frame in enumerate(frames):
            storage.write_volume(os.path.join(outdir, f"frame_{i:03d}.raw"), frame)
        with open(os.path.join(outdir, "frame_times.csv"), "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["frame", "time_rotations"])
            for i, t in enumerate(times):
                writer.writerow([i, f"{t:.9g}"])


def _ground_truth(cfg, outdir):
    path = cfg.get("input.phantom", os.path.join(outdir, "phantom_gt.raw"))
    return storage.read_volume(path)


def _reconstruction(cfg, outdir):
    path = cfg.get("input.reconstruction", os.path.join(outdir, "recon.raw"))
    return storage.read_volume(path)


def _stage_analyze(cfg, outdir, metric):
    mask_policy = str(cfg.get("analyze.mask", "dynamic"))
    metrics = {}
    if metric == "mae":
        gt = _ground_truth(cfg, outdir)
        rec = _reconstruction(cfg, outdir)
        metrics["mae_rotations"] = mae_transition(gt, rec, mask_policy)
        dmu = gt.delta_mu()[np.abs(gt.delta_mu()) > 0]
        metrics["dynamic_voxels"] = int(dmu.size)
    elif metric == "hist":
        gt = _ground_truth(cfg, outdir)
        rec = _reconstruction(cfg, outdir)
        hist = cooccurrence_hist(gt, rec, int(cfg.get("analyze.bins", 20)), mask_policy)
        write_hist_csv(os.path.join(outdir, "cooccurrence.csv"), hist)
        metrics["hist_diagonal_fraction"] = hist.diagonal_fraction()
    elif metric == "angles":
        gt = _ground_truth(cfg, outdir)
        rec = _reconstruction(cfg, outdir)
        breakdown = angular_breakdown(gt, rec, cfg.geometry(), mask_policy)
        write_breakdown_csv(os.path.join(outdir, "angular_breakdown.csv"), breakdown)
        for name, count, mae in breakdown.rows():
            metrics[f"mae_{name}"] = mae
            metrics[f"voxels_{name}"] = count
    else:
        diff = difference_sinogram(_projections(cfg, outdir))
        storage.write_projections(os.path.join(outdir, "diff_sinogram.raw"), diff)
        metrics["event_time_estimate"] = estimate_event_time(
            diff, float(cfg.get("analyze.threshold", 0.1)))
    _merge_metrics(outdir, metrics)


def _run_pipeline(cfg, outdir):
    stages = str(cfg.get("pipeline.stages", "phantom simulate reconstruct analyze")).split()
    for stage in stages:
        if stage == "phantom":
            _stage_phantom(cfg, outdir)
        elif stage == "simulate":
            _stage_simulate(cfg, outdir)
        elif stage == "reconstruct":
            _stage_reconstruct(cfg, outdir, str(cfg.get("recon.method", "dyrect")))
        elif stage == "analyze":
            for metric in str(cfg.get("analyze.metrics", "mae")).split():
                _stage_analyze(cfg, outdir, metric)
        else:
            raise ValueError(f"unknown pipeline stage {stage!r}")


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        cfg, outdir = _prepare(args)
        if args.command == "phantom":
            _stage_phantom(cfg, outdir)
        elif args.command == "simulate":
            _stage_simulate(cfg, outdir)
        elif args.command == "reconstruct":
            _stage_reconstruct(cfg, outdir, args.method)
        elif args.command == "analyze":
            _stage_analyze(cfg, outdir, args.metric)
        else:
            _run_pipeline(cfg, outdir)
    except (NumericsError, FloatingPointError) as exc:
        print(f"eventct: numerical failure: {exc}", file=sys.stderr)
        return 3
    except (ValueError, OSError, KeyError, TypeError) as exc:
        print(f"eventct: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
