"""Flat key=value run configuration.

One file drives a whole pipeline: phantom construction, acquisition
geometry, reconstruction parameters, noise, and analysis choices.  Keys use
section prefixes (``phantom.``, ``geometry.``, ``recon.``, ``noise.``,
``analyze.``, ``region.<n>.``, ``rupture.``); values are plain scalars,
words, or space-separated number lists.  The resolved mapping is what run
manifests record, so a manifest is itself a loadable config.
"""

import math
import os

import numpy as np

from .core import AcquisitionGeometry, ReconParams, VoxelGrid3
from .phantom import (FilmRuptureParams, FlowSpec, PoreRegion,
                      build_film_rupture_phantom, build_flow_phantom,
                      downsample_event_volume, refine_grid)

_TRUE = {"true", "yes", "on", "1"}
_FALSE = {"false", "no", "off", "0"}


def _parse_value(text):
    text = text.strip()
    low = text.lower()
    if low in _TRUE:
        return True
    if low in _FALSE:
        return False
    parts = text.split()
    if len(parts) > 1:
        try:
            return tuple(float(p) for p in parts)
        except ValueError:
            return text
    try:
        return int(text)
    except ValueError:
        pass
    try:
        return float(text)
    except ValueError:
        return text


class RunConfig:
    """Parsed configuration with typed builders for every pipeline stage."""

    def __init__(self, entries):
        self.entries = dict(entries)
        for key in self.entries:
            if key.startswith("input.") and isinstance(self.entries[key], str):
                if not os.path.exists(self.entries[key]):
                    raise ValueError(f"{key} references missing path {self.entries[key]}")

    @classmethod
    def load(cls, path):
        entries = {}
        with open(path) as fh:
            for lineno, line in enumerate(fh, 1):
                line = line.split("#", 1)[0].strip()
                if not line:
                    continue
                if "=" not in line:
                    raise ValueError(f"{path}:{lineno}: expected key=value")
                key, value = line.split("=", 1)
                entries[key.strip()] = _parse_value(value)
        return cls(entries)

    def get(self, key, default=None):
        return self.entries.get(key, default)

    def require(self, key):
        if key not in self.entries:
            raise ValueError(f"config is missing required key {key!r}")
        return self.entries[key]

    def override(self, key, value):
        self.entries[key] = value

    # -- builders ---------------------------------------------------------

    def grid(self) -> VoxelGrid3:
        n = int(self.require("phantom.grid_n"))
        return VoxelGrid3.centered(n, n, n, float(self.get("phantom.voxel_size_mm", 1.0)))

    def fine_grid(self) -> VoxelGrid3:
        factor = float(self.get("phantom.supersample", 1.0))
        grid = self.grid()
        return grid if factor == 1.0 else refine_grid(grid, factor)

    def _regions(self):
        indices = sorted({int(key.split(".")[1]) for key in self.entries
                          if key.startswith("region.")})
        regions = []
        for idx in indices:
            def entry(name, default=None):
                return self.get(f"region.{idx}.{name}", default)
            centers = np.asarray(entry("centers"), dtype=np.float64).reshape(-1, 3)
            radii = np.atleast_1d(np.asarray(entry("radii"), dtype=np.float64))
            direction = entry("direction", (1.0, 0.0, 0.0))
            regions.append(PoreRegion(
                shape=str(entry("shape", "sphere")),
                centers=centers, radii=radii,
                front=str(entry("front", "planar")),
                front_direction=direction,
                front_speed=float(entry("speed", 10.0)),
                front_start_time=float(entry("start", 0.0))))
        return regions

    def flow_spec(self, fine=True) -> FlowSpec:
        return FlowSpec(
            grid=self.fine_grid() if fine else self.grid(),
            matrix_mu=float(self.require("phantom.matrix_mu")),
            fluid0_mu=float(self.require("phantom.fluid0_mu")),
            fluid1_mu=float(self.require("phantom.fluid1_mu")),
            pore_regions=self._regions(),
            dynamic_window=(float(self.require("phantom.window_begin")),
                            float(self.require("phantom.window_end"))),
            rng_seed=int(self.get("phantom.seed", 0)))

    def rupture_params(self) -> FilmRuptureParams:
        return FilmRuptureParams(
            matrix_mu=float(self.get("rupture.matrix_mu", 0.5)),
            gas_mu=float(self.get("rupture.gas_mu", 0.05)),
            bubble_radius=float(self.get("rupture.bubble_radius", 12.0)),
            wall_radius=float(self.get("rupture.wall_radius", 10.0)),
            wall_thickness=float(self.get("rupture.wall_thickness", 3.0)),
            center=tuple(self.get("rupture.center", (0.0, 0.0, 0.0))),
            axis=tuple(self.get("rupture.axis", (0.0, 0.0, 1.0))))

    def build_phantoms(self):
        """(fine phantom, ground truth on the reconstruction grid)."""
        kind = str(self.get("phantom.kind", "flow"))
        if kind == "flow":
            fine_vol = build_flow_phantom(self.flow_spec(fine=True))
        elif kind == "rupture":
            fine_vol = build_film_rupture_phantom(
                self.fine_grid(), self.rupture_params(),
                float(self.require("rupture.time")))
        else:
            raise ValueError(f"unknown phantom.kind {kind!r}")
        grid = self.grid()
        if fine_vol.grid == grid:
            return fine_vol, fine_vol
        return fine_vol, downsample_event_volume(fine_vol, grid)

    def geometry(self) -> AcquisitionGeometry:
        beam = str(self.get("geometry.beam", "parallel"))
        so = self.get("geometry.source_to_origin_mm")
        return AcquisitionGeometry.circular(
            beam=beam,
            det_rows=int(self.require("geometry.det_rows")),
            det_cols=int(self.require("geometry.det_cols")),
            pixel_pitch=float(self.get("geometry.pixel_pitch_mm", 1.0)),
            n_rotations=float(self.require("geometry.rotations")),
            projections_per_rotation=int(self.require("geometry.views_per_rotation")),
            start_angle=math.radians(float(self.get("geometry.start_angle_deg", 0.0))),
            origin_to_detector=float(self.get("geometry.origin_to_detector_mm", 100.0)),
            source_to_origin=None if so is None else float(so))

    def recon_params(self) -> ReconParams:
        return ReconParams(
            lambda_t=float(self.get("recon.lambda_t", 0.5)),
            lambda_0=float(self.get("recon.lambda_0", 0.3)),
            lambda_1=float(self.get("recon.lambda_1", 0.3)),
            lambda_delta=float(self.get("recon.lambda_delta", 1.0)),
            lambda_mu=float(self.get("recon.lambda_mu", 1.0)),
            epsilon=float(self.get("recon.epsilon", 1e-4)),
            n_iterations=int(self.get("recon.iterations", 10)),
            n_subsets=int(self.get("recon.subsets", 4)),
            rng_seed=int(self.get("recon.seed", 0)),
            use_weights=bool(self.get("recon.use_weights", True)),
            weight_floor=float(self.get("recon.weight_floor", 0.05)),
            ray_step=float(self.get("recon.ray_step", 0.5)))

    def noise(self):
        """(model, sigma, seed); model is 'none' or 'gaussian' on optical depth."""
        model = str(self.get("noise.model", "none"))
        if model not in ("none", "gaussian"):
            raise ValueError(f"unknown noise.model {model!r}")
        return model, float(self.get("noise.sigma", 0.0)), int(self.get("noise.seed", 1))

    def resolved_lines(self):
        """Stable key=value listing for the run manifest."""
        lines = []
        for key in sorted(self.entries):
            value = self.entries[key]
            if isinstance(value, tuple):
                text = " ".join(f"{v:.17g}" for v in value)
            elif isinstance(value, bool):
                text = "true" if value else "false"
            elif isinstance(value, float):
                text = f"{value:.17g}"
            else:
                text = str(value)
            lines.append(f"{key}={text}")
        return lines
