"""Shared data model: voxel grids, scalar fields, event volumes, scan geometry.

Conventions used across the package:

* lengths in mm, attenuation in 1/cm, optical depths dimensionless
* time is measured in rotation periods (1.0 = one full 360 degree turn)
* the rotation axis is z; view angle theta points the optical axis along
  (cos theta, sin theta, 0)
* field arrays have shape (nx, ny, nz); the x index comes first
"""

from dataclasses import dataclass, field
import math

import numpy as np

from . import _kernels


class NumericsError(RuntimeError):
    """Raised when an iterative solve produces non-finite values."""


@dataclass(frozen=True)
class VoxelGrid3:
    """Regular isotropic voxel grid; ``origin`` is the center of voxel (0,0,0)."""

    nx: int
    ny: int
    nz: int
    voxel_size: float
    origin: tuple = (0.0, 0.0, 0.0)

    def __post_init__(self):
        if min(self.nx, self.ny, self.nz) < 1:
            raise ValueError("grid counts must be >= 1")
        if not self.voxel_size > 0:
            raise ValueError("voxel_size must be > 0")
        object.__setattr__(self, "origin", tuple(float(c) for c in self.origin))
        if len(self.origin) != 3:
            raise ValueError("origin must be a 3-vector")

    @classmethod
    def centered(cls, nx, ny, nz, voxel_size):
        """Grid whose bounding box is centered on the world origin."""
        org = (
            -0.5 * voxel_size * (nx - 1),
            -0.5 * voxel_size * (ny - 1),
            -0.5 * voxel_size * (nz - 1),
        )
        return cls(nx, ny, nz, voxel_size, org)

    @property
    def shape(self):
        return (self.nx, self.ny, self.nz)

    @property
    def n_voxels(self):
        return self.nx * self.ny * self.nz

    @property
    def bbox_lo(self):
        h = 0.5 * self.voxel_size
        return tuple(o - h for o in self.origin)

    @property
    def bbox_hi(self):
        h = 0.5 * self.voxel_size
        n = (self.nx, self.ny, self.nz)
        return tuple(o + self.voxel_size * (k - 1) + h for o, k in zip(self.origin, n))

    def voxel_centers(self):
        """Coordinate axes of voxel centers (three 1D arrays)."""
        return tuple(
            self.origin[a] + self.voxel_size * np.arange((self.nx, self.ny, self.nz)[a])
            for a in range(3)
        )


def world_to_index(grid: VoxelGrid3, x) -> np.ndarray:
    """Fractional voxel index of world point ``x`` (out-of-range values are legal)."""
    x = np.asarray(x, dtype=np.float64)
    return (x - np.asarray(grid.origin)) / grid.voxel_size


def index_to_world(grid: VoxelGrid3, ijk) -> np.ndarray:
    """World position of (fractional) voxel index ``ijk``."""
    ijk = np.asarray(ijk, dtype=np.float64)
    return np.asarray(grid.origin) + grid.voxel_size * ijk


@dataclass
class ScalarField3:
    """Dense scalar samples on a :class:`VoxelGrid3`."""

    grid: VoxelGrid3
    values: np.ndarray

    def __post_init__(self):
        self.values = np.ascontiguousarray(self.values, dtype=np.float64)
        if self.values.shape != self.grid.shape:
            raise ValueError(
                f"values shape {self.values.shape} does not match grid {self.grid.shape}"
            )
        if not np.all(np.isfinite(self.values)):
            raise ValueError("field values must be finite")

    @classmethod
    def full(cls, grid, value=0.0):
        return cls(grid, np.full(grid.shape, float(value)))

    def copy(self):
        return ScalarField3(self.grid, self.values.copy())


@dataclass
class EventVolume:
    """Per-voxel single-step attenuation model: mu0 before tstar, mu1 from tstar on.

    A tstar outside the scanned time span means the voxel is effectively
    static over the scan.
    """

    mu0: ScalarField3
    mu1: ScalarField3
    tstar: ScalarField3

    def __post_init__(self):
        if not (self.mu0.grid == self.mu1.grid == self.tstar.grid):
            raise ValueError("mu0, mu1 and tstar must share one grid")
        if np.any(self.mu0.values < 0) or np.any(self.mu1.values < 0):
            raise ValueError("attenuation values must be >= 0")

    @classmethod
    def from_arrays(cls, grid, mu0, mu1, tstar):
        return cls(ScalarField3(grid, mu0), ScalarField3(grid, mu1), ScalarField3(grid, tstar))

    @property
    def grid(self):
        return self.mu0.grid

    def delta_mu(self) -> np.ndarray:
        return self.mu1.values - self.mu0.values

    def copy(self):
        return EventVolume(self.mu0.copy(), self.mu1.copy(), self.tstar.copy())


def sample_event_volume(vol: EventVolume, x, t: float) -> float:
    """Attenuation of the event model at world point ``x`` and time ``t``.

    The three parameter fields are interpolated trilinearly first, then the
    step is applied: the interpolated mu0 for t < tstar, mu1 from tstar on.
    Points outside the grid bounding box return 0.
    """
    x = np.asarray(x, dtype=np.float64)
    g = vol.grid
    return _kernels.sample_event_point(
        vol.mu0.values, vol.mu1.values, vol.tstar.values,
        np.asarray(g.origin), g.voxel_size,
        x[0], x[1], x[2], float(t),
    )


@dataclass(frozen=True)
class AcquisitionGeometry:
    """Continuous circular scan: beam model, detector grid, per-view angle and time."""

    beam: str                      # "parallel" or "cone"
    det_rows: int
    det_cols: int
    pixel_pitch: float             # mm
    angles: np.ndarray             # radians, one per view
    times: np.ndarray              # rotation periods, strictly increasing
    projections_per_rotation: int
    origin_to_detector: float = 100.0   # mm
    source_to_origin: float = None      # mm, cone only
    rotation_period: float = 1.0        # defines the time unit

    def __post_init__(self):
        if self.beam not in ("parallel", "cone"):
            raise ValueError(f"unknown beam model {self.beam!r}")
        if self.beam == "cone" and not (self.source_to_origin and self.source_to_origin > 0):
            raise ValueError("cone beam requires source_to_origin > 0")
        if min(self.det_rows, self.det_cols) < 1 or self.pixel_pitch <= 0:
            raise ValueError("invalid detector description")
        angles = np.ascontiguousarray(self.angles, dtype=np.float64)
        times = np.ascontiguousarray(self.times, dtype=np.float64)
        if angles.ndim != 1 or angles.shape != times.shape or angles.size == 0:
            raise ValueError("angles and times must be equal-length 1D arrays")
        if np.any(np.diff(times) <= 0):
            raise ValueError("view times must be strictly increasing")
        if angles.size > 1:
            # continuous circular trajectory: angle = a0 + 2*pi*t/T.  Checked
            # through the angle/time relation so view subsets stay valid.
            rel = angles - 2.0 * np.pi * times / self.rotation_period
            if not np.allclose(rel, rel[0], rtol=0, atol=1e-9):
                raise ValueError("views must follow a continuous circular trajectory")
        if self.projections_per_rotation < 1:
            raise ValueError("projections_per_rotation must be positive")
        object.__setattr__(self, "angles", angles)
        object.__setattr__(self, "times", times)

    @classmethod
    def circular(cls, beam, det_rows, det_cols, pixel_pitch, n_rotations,
                 projections_per_rotation, start_angle=0.0, start_time=0.0,
                 origin_to_detector=100.0, source_to_origin=None):
        """Uniform circular trajectory covering ``n_rotations`` full turns."""
        n = int(round(n_rotations * projections_per_rotation))
        i = np.arange(n)
        angles = start_angle + 2.0 * math.pi * i / projections_per_rotation
        times = start_time + i / projections_per_rotation
        return cls(beam, det_rows, det_cols, pixel_pitch, angles, times,
                   projections_per_rotation, origin_to_detector, source_to_origin)

    @property
    def n_views(self):
        return self.angles.size

    @property
    def t_start(self):
        return float(self.times[0])

    @property
    def t_end(self):
        return float(self.times[-1])

    @property
    def time_span(self):
        return self.t_end - self.t_start

    def subset(self, view_indices):
        """Geometry restricted to the given views (same detector and beam)."""
        idx = np.asarray(view_indices, dtype=np.intp)
        return AcquisitionGeometry(
            self.beam, self.det_rows, self.det_cols, self.pixel_pitch,
            self.angles[idx], self.times[idx], self.projections_per_rotation,
            self.origin_to_detector, self.source_to_origin, self.rotation_period,
        )

    def __eq__(self, other):
        if not isinstance(other, AcquisitionGeometry):
            return NotImplemented
        return (
            self.beam == other.beam
            and self.det_rows == other.det_rows
            and self.det_cols == other.det_cols
            and self.pixel_pitch == other.pixel_pitch
            and self.projections_per_rotation == other.projections_per_rotation
            and self.origin_to_detector == other.origin_to_detector
            and self.source_to_origin == other.source_to_origin
            and self.rotation_period == other.rotation_period
            and np.array_equal(self.angles, other.angles)
            and np.array_equal(self.times, other.times)
        )


@dataclass
class ProjectionSet:
    """Stack of optical-depth images, one per view of the geometry."""

    geometry: AcquisitionGeometry
    data: np.ndarray               # (n_views, det_rows, det_cols)

    def __post_init__(self):
        self.data = np.ascontiguousarray(self.data, dtype=np.float64)
        expected = (self.geometry.n_views, self.geometry.det_rows, self.geometry.det_cols)
        if self.data.shape != expected:
            raise ValueError(f"projection data shape {self.data.shape}, expected {expected}")
        if not np.all(np.isfinite(self.data)):
            raise ValueError("projection values must be finite")

    def subset(self, view_indices):
        idx = np.asarray(view_indices, dtype=np.intp)
        return ProjectionSet(self.geometry.subset(idx), self.data[idx])


@dataclass
class ReconParams:
    """Relaxation factors, subset plan and sampling options for reconstruction."""

    lambda_t: float = 0.5
    lambda_0: float = 0.3
    lambda_1: float = 0.3
    lambda_delta: float = 1.0
    lambda_mu: float = 1.0
    epsilon: float = 1e-4          # 1/cm, guards the delta-mu division
    n_iterations: int = 10
    n_subsets: int = 4
    rng_seed: int = 0
    use_weights: bool = True
    weight_floor: float = 0.05
    ray_step: float = 0.5          # fraction of the voxel size

    def __post_init__(self):
        for name in ("lambda_t", "lambda_0", "lambda_1"):
            v = getattr(self, name)
            if not 0.0 < v <= 1.0:
                raise ValueError(f"{name} must lie in (0, 1]")
        if self.epsilon <= 0:
            raise ValueError("epsilon must be > 0")
        if not 0.0 < self.ray_step <= 1.0:
            raise ValueError("ray_step must lie in (0, 1]")
        if self.n_iterations < 1 or self.n_subsets < 1:
            raise ValueError("iteration and subset counts must be positive")
        if self.weight_floor < 0:
            raise ValueError("weight_floor must be >= 0")


@dataclass
class WeightVolume:
    """Per-voxel backprojection weights, rescaled to mean 1."""

    values: ScalarField3
