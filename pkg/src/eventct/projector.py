"""Time-resolved forward projection by ray tracing.

Each detector pixel value is the optical depth along a single center ray,
integrated with equidistant midpoint sampling (spacing ray_step * voxel_size,
split exactly over the chord so constant fields integrate exactly).  An
optional steady affine motion model maps reconstruction coordinates to
acquisition coordinates at each view time before sampling.
"""

from dataclasses import dataclass

import numpy as np
from scipy.linalg import expm, logm

from . import _kernels
from .core import EventVolume, ProjectionSet, ScalarField3, VoxelGrid3


@dataclass
class Ray:
    """One detector-pixel ray; entry/exit are path parameters in mm.

    A miss is encoded as exit < entry.
    """

    origin: np.ndarray
    direction: np.ndarray
    entry: float
    exit: float

    @property
    def length(self):
        return max(self.exit - self.entry, 0.0)


def _geom_scalars(geometry):
    beam_cone = geometry.beam == "cone"
    so = float(geometry.source_to_origin) if beam_cone else 0.0
    return beam_cone, so, float(geometry.origin_to_detector)


def trace_ray(geometry, view_index, row, col, grid: VoxelGrid3) -> Ray:
    """Geometric ray through detector pixel (row, col) of one view.

    Entry/exit parameters come from slab intersection with the grid's
    bounding box.
    """
    beam_cone, so, od = _geom_scalars(geometry)
    a = float(geometry.angles[view_index])
    ox, oy, oz, dx, dy, dz = _kernels.pixel_ray(
        beam_cone, np.cos(a), np.sin(a), so, od,
        geometry.pixel_pitch, geometry.det_rows, geometry.det_cols,
        float(row), float(col))
    lo = grid.bbox_lo
    hi = grid.bbox_hi
    t0, t1 = _kernels.slab_entry_exit(ox, oy, oz, dx, dy, dz,
                                      lo[0], lo[1], lo[2], hi[0], hi[1], hi[2])
    return Ray(np.array([ox, oy, oz]), np.array([dx, dy, dz]), float(t0), float(t1))


class AffineMotionModel:
    """Steady affine motion: x -> A^((t - t_r)/(t1 - t0)) . x, homogeneous.

    The fractional power is exp(e * log A); A must be invertible with a real
    matrix logarithm (no negative real eigenvalues), checked at construction.
    """

    def __init__(self, A, t0, t1, t_r=0.0):
        A = np.asarray(A, dtype=np.float64)
        if A.shape != (4, 4):
            raise ValueError("A must be a 4x4 homogeneous matrix")
        if t1 <= t0:
            raise ValueError("t1 must exceed t0")
        if abs(np.linalg.det(A)) < 1e-12:
            raise ValueError("A must be invertible")
        log_A = logm(A)
        if np.max(np.abs(np.imag(log_A))) > 1e-8:
            raise ValueError("A has no real matrix logarithm")
        self.A = A
        self.t0 = float(t0)
        self.t1 = float(t1)
        self.t_r = float(t_r)
        self._log_A = np.real(log_A)

    def matrix_at(self, t):
        """Full 4x4 transform at time t."""
        e = (float(t) - self.t_r) / (self.t1 - self.t0)
        return np.real(expm(e * self._log_A))

    def matrices(self, times):
        """Stacked 3x4 (rotation|translation) rows, one per timestamp."""
        return np.ascontiguousarray(
            np.stack([self.matrix_at(t)[:3, :] for t in times]))


def apply_affine_motion(x, t, model: AffineMotionModel) -> np.ndarray:
    """Map a reconstruction-frame point to its acquisition-frame position at t."""
    m = model.matrix_at(t)
    xh = np.array([x[0], x[1], x[2], 1.0])
    return (m @ xh)[:3]


_NO_MOTION = np.zeros((1, 3, 4))


def _motion_mats(motion, times):
    if motion is None:
        return _NO_MOTION, False
    return motion.matrices(times), True


def forward_project(vol: EventVolume, geometry, ray_step=0.5, motion=None) -> ProjectionSet:
    """Project an event volume at every view's timestamp.

    Pixel values are dimensionless optical depths: (1/cm) line integrals with
    the mm path scale converted to cm.
    """
    g = vol.grid
    beam_cone, so, od = _geom_scalars(geometry)
    mats, use_motion = _motion_mats(motion, geometry.times)
    out = np.empty((geometry.n_views, geometry.det_rows, geometry.det_cols))
    _kernels.forward_event_kernel(
        vol.mu0.values, vol.mu1.values, vol.tstar.values,
        np.asarray(g.origin), g.voxel_size,
        out, np.cos(geometry.angles), np.sin(geometry.angles), geometry.times,
        beam_cone, so, od, geometry.pixel_pitch, ray_step * g.voxel_size,
        mats, use_motion)
    return ProjectionSet(geometry, out)


def project_static(field: ScalarField3, geometry, ray_step=0.5) -> ProjectionSet:
    """Project a time-independent attenuation field."""
    g = field.grid
    beam_cone, so, od = _geom_scalars(geometry)
    out = np.empty((geometry.n_views, geometry.det_rows, geometry.det_cols))
    _kernels.forward_static_kernel(
        field.values, np.asarray(g.origin), g.voxel_size,
        out, np.cos(geometry.angles), np.sin(geometry.angles),
        beam_cone, so, od, geometry.pixel_pitch, ray_step * g.voxel_size)
    return ProjectionSet(geometry, out)


def intersection_lengths(geometry, grid: VoxelGrid3) -> np.ndarray:
    """Per-pixel path length (cm) inside the grid's bounding box; 0 for misses."""
    beam_cone, so, od = _geom_scalars(geometry)
    out = np.empty((geometry.n_views, geometry.det_rows, geometry.det_cols))
    _kernels.chord_length_kernel(
        np.asarray(grid.origin), grid.voxel_size, grid.nx, grid.ny, grid.nz,
        out, np.cos(geometry.angles), np.sin(geometry.angles),
        beam_cone, so, od, geometry.pixel_pitch)
    return out


def normalize_exterior(measured: ProjectionSet, exterior: ScalarField3,
                       ray_step=0.5) -> ProjectionSet:
    """Subtract the projection of a known exterior object (e.g. a crucible)."""
    ext = project_static(exterior, measured.geometry, ray_step)
    return ProjectionSet(measured.geometry, measured.data - ext.data)
