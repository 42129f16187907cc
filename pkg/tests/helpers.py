"""Shared builders for the test suite."""

import numpy as np

from eventct import AcquisitionGeometry, EventVolume, ScalarField3, VoxelGrid3


def parallel_geometry(n_rotations=3, views_per_rotation=40, det_rows=16,
                      det_cols=24, pixel_pitch=2.0, **kwargs):
    return AcquisitionGeometry.circular(
        "parallel", det_rows=det_rows, det_cols=det_cols, pixel_pitch=pixel_pitch,
        n_rotations=n_rotations, projections_per_rotation=views_per_rotation,
        **kwargs)


def cylinder_field(grid, radius, mu=1.0):
    """Solid z-cylinder with a one-voxel linear edge ramp (anti-aliased)."""
    x, y, _ = grid.voxel_centers()
    rad = np.sqrt(x[:, None] ** 2 + y[None, :] ** 2)
    prof = np.clip((radius - rad) / grid.voxel_size + 0.5, 0.0, 1.0) * mu
    return ScalarField3(grid, np.repeat(prof[:, :, None], grid.nz, axis=2))


def static_event_volume(field, t_sentinel=100.0):
    """EventVolume that never changes: mu0 = mu1, transition far in the future."""
    return EventVolume(field.copy(), field.copy(),
                       ScalarField3.full(field.grid, t_sentinel))


def gaussian_field(grid, sigma=None, mu=1.0):
    """Smooth centered blob, used where interpolation error must stay small."""
    x, y, z = grid.voxel_centers()
    if sigma is None:
        sigma = 0.25 * (grid.bbox_hi[0] - grid.bbox_lo[0])
    r2 = (x[:, None, None] ** 2 + y[None, :, None] ** 2 + z[None, None, :] ** 2)
    return ScalarField3(grid, mu * np.exp(-r2 / (2.0 * sigma ** 2)))


def single_event_volume(grid, radius=6.0, mu_before=0.2, mu_after=0.8,
                        t_event=1.4, center=(0.0, 0.0, 0.0)):
    """One dynamic sphere in vacuum; everything else static at zero."""
    x, y, z = grid.voxel_centers()
    m = ((x[:, None, None] - center[0]) ** 2 + (y[None, :, None] - center[1]) ** 2
         + (z[None, None, :] - center[2]) ** 2) <= radius ** 2
    mu0 = np.where(m, mu_before, 0.0)
    mu1 = np.where(m, mu_after, 0.0)
    tstar = np.where(m, t_event, t_event + 100.0)
    return EventVolume.from_arrays(grid, mu0, mu1, tstar)
