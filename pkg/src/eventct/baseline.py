"""Frame-based reference reconstructions: static SIRT and sliding windows.

SIRT iterates mu += relax * mean of length-normalized corrections with a
nonnegativity clamp; the sliding-window variant runs one such reconstruction
per window placement, giving a coarse time series to compare event
reconstructions against.
"""

import numpy as np

from . import _kernels
from .core import ProjectionSet, ScalarField3, VoxelGrid3
from .dyrect import correction_terms
from .projector import intersection_lengths, project_static


def reconstruct_sirt(measured: ProjectionSet, view_subset, grid: VoxelGrid3,
                     n_iterations=20, relax=0.5, ray_step=0.5,
                     residual_out=None) -> ScalarField3:
    """Static iterative reconstruction from the given views.

    ``residual_out``, if a list, collects the mean squared projection error
    of each iterate before its update.
    """
    view_subset = np.asarray(view_subset, dtype=np.int64)
    if view_subset.size == 0:
        raise ValueError("view_subset must be nonempty")
    sub = measured.subset(view_subset)
    geom = sub.geometry
    lengths = intersection_lengths(geom, grid)
    beam_cone = geom.beam == "cone"
    so = float(geom.source_to_origin) if beam_cone else 0.0
    od = float(geom.origin_to_detector)
    vol = ScalarField3.full(grid, 0.0)
    origin = np.asarray(grid.origin)
    for _ in range(n_iterations):
        est = project_static(vol, geom, ray_step)
        corr = correction_terms(sub, est, lengths)
        if residual_out is not None:
            residual_out.append(float(np.mean((sub.data - est.data) ** 2)))
        _kernels.sirt_update_kernel(
            vol.values, origin, grid.voxel_size, corr,
            np.cos(geom.angles), np.sin(geom.angles),
            beam_cone, so, od, geom.pixel_pitch, relax)
    return vol


def reconstruct_sliding_window(measured: ProjectionSet, window_views, stride_views,
                               grid: VoxelGrid3, n_iterations=3, relax=0.5,
                               ray_step=0.5, times_out=None):
    """One reconstruction per window placement over the view sequence.

    Returns the list of frames; ``times_out``, if a list, collects each
    window's center timestamp.
    """
    n = measured.geometry.n_views
    if not 0 < window_views <= n:
        raise ValueError("window_views must lie in [1, n_views]")
    if stride_views < 1:
        raise ValueError("stride_views must be positive")
    frames = []
    for start in range(0, n - window_views + 1, stride_views):
        views = np.arange(start, start + window_views)
        frames.append(reconstruct_sirt(measured, views, grid,
                                       n_iterations=n_iterations, relax=relax,
                                       ray_step=ray_step))
        if times_out is not None:
            t = measured.geometry.times
            times_out.append(0.5 * float(t[start] + t[start + window_views - 1]))
    return frames
