"""Iterative event reconstruction: ordered-subset correction/backprojection.

Each subset pass forward-projects the current event volume at the subset's
view times, forms intersection-length-normalized correction terms, and then
updates every voxel independently: covariances of (time, correction) over
one-rotation windows before and after the current transition time drive the
time update, and the cached correction samples re-split at the new time feed
relaxed attenuation updates.  Voxels write only their own three parameters,
so the per-subset update parallelizes without races.
"""

from dataclasses import dataclass

import numpy as np

from . import _kernels
from .core import (EventVolume, NumericsError, ProjectionSet, ReconParams,
                   ScalarField3, VoxelGrid3, WeightVolume)
from .projector import _motion_mats, forward_project, intersection_lengths
from .stats import streaming_covariance


@dataclass
class SubsetPlan:
    """Random view partition; each subset spans most of the scan duration."""

    subsets: list
    rng_seed: int


@dataclass
class VoxelCorrectionStats:
    """Windowed (time, correction) statistics for one voxel.

    sigma_* are population covariances in time * attenuation units; mean_*
    are mean corrections (1/cm).  Covariances are 0 for counts < 2.
    """

    sigma_minus: float
    sigma_plus: float
    mean_minus: float
    mean_plus: float
    n_minus: int
    n_plus: int


@dataclass
class DyrectResult:
    """Final event volume plus the per-iteration mean-squared residual trace."""

    volume: EventVolume
    residuals: np.ndarray
    plan: SubsetPlan = None


def make_subsets(geometry, n_subsets, rng_seed) -> SubsetPlan:
    """Partition views into temporally broad subsets of near-equal size.

    Views are dealt round-robin from a per-rotation shuffle, so every subset
    draws from every rotation and spans >= 80% of the scan; sizes differ by
    at most one.  Deterministic under the seed.
    """
    n = geometry.n_views
    if n_subsets > n:
        raise ValueError("more subsets than views")
    if n // n_subsets < 8:
        raise ValueError(f"{n_subsets} subsets of {n} views leaves fewer than 8 views each")
    times = geometry.times
    span = geometry.time_span
    period = geometry.rotation_period
    rotation = np.minimum(
        ((times - times[0]) / period).astype(np.int64),
        max(int(np.ceil(span / period)) - 1, 0))
    n_rotations = int(rotation.max()) + 1
    for attempt in range(100):
        rng = np.random.default_rng((rng_seed, attempt))
        groups = [[] for _ in range(n_subsets)]
        slot = 0
        for r in range(n_rotations):
            bucket = np.nonzero(rotation == r)[0]
            for view in rng.permutation(bucket):
                groups[slot % n_subsets].append(int(view))
                slot += 1
        subsets = [np.sort(np.array(g, dtype=np.int64)) for g in groups]
        if all(times[s[-1]] - times[s[0]] >= 0.8 * span for s in subsets):
            return SubsetPlan(subsets, rng_seed)
    raise ValueError("could not build subsets spanning 80% of the scan")


def correction_terms(measured: ProjectionSet, estimated: ProjectionSet, lengths) -> np.ndarray:
    """Per-pixel correction (P - P_est) / L, zero where the ray misses (L = 0)."""
    if measured.geometry != estimated.geometry:
        raise ValueError("measured and estimated geometries differ")
    diff = measured.data - estimated.data
    safe = np.where(lengths > 0, lengths, 1.0)
    return np.where(lengths > 0, diff / safe, 0.0)


def _window_center(t_prev, scan_t0, scan_t1, period):
    # shift inward near the scan ends so both windows keep full width
    return min(max(t_prev, scan_t0 + period), scan_t1 - period)


def voxel_stats(corrections, geometry, x, t_prev, scan_span=None) -> VoxelCorrectionStats:
    """Sample the correction stack at one voxel's detector tracks and reduce.

    The voxel position is projected into every view whose timestamp falls in
    the one-rotation windows below/above the (shifted) transition time; the
    correction image is sampled bilinearly and covariances of (t_j, C_j) are
    accumulated in a single streaming pass per window.
    """
    t0, t1 = scan_span if scan_span is not None else (geometry.t_start, geometry.t_end)
    period = geometry.rotation_period
    if t1 - t0 < 2 * period:
        raise ValueError("scan too short for one-rotation covariance windows")
    tc = _window_center(t_prev, t0, t1, period)
    assert tc - period >= t0 - 1e-9 and tc + period <= t1 + 1e-9
    beam_cone = geometry.beam == "cone"
    so = float(geometry.source_to_origin) if beam_cone else 0.0
    od = float(geometry.origin_to_detector)
    nr, nc = geometry.det_rows, geometry.det_cols
    t_m, c_m, t_p, c_p = [], [], [], []
    for j, tj in enumerate(geometry.times):
        if tj < tc - period or tj > tc + period:
            continue
        r, c = _kernels.project_point_to_detector(
            beam_cone, np.cos(geometry.angles[j]), np.sin(geometry.angles[j]),
            so, od, geometry.pixel_pitch, nr, nc,
            float(x[0]), float(x[1]), float(x[2]))
        if r < 0.0 or r > nr - 1.0 or c < 0.0 or c > nc - 1.0:
            continue
        val = _kernels.bilinear_image(corrections[j], r, c)
        if tj <= tc:
            t_m.append(tj)
            c_m.append(val)
        else:
            t_p.append(tj)
            c_p.append(val)
    n_m, _, mean_m, sig_m = streaming_covariance(np.array(t_m), np.array(c_m))
    n_p, _, mean_p, sig_p = streaming_covariance(np.array(t_p), np.array(c_p))
    return VoxelCorrectionStats(sig_m, sig_p, mean_m, mean_p, n_m, n_p)


def update_transition_time(stats: VoxelCorrectionStats, mu0, mu1, params: ReconParams,
                           t_prev, scan_span, rotation_period=1.0, weight=1.0) -> float:
    """Covariance-driven transition-time step.

    Unit check: (time * attenuation) * dimensionless / attenuation -> time.
    The raw step is clipped to half a rotation and the relaxed result is
    clamped to the scan span extended by one rotation on each side.
    """
    dmu = mu1 - mu0
    gain = min(params.lambda_delta * abs(dmu), params.lambda_mu)
    sign = 1.0 if dmu >= 0.0 else -1.0
    dt = (stats.sigma_plus - stats.sigma_minus) * gain / (dmu + sign * params.epsilon)
    half = 0.5 * rotation_period
    dt = min(max(dt, -half), half)
    lam = min(params.lambda_t * weight, 1.0)
    t_new = t_prev + lam * dt
    lo = scan_span[0] - rotation_period
    hi = scan_span[1] + rotation_period
    return min(max(t_new, lo), hi)


def update_attenuations(c_minus, c_plus, mu_minus, mu_plus, params: ReconParams,
                        mu0_prev, mu1_prev, weight=1.0):
    """Relaxed attenuation update from corrected samples on each side of t_new.

    Candidate value = mean of (model value + correction) over the side's
    samples; a side with no samples leaves its phase unchanged.  Results are
    clamped at zero.
    """
    c_minus = np.asarray(c_minus, dtype=np.float64)
    c_plus = np.asarray(c_plus, dtype=np.float64)
    mu0_new = mu0_prev
    mu1_new = mu1_prev
    if c_minus.size:
        cand = float(np.mean(np.asarray(mu_minus, dtype=np.float64) + c_minus))
        lam = min(params.lambda_0 * weight, 1.0)
        mu0_new = max(mu0_prev + lam * (cand - mu0_prev), 0.0)
    if c_plus.size:
        cand = float(np.mean(np.asarray(mu_plus, dtype=np.float64) + c_plus))
        lam = min(params.lambda_1 * weight, 1.0)
        mu1_new = max(mu1_prev + lam * (cand - mu1_prev), 0.0)
    return mu0_new, mu1_new


def compute_weights(vol: EventVolume, floor) -> WeightVolume:
    """Contrast-driven backprojection weights, rescaled to mean 1."""
    if floor < 0:
        raise ValueError("weight floor must be >= 0")
    w = floor + np.abs(vol.delta_mu())
    mean = w.mean()
    if mean > 0:
        w = w / mean
    else:
        w = np.ones_like(w)
    return WeightVolume(ScalarField3(vol.grid, w))


def initial_event_volume(grid: VoxelGrid3, geometry, mu=None) -> EventVolume:
    """Default reconstruction start: mid-scan transition, zero or given mu.

    ``mu`` may be a ScalarField3 (e.g. a SIRT volume) used for both phases.
    """
    if mu is None:
        mu = ScalarField3.full(grid, 0.0)
    mid = 0.5 * (geometry.t_start + geometry.t_end)
    return EventVolume(mu.copy(), mu.copy(), ScalarField3.full(grid, mid))


def reconstruct_dyrect(measured: ProjectionSet, params: ReconParams, init: EventVolume,
                       motion=None, freeze_attenuations=False, progress=None) -> DyrectResult:
    """Run the full ordered-subset event reconstruction.

    Per subset: forward-project, form corrections, update every voxel's
    (t*, mu0, mu1) — attenuations are skipped when freeze_attenuations is
    set (known start/end volumes).  The residual trace holds each
    iteration's mean squared projection error accumulated from the
    pre-update subset projections; with one subset this is exactly the mean
    squared error of the iterate.
    """
    geom = measured.geometry
    period = geom.rotation_period
    # "3 full rotations" counts acquisition coverage: the last view of the
    # third rotation sits at 3 - 1/ppr, so a strict time-span test would
    # reject exactly the intended minimum scan.
    if geom.n_views < 3 * geom.projections_per_rotation:
        raise ValueError("event reconstruction needs a scan of at least 3 rotations")
    grid = init.grid
    vol = init.copy()
    plan = make_subsets(geom, params.n_subsets, params.rng_seed)
    lengths = intersection_lengths(geom, grid)
    beam_cone = geom.beam == "cone"
    so = float(geom.source_to_origin) if beam_cone else 0.0
    od = float(geom.origin_to_detector)
    origin = np.asarray(grid.origin)
    n_pixels = geom.n_views * geom.det_rows * geom.det_cols
    ones = ScalarField3.full(grid, 1.0)
    residuals = np.empty(params.n_iterations)
    for it in range(params.n_iterations):
        sq_sum = 0.0
        for s_idx, views in enumerate(plan.subsets):
            sub_geom = geom.subset(views)
            est = forward_project(vol, sub_geom, params.ray_step, motion)
            sub_measured = ProjectionSet(sub_geom, measured.data[views])
            corr = correction_terms(sub_measured, est, lengths[views])
            sq_sum += float(np.sum((measured.data[views] - est.data) ** 2))
            if params.use_weights:
                weights = compute_weights(vol, params.weight_floor).values
            else:
                weights = ones
            mats, use_motion = _motion_mats(motion, sub_geom.times)
            _kernels.event_update_kernel(
                vol.mu0.values, vol.mu1.values, vol.tstar.values,
                origin, grid.voxel_size,
                corr, sub_geom.times,
                np.cos(sub_geom.angles), np.sin(sub_geom.angles),
                beam_cone, so, od, geom.pixel_pitch,
                mats, use_motion,
                weights.values, params.use_weights,
                params.lambda_t, params.lambda_0, params.lambda_1,
                params.lambda_delta, params.lambda_mu, params.epsilon,
                geom.t_start, geom.t_end, period,
                freeze_attenuations)
            if progress is not None:
                progress(it, s_idx, sq_sum / n_pixels)
        residuals[it] = sq_sum / n_pixels
        if not np.isfinite(residuals[it]):
            raise NumericsError(f"residual diverged at iteration {it}")
    return DyrectResult(vol, residuals, plan)
