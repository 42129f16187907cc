"""Frame-based baselines vs. per-voxel event times on a rupture scan.

The classical way to see dynamics in a continuous scan is to reconstruct
overlapping view windows independently (sliding-window SIRT): each frame is
sharp in space but averages everything inside its window, so the time
resolution is the window length.  The event estimator instead assigns every
voxel its own transition time and is limited by the view spacing, not the
window.  This script runs both on the same simulated film-rupture scan.

Run from the repository root:

    python3 demos/baseline_comparison.py
"""

import numpy as np

from eventct import (
    AcquisitionGeometry,
    EventVolume,
    FilmRuptureParams,
    ReconParams,
    ScalarField3,
    VoxelGrid3,
    build_film_rupture_phantom,
    forward_project,
    mae_transition,
    reconstruct_dyrect,
    reconstruct_sirt,
    reconstruct_sliding_window,
)

RUPTURE_TIME = 1.4
VIEWS_PER_ROTATION = 80
WINDOW = 40                     # views per frame, i.e. half a rotation


def main():
    grid = VoxelGrid3.centered(32, 32, 32, voxel_size=1.0)
    params = FilmRuptureParams(matrix_mu=0.5, gas_mu=0.05, bubble_radius=6.0,
                               wall_radius=5.0, wall_thickness=4.0)
    vol = build_film_rupture_phantom(grid, params, rupture_time=RUPTURE_TIME)
    wall = vol.delta_mu() != 0.0

    geom = AcquisitionGeometry.circular(
        "parallel", det_rows=32, det_cols=40, pixel_pitch=1.2,
        n_rotations=3, projections_per_rotation=VIEWS_PER_ROTATION)
    sino = forward_project(vol, geom, ray_step=0.5)

    # --- full-scan SIRT: one static volume, wall smeared in time ----------
    residuals = []
    static = reconstruct_sirt(sino, np.arange(geom.n_views), grid,
                              n_iterations=20, ray_step=1.0,
                              residual_out=residuals)
    print(f"full-scan SIRT : wall mean {static.values[wall].mean():.3f} 1/cm"
          f" -- between matrix ({params.matrix_mu}) and gas ({params.gas_mu}),"
          " a temporal smear, not a physical state;"
          f" residual {residuals[0]:.2e} -> {residuals[-1]:.2e}")

    # --- sliding window: six half-rotation frames -------------------------
    times = []
    frames = reconstruct_sliding_window(sino, WINDOW, WINDOW, grid,
                                        n_iterations=20, ray_step=1.0,
                                        times_out=times)
    print(f"sliding window : {len(frames)} frames of {WINDOW} views")
    print("  frame  center_t  wall_mean  bubble_mean")
    bubble = (vol.mu0.values < 0.2) & ~wall
    for i, (frame, t) in enumerate(zip(frames, times)):
        print(f"   {i}     {t:6.3f}    {frame.values[wall].mean():7.3f}"
              f"    {frame.values[bubble].mean():7.3f}")
    print("  -> the wall holds at matrix level, mixes in the frame straddling"
          " the rupture, then settles low; the frame spacing"
          f" ({WINDOW / VIEWS_PER_ROTATION:.2f} rot) caps the time resolution")

    # --- event estimator: one t* per wall voxel ---------------------------
    init = EventVolume(vol.mu0.copy(), vol.mu1.copy(),
                       ScalarField3.full(grid, 0.5 * (geom.t_start + geom.t_end)))
    rp = ReconParams(n_iterations=10, n_subsets=4, ray_step=1.0, rng_seed=0)
    result = reconstruct_dyrect(sino, rp, init, freeze_attenuations=True)
    t_wall = result.volume.tstar.values[wall]
    mae = mae_transition(vol, result.volume, mask_policy="contrast")
    print(f"event estimate : median wall t* {np.median(t_wall):.3f}"
          f" (truth {RUPTURE_TIME}), MAE {mae:.3f} rotations"
          " -- per-voxel times, no window to trade against")


if __name__ == "__main__":
    main()
