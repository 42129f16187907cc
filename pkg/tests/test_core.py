"""Data model: grids, fields, event volumes, geometry, parameter validation."""

import numpy as np
import pytest

from eventct import (AcquisitionGeometry, EventVolume, ProjectionSet,
                     ReconParams, ScalarField3, VoxelGrid3, index_to_world,
                     sample_event_volume, world_to_index)

from helpers import parallel_geometry


# ---------------------------------------------------------------------------
# grids and coordinate maps

def test_world_index_identity_and_scaling():
    g = VoxelGrid3(4, 4, 4, 1.0, origin=(0.0, 0.0, 0.0))
    assert np.array_equal(world_to_index(g, (0.0, 0.0, 0.0)), [0.0, 0.0, 0.0])
    g2 = VoxelGrid3(4, 4, 4, 2.0, origin=(0.0, 0.0, 0.0))
    assert np.array_equal(world_to_index(g2, (4.0, 2.0, 0.0)), [2.0, 1.0, 0.0])


def test_world_index_round_trip():
    rng = np.random.default_rng(3)
    g = VoxelGrid3(12, 7, 9, 0.75, origin=(-4.0, 1.5, -3.25))
    for _ in range(200):
        x = rng.uniform(-30.0, 30.0, 3)
        back = index_to_world(g, world_to_index(g, x))
        assert np.all(np.abs(back - x) <= 1e-12 * np.maximum(1.0, np.abs(x)))


def test_centered_grid_is_symmetric():
    g = VoxelGrid3.centered(8, 8, 8, 1.5)
    lo = np.asarray(g.bbox_lo)
    hi = np.asarray(g.bbox_hi)
    assert np.allclose(lo, -hi)
    assert np.allclose(hi - lo, 8 * 1.5)
    x, y, z = g.voxel_centers()
    assert np.allclose(x, -x[::-1])
    assert np.allclose(np.diff(x), 1.5)


def test_grid_validation():
    with pytest.raises(ValueError):
        VoxelGrid3(0, 4, 4, 1.0)
    with pytest.raises(ValueError):
        VoxelGrid3(4, 4, 4, 0.0)
    with pytest.raises(ValueError):
        VoxelGrid3(4, 4, 4, 1.0, origin=(0.0, 0.0))


# ---------------------------------------------------------------------------
# fields and event volumes

def test_field_shape_and_finiteness_checks():
    g = VoxelGrid3.centered(4, 4, 4, 1.0)
    with pytest.raises(ValueError):
        ScalarField3(g, np.zeros((4, 4, 3)))
    bad = np.zeros((4, 4, 4))
    bad[1, 2, 3] = np.nan
    with pytest.raises(ValueError):
        ScalarField3(g, bad)
    f = ScalarField3.full(g, 2.5)
    c = f.copy()
    c.values[0, 0, 0] = -1.0
    assert f.values[0, 0, 0] == 2.5


def test_event_volume_checks():
    g = VoxelGrid3.centered(4, 4, 4, 1.0)
    other = VoxelGrid3.centered(5, 5, 5, 1.0)
    with pytest.raises(ValueError):
        EventVolume(ScalarField3.full(g), ScalarField3.full(other),
                    ScalarField3.full(g))
    with pytest.raises(ValueError):
        EventVolume.from_arrays(g, np.full(g.shape, -0.1), np.zeros(g.shape),
                                np.zeros(g.shape))
    vol = EventVolume.from_arrays(g, np.full(g.shape, 0.2),
                                  np.full(g.shape, 0.7), np.full(g.shape, 1.5))
    assert np.allclose(vol.delta_mu(), 0.5)
    cp = vol.copy()
    cp.tstar.values[:] = 0.0
    assert vol.tstar.values[0, 0, 0] == 1.5


# ---------------------------------------------------------------------------
# event-model sampling

def _uniform_volume(mu0, mu1, tstar, n=4):
    g = VoxelGrid3.centered(n, n, n, 1.0)
    return EventVolume.from_arrays(g, np.full(g.shape, mu0),
                                   np.full(g.shape, mu1), np.full(g.shape, tstar))


def test_step_model_worked_values():
    # attenuation 0.6 -> 0.9 with the switch at time 768 (projection-index units)
    vol = _uniform_volume(0.6, 0.9, 768.0)
    assert sample_event_volume(vol, (0.0, 0.0, 0.0), 400.0) == 0.6
    assert sample_event_volume(vol, (0.0, 0.0, 0.0), 1200.0) == 0.9
    # half-open convention: value at exactly t* is the final phase
    assert sample_event_volume(vol, (0.0, 0.0, 0.0), 768.0) == 0.9


def test_degenerate_step_is_time_independent():
    vol = _uniform_volume(0.45, 0.45, 1.0)
    values = [sample_event_volume(vol, (0.2, -0.3, 0.1), t)
              for t in (-5.0, 0.0, 1.0, 7.5)]
    assert values[0] == values[1] == values[2] == values[3]
    assert abs(values[0] - 0.45) < 1e-12


def test_outside_grid_is_vacuum():
    vol = _uniform_volume(0.6, 0.9, 1.0)
    hi = vol.grid.bbox_hi
    assert sample_event_volume(vol, (hi[0] + 0.5, 0.0, 0.0), 0.5) == 0.0
    assert sample_event_volume(vol, (0.0, 0.0, -100.0), 2.0) == 0.0


def test_sampling_is_exact_at_voxel_centers():
    rng = np.random.default_rng(5)
    g = VoxelGrid3.centered(5, 5, 5, 2.0)
    mu0 = rng.uniform(0.1, 1.0, g.shape)
    vol = EventVolume.from_arrays(g, mu0, mu0 + 0.1, np.full(g.shape, 9.0))
    x, y, z = g.voxel_centers()
    for i, j, k in ((0, 0, 0), (2, 3, 1), (4, 4, 4)):
        got = sample_event_volume(vol, (x[i], y[j], z[k]), 0.0)
        assert abs(got - mu0[i, j, k]) < 1e-12


def test_sampling_blends_linearly_between_centers():
    g = VoxelGrid3.centered(4, 4, 4, 1.0)
    mu0 = np.zeros(g.shape)
    mu0[1, 1, 1] = 0.4
    mu0[2, 1, 1] = 0.8
    vol = EventVolume.from_arrays(g, mu0, mu0, np.full(g.shape, 9.0))
    x, y, z = g.voxel_centers()
    mid = ((x[1] + x[2]) / 2.0, y[1], z[1])
    assert abs(sample_event_volume(vol, mid, 0.0) - 0.6) < 1e-12


def test_parameters_interpolate_before_the_step():
    # neighbors switch at t*=0 and t*=2; halfway between them the blended
    # switch time is 1, so at t=1 the value must already be the final phase
    g = VoxelGrid3.centered(4, 4, 4, 1.0)
    mu0 = np.full(g.shape, 0.2)
    mu1 = np.full(g.shape, 0.8)
    ts = np.full(g.shape, 50.0)
    ts[1, 1, 1] = 0.0
    ts[2, 1, 1] = 2.0
    vol = EventVolume.from_arrays(g, mu0, mu1, ts)
    x, y, z = g.voxel_centers()
    mid = ((x[1] + x[2]) / 2.0, y[1], z[1])
    assert sample_event_volume(vol, mid, 1.0) == 0.8
    assert sample_event_volume(vol, mid, 0.999) == 0.2


def test_time_profile_is_a_single_step():
    rng = np.random.default_rng(9)
    g = VoxelGrid3.centered(6, 6, 6, 1.0)
    vol = EventVolume.from_arrays(
        g, rng.uniform(0.0, 1.0, g.shape), rng.uniform(0.0, 1.0, g.shape),
        rng.uniform(0.0, 3.0, g.shape))
    for _ in range(20):
        x = rng.uniform(-2.0, 2.0, 3)
        values = [sample_event_volume(vol, x, t) for t in np.linspace(-1.0, 4.0, 101)]
        jumps = np.nonzero(np.diff(values))[0]
        assert len(jumps) <= 1


def test_pre_scan_transition_means_static_over_scan():
    vol = _uniform_volume(0.3, 0.9, -2.0)
    v = [sample_event_volume(vol, (0.1, 0.2, 0.3), t) for t in (0.0, 1.0, 2.9)]
    assert v[0] == v[1] == v[2]
    assert abs(v[0] - 0.9) < 1e-12


# ---------------------------------------------------------------------------
# acquisition geometry

def test_circular_scan_arithmetic():
    geom = parallel_geometry(n_rotations=3, views_per_rotation=40)
    assert geom.n_views == 120
    assert geom.t_start == 0.0
    assert np.isclose(geom.t_end, 3.0 - 1.0 / 40.0)
    assert np.allclose(geom.angles, 2.0 * np.pi * np.arange(120) / 40.0)
    assert np.allclose(geom.times, np.arange(120) / 40.0)
    assert np.isclose(geom.time_span, geom.t_end - geom.t_start)


def test_geometry_subset_keeps_trajectory_valid():
    geom = parallel_geometry(n_rotations=3, views_per_rotation=40)
    idx = np.array([0, 3, 7, 50, 90, 119])
    sub = geom.subset(idx)
    assert sub.n_views == 6
    assert np.array_equal(sub.times, geom.times[idx])
    assert sub.projections_per_rotation == 40
    assert sub == geom.subset(idx)
    assert sub != geom


def test_geometry_validation():
    with pytest.raises(ValueError):
        parallel_geometry(views_per_rotation=0)
    with pytest.raises(ValueError):
        AcquisitionGeometry.circular("fan", 4, 4, 1.0, 3, 8)
    with pytest.raises(ValueError):
        AcquisitionGeometry.circular("cone", 4, 4, 1.0, 3, 8)  # needs source dist
    # times must strictly increase
    with pytest.raises(ValueError):
        AcquisitionGeometry("parallel", 4, 4, 1.0,
                            np.array([0.0, 0.1, 0.2]), np.array([0.0, 0.0, 0.1]), 8)
    # angle/time relation must stay on the circular trajectory
    angles = 2.0 * np.pi * np.arange(24) / 8.0
    times = np.arange(24) / 8.0
    broken = angles.copy()
    broken[11] += 0.05
    with pytest.raises(ValueError):
        AcquisitionGeometry("parallel", 4, 4, 1.0, broken, times, 8)
    AcquisitionGeometry("parallel", 4, 4, 1.0, angles, times, 8)  # and intact is fine


def test_cone_geometry_accepts_source_distance():
    geom = AcquisitionGeometry.circular("cone", 8, 8, 1.0, 3, 12,
                                        source_to_origin=80.0)
    assert geom.beam == "cone"
    assert geom.source_to_origin == 80.0


# ---------------------------------------------------------------------------
# projection containers and parameters

def test_projection_set_checks():
    geom = parallel_geometry(n_rotations=1, views_per_rotation=8,
                             det_rows=4, det_cols=6)
    with pytest.raises(ValueError):
        ProjectionSet(geom, np.zeros((8, 4, 5)))
    bad = np.zeros((8, 4, 6))
    bad[0, 0, 0] = np.inf
    with pytest.raises(ValueError):
        ProjectionSet(geom, bad)
    pset = ProjectionSet(geom, np.arange(8 * 4 * 6, dtype=float).reshape(8, 4, 6))
    sub = pset.subset([2, 5])
    assert sub.data.shape == (2, 4, 6)
    assert np.array_equal(sub.data[0], pset.data[2])


def test_recon_params_validation():
    ReconParams()  # defaults are legal
    with pytest.raises(ValueError):
        ReconParams(lambda_t=0.0)
    with pytest.raises(ValueError):
        ReconParams(lambda_0=1.5)
    with pytest.raises(ValueError):
        ReconParams(epsilon=0.0)
    with pytest.raises(ValueError):
        ReconParams(ray_step=0.0)
    with pytest.raises(ValueError):
        ReconParams(ray_step=1.5)
    with pytest.raises(ValueError):
        ReconParams(n_iterations=0)
    with pytest.raises(ValueError):
        ReconParams(weight_floor=-0.1)
