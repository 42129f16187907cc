"""Ground-truth dynamic phantoms: static matrix plus pore regions with fronts.

A phantom is an EventVolume.  Matrix voxels are static (mu0 = mu1) with the
sentinel transition time t_end + 10, far outside any scan.  Pore voxels carry
the fluid attenuation pair and a transition time prescribed geometrically by
a planar or radial front: t*(x) = start + distance(x) / speed, clamped to the
dynamic window.  Fronts are monotone along their direction and |grad t*| =
1/speed away from the clamp.

Phantoms may be generated on a refined grid and box-averaged down to the
reconstruction grid, so reconstruction never inverts the exact discrete model
that produced the data.
"""

from dataclasses import dataclass, field

import numpy as np

from .core import EventVolume, ScalarField3, VoxelGrid3

SENTINEL_OFFSET = 10.0

_SHAPES = ("sphere", "channel", "blob-union")
_FRONTS = ("planar", "radial")


@dataclass
class PoreRegion:
    """One dynamic region: a shape plus the front sweeping through it.

    centers/radii describe the shape: one center for a sphere, two endpoints
    for a channel (cylinder), any number of spheres for a blob-union.
    """

    shape: str
    centers: np.ndarray
    radii: np.ndarray
    front: str = "planar"
    front_direction: tuple = (1.0, 0.0, 0.0)
    front_speed: float = 10.0      # mm per rotation period
    front_start_time: float = 0.0  # rotation periods

    def __post_init__(self):
        if self.shape not in _SHAPES:
            raise ValueError(f"unknown region shape {self.shape!r}")
        if self.front not in _FRONTS:
            raise ValueError(f"unknown front type {self.front!r}")
        self.centers = np.atleast_2d(np.asarray(self.centers, dtype=np.float64))
        self.radii = np.atleast_1d(np.asarray(self.radii, dtype=np.float64))
        if self.shape == "sphere" and len(self.centers) != 1:
            raise ValueError("sphere takes exactly one center")
        if self.shape == "channel" and (len(self.centers) != 2 or len(self.radii) != 1):
            raise ValueError("channel takes two endpoints and one radius")
        if self.shape == "blob-union" and len(self.radii) != len(self.centers):
            raise ValueError("blob-union needs one radius per center")
        if np.any(self.radii <= 0):
            raise ValueError("radii must be positive")
        if self.front_speed <= 0:
            raise ValueError("front_speed must be positive")
        d = np.asarray(self.front_direction, dtype=np.float64)
        n = np.linalg.norm(d)
        if n == 0:
            raise ValueError("front_direction must be nonzero")
        self.front_direction = d / n

    def bounds(self):
        """Axis-aligned min/max corners of the region."""
        if self.shape == "channel":
            r = self.radii[0]
            lo = self.centers.min(axis=0) - r
            hi = self.centers.max(axis=0) + r
        else:
            lo = (self.centers - self.radii[:, None]).min(axis=0)
            hi = (self.centers + self.radii[:, None]).max(axis=0)
        return lo, hi

    def mask(self, grid: VoxelGrid3) -> np.ndarray:
        """Boolean occupancy over voxel centers."""
        ax, ay, az = grid.voxel_centers()
        X = ax[:, None, None]
        Y = ay[None, :, None]
        Z = az[None, None, :]
        if self.shape == "channel":
            p0, p1 = self.centers
            axis = p1 - p0
            length = np.linalg.norm(axis)
            axis = axis / length
            dx = X - p0[0]
            dy = Y - p0[1]
            dz = Z - p0[2]
            s = dx * axis[0] + dy * axis[1] + dz * axis[2]
            rad2 = (dx - s * axis[0]) ** 2 + (dy - s * axis[1]) ** 2 + (dz - s * axis[2]) ** 2
            return (s >= 0) & (s <= length) & (rad2 <= self.radii[0] ** 2)
        m = np.zeros(grid.shape, dtype=bool)
        for c, r in zip(self.centers, self.radii):
            m |= (X - c[0]) ** 2 + (Y - c[1]) ** 2 + (Z - c[2]) ** 2 <= r * r
        return m

    def transition_times(self, grid: VoxelGrid3, mask: np.ndarray) -> np.ndarray:
        """Front arrival times on the masked voxels (1D, mask order).

        The planar front anchors at the region's entry: the masked point with
        the smallest coordinate along front_direction gets t = start_time.
        """
        ax, ay, az = grid.voxel_centers()
        ii, jj, kk = np.nonzero(mask)
        x = ax[ii]
        y = ay[jj]
        z = az[kk]
        if self.front == "planar":
            d = self.front_direction
            proj = x * d[0] + y * d[1] + z * d[2]
            dist = proj - proj.min()
        else:
            c = self.centers[0]
            dist = np.sqrt((x - c[0]) ** 2 + (y - c[1]) ** 2 + (z - c[2]) ** 2)
        return self.front_start_time + dist / self.front_speed


@dataclass
class FlowSpec:
    """Fluid-displacement phantom: matrix plus pore regions filling over time."""

    grid: VoxelGrid3
    matrix_mu: float               # 1/cm
    fluid0_mu: float               # 1/cm, initial phase
    fluid1_mu: float               # 1/cm, final phase
    pore_regions: list = field(default_factory=list)
    dynamic_window: tuple = (0.0, 1.0)
    rng_seed: int = 0

    def __post_init__(self):
        if min(self.matrix_mu, self.fluid0_mu, self.fluid1_mu) < 0:
            raise ValueError("attenuations must be >= 0")
        t0, t1 = self.dynamic_window
        if not t0 < t1:
            raise ValueError("dynamic_window must have t_begin < t_end")
        lo = np.asarray(self.grid.bbox_lo)
        hi = np.asarray(self.grid.bbox_hi)
        for region in self.pore_regions:
            rlo, rhi = region.bounds()
            if np.any(rlo < lo) or np.any(rhi > hi):
                raise ValueError("pore region extends outside the grid")


def build_flow_phantom(spec: FlowSpec) -> EventVolume:
    """Realize a FlowSpec as an EventVolume.

    Overlapping pore regions are rejected: each region prescribes its own
    front, so a shared voxel would receive conflicting transition times.
    """
    grid = spec.grid
    t_begin, t_end = spec.dynamic_window
    mu0 = np.full(grid.shape, spec.matrix_mu)
    mu1 = np.full(grid.shape, spec.matrix_mu)
    tstar = np.full(grid.shape, t_end + SENTINEL_OFFSET)
    occupied = np.zeros(grid.shape, dtype=bool)
    for region in spec.pore_regions:
        m = region.mask(grid)
        if np.any(m & occupied):
            raise ValueError("pore regions overlap with conflicting phases")
        occupied |= m
        mu0[m] = spec.fluid0_mu
        mu1[m] = spec.fluid1_mu
        tstar[m] = np.clip(region.transition_times(grid, m), t_begin, t_end)
    return EventVolume.from_arrays(grid, mu0, mu1, tstar)


@dataclass
class FilmRuptureParams:
    """Two tangent gas bubbles separated by a thin wall that ruptures."""

    matrix_mu: float = 0.5         # 1/cm, foam/slab phase
    gas_mu: float = 0.05           # 1/cm, bubble interior
    bubble_radius: float = 12.0    # mm
    wall_radius: float = 10.0      # mm, lateral extent of the film disc
    wall_thickness: float = 3.0    # mm, along the bubble axis
    center: tuple = (0.0, 0.0, 0.0)
    axis: tuple = (0.0, 0.0, 1.0)

    def __post_init__(self):
        if min(self.matrix_mu, self.gas_mu) < 0:
            raise ValueError("attenuations must be >= 0")
        a = np.asarray(self.axis, dtype=np.float64)
        n = np.linalg.norm(a)
        if n == 0:
            raise ValueError("axis must be nonzero")
        self.axis = a / n

    def wall_volume(self):
        """Analytic film volume (flat disc), mm^3."""
        return np.pi * self.wall_radius ** 2 * self.wall_thickness


def build_film_rupture_phantom(grid: VoxelGrid3, bubble_params: FilmRuptureParams,
                               rupture_time: float) -> EventVolume:
    """Film-rupture phantom: only the wall voxels are dynamic.

    The wall is a flat disc of the matrix phase between two tangent static
    bubbles; at rupture_time its attenuation drops to the gas value.
    """
    p = bubble_params
    if p.wall_thickness < grid.voxel_size:
        raise ValueError("wall thickness must be at least one voxel")
    ax, ay, az = grid.voxel_centers()
    X = ax[:, None, None] - p.center[0]
    Y = ay[None, :, None] - p.center[1]
    Z = az[None, None, :] - p.center[2]
    a = p.axis
    s = X * a[0] + Y * a[1] + Z * a[2]            # along-axis offset
    rad2 = X * X + Y * Y + Z * Z - s * s          # squared distance from axis
    wall = (np.abs(s) <= 0.5 * p.wall_thickness) & (rad2 <= p.wall_radius ** 2)
    gap = 0.5 * p.wall_thickness + p.bubble_radius
    bubbles = np.zeros(grid.shape, dtype=bool)
    for sign in (-1.0, 1.0):
        ds = s - sign * gap
        bubbles |= ds * ds + rad2 <= p.bubble_radius ** 2
    bubbles &= ~wall

    mu0 = np.full(grid.shape, p.matrix_mu)
    mu1 = np.full(grid.shape, p.matrix_mu)
    mu0[bubbles] = p.gas_mu
    mu1[bubbles] = p.gas_mu
    mu1[wall] = p.gas_mu           # mu0 stays at matrix_mu: the film vanishes
    tstar = np.full(grid.shape, rupture_time + SENTINEL_OFFSET)
    tstar[wall] = rupture_time
    return EventVolume.from_arrays(grid, mu0, mu1, tstar)


def refine_grid(grid: VoxelGrid3, factor: float) -> VoxelGrid3:
    """Finer grid covering exactly the same bounding box.

    Counts scale by ``factor`` (rounded); the refined voxel size must come
    out identical on all axes to stay isotropic.
    """
    if factor <= 0:
        raise ValueError("factor must be positive")
    counts = [int(round(n * factor)) for n in grid.shape]
    sizes = [grid.voxel_size * n / nf for n, nf in zip(grid.shape, counts)]
    if max(sizes) - min(sizes) > 1e-12 * grid.voxel_size:
        raise ValueError(f"factor {factor} breaks voxel isotropy for shape {grid.shape}")
    vf = sizes[0]
    origin = tuple(lo + 0.5 * vf for lo in grid.bbox_lo)
    return VoxelGrid3(counts[0], counts[1], counts[2], vf, origin)


def _overlap_matrix(n_coarse, n_fine, h_coarse, h_fine):
    """Row-stochastic 1D box-overlap weights of fine cells within coarse cells."""
    edges_c = np.arange(n_coarse + 1) * h_coarse
    edges_f = np.arange(n_fine + 1) * h_fine
    lo = np.maximum(edges_c[:-1, None], edges_f[None, :-1])
    hi = np.minimum(edges_c[1:, None], edges_f[None, 1:])
    w = np.clip(hi - lo, 0.0, None)
    return w / w.sum(axis=1, keepdims=True)


def _apply_overlap(wx, wy, wz, values):
    out = np.tensordot(wx, values, axes=(1, 0))
    out = np.tensordot(wy, out, axes=(1, 1)).transpose(1, 0, 2)
    return np.tensordot(wz, out, axes=(1, 2)).transpose(1, 2, 0)


def downsample_event_volume(fine: EventVolume, coarse_grid: VoxelGrid3) -> EventVolume:
    """Box-average a fine phantom onto a coarser grid sharing its bounding box.

    Attenuations average plainly.  Transition times average weighted by the
    fine |delta mu| so static (sentinel-time) voxels cannot contaminate the
    event time of a mixed block; fully static blocks keep the plain average.
    """
    fg = fine.grid
    if not np.allclose(fg.bbox_lo, coarse_grid.bbox_lo, atol=1e-9) or \
       not np.allclose(fg.bbox_hi, coarse_grid.bbox_hi, atol=1e-9):
        raise ValueError("grids must cover the same bounding box")
    wx = _overlap_matrix(coarse_grid.nx, fg.nx, coarse_grid.voxel_size, fg.voxel_size)
    wy = _overlap_matrix(coarse_grid.ny, fg.ny, coarse_grid.voxel_size, fg.voxel_size)
    wz = _overlap_matrix(coarse_grid.nz, fg.nz, coarse_grid.voxel_size, fg.voxel_size)
    mu0 = _apply_overlap(wx, wy, wz, fine.mu0.values)
    mu1 = _apply_overlap(wx, wy, wz, fine.mu1.values)
    contrast = np.abs(fine.delta_mu())
    w_sum = _apply_overlap(wx, wy, wz, contrast)
    ts_weighted = _apply_overlap(wx, wy, wz, contrast * fine.tstar.values)
    ts_plain = _apply_overlap(wx, wy, wz, fine.tstar.values)
    dynamic = w_sum > 1e-12
    tstar = np.where(dynamic, ts_weighted / np.where(dynamic, w_sum, 1.0), ts_plain)
    return EventVolume.from_arrays(coarse_grid, np.maximum(mu0, 0.0),
                                   np.maximum(mu1, 0.0), tstar)
