"""Validation metrics for event reconstructions.

All transition-time metrics mask on the ground truth's contrast: dynamic
voxels are those with delta mu != 0 (never a test on t* magnitude, since
static voxels carry an arbitrary out-of-scan sentinel time), optionally
narrowed to |delta mu| >= half the maximum contrast.
"""

import csv
from dataclasses import dataclass

import numpy as np

from .core import EventVolume, ProjectionSet, ScalarField3

CONTRAST_FRACTION = 0.5


def _mask(gt: EventVolume, mask_policy):
    dmu = np.abs(gt.delta_mu())
    if mask_policy == "dynamic":
        m = dmu > 0
    elif mask_policy == "contrast":
        m = dmu >= CONTRAST_FRACTION * dmu.max()
        m &= dmu > 0
    else:
        raise ValueError(f"unknown mask policy {mask_policy!r}")
    if not m.any():
        raise ValueError("mask is empty: no dynamic voxels")
    return m


def mae_transition(gt: EventVolume, rec: EventVolume, mask_policy="dynamic") -> float:
    """Mean absolute transition-time error (rotation periods) over the mask."""
    if gt.grid != rec.grid:
        raise ValueError("volumes live on different grids")
    m = _mask(gt, mask_policy)
    return float(np.mean(np.abs(gt.tstar.values[m] - rec.tstar.values[m])))


@dataclass
class CooccurrenceHistogram:
    """2D voxel counts of (ground-truth, reconstructed) transition times."""

    bins_gt: np.ndarray
    bins_rec: np.ndarray
    counts: np.ndarray

    def diagonal_fraction(self, band=1):
        """Mass within +-band bins of the diagonal."""
        i, j = np.indices(self.counts.shape)
        return float(self.counts[np.abs(i - j) <= band].sum() / self.counts.sum())


def cooccurrence_hist(gt: EventVolume, rec: EventVolume, n_bins=20,
                      mask_policy="dynamic") -> CooccurrenceHistogram:
    """Joint histogram of true vs. reconstructed t* over the dynamic window.

    Reconstructed times are clipped into the window so every masked voxel is
    counted.
    """
    if n_bins < 2:
        raise ValueError("n_bins must be >= 2")
    m = _mask(gt, mask_policy)
    tg = gt.tstar.values[m]
    tr = rec.tstar.values[m]
    lo = float(tg.min())
    hi = float(tg.max())
    if hi - lo < 1e-9:
        lo -= 0.5
        hi += 0.5
    edges = np.linspace(lo, hi, n_bins + 1)
    counts, _, _ = np.histogram2d(np.clip(tg, lo, hi), np.clip(tr, lo, hi),
                                  bins=(edges, edges))
    return CooccurrenceHistogram(edges, edges.copy(), counts.astype(np.int64))


@dataclass
class AngularBreakdown:
    """Per-category transition-time MAE split by front-vs-beam angle.

    Categories by the angle between the local flow direction (grad t* of the
    ground truth) and the instantaneous beam axis at the view nearest t*:
    parallel [0, 20] + [160, 180] degrees, orthogonal [80, 100], mid else.
    ``excluded`` counts masked voxels without a usable gradient.
    """

    mae: dict
    counts: dict
    excluded: int

    def rows(self):
        return [(name, self.counts[name], self.mae[name])
                for name in ("parallel", "mid", "orthogonal")]


def _category(angle_deg):
    if angle_deg <= 20.0 or angle_deg >= 160.0:
        return "parallel"
    if 80.0 <= angle_deg <= 100.0:
        return "orthogonal"
    return "mid"


def angular_breakdown(gt: EventVolume, rec: EventVolume, geometry,
                      mask_policy="dynamic") -> AngularBreakdown:
    """Split the t* error by the flow-front angle to the beam at event time.

    The gradient is taken by central differences and only voxels whose full
    6-neighbor stencil stays inside the mask are used, so sentinel times in
    static neighbors cannot corrupt the direction.
    """
    if gt.grid != rec.grid:
        raise ValueError("volumes live on different grids")
    m = _mask(gt, mask_policy)
    ts = gt.tstar.values
    h = gt.grid.voxel_size
    interior = np.zeros_like(m)
    interior[1:-1, 1:-1, 1:-1] = (
        m[1:-1, 1:-1, 1:-1]
        & m[2:, 1:-1, 1:-1] & m[:-2, 1:-1, 1:-1]
        & m[1:-1, 2:, 1:-1] & m[1:-1, :-2, 1:-1]
        & m[1:-1, 1:-1, 2:] & m[1:-1, 1:-1, :-2])
    gx = np.zeros_like(ts)
    gy = np.zeros_like(ts)
    gz = np.zeros_like(ts)
    gx[1:-1, :, :] = (ts[2:, :, :] - ts[:-2, :, :]) / (2 * h)
    gy[:, 1:-1, :] = (ts[:, 2:, :] - ts[:, :-2, :]) / (2 * h)
    gz[:, :, 1:-1] = (ts[:, :, 2:] - ts[:, :, :-2]) / (2 * h)

    beam_cone = geometry.beam == "cone"
    err = np.abs(ts - rec.tstar.values)
    ii, jj, kk = np.nonzero(interior)
    axc, ayc, azc = gt.grid.voxel_centers()
    sums = {"parallel": 0.0, "mid": 0.0, "orthogonal": 0.0}
    counts = {"parallel": 0, "mid": 0, "orthogonal": 0}
    excluded = int(m.sum() - interior.sum())
    for i, j, k in zip(ii, jj, kk):
        g = np.array([gx[i, j, k], gy[i, j, k], gz[i, j, k]])
        norm = np.linalg.norm(g)
        if norm == 0.0:
            excluded += 1
            continue
        g /= norm
        view = int(np.argmin(np.abs(geometry.times - ts[i, j, k])))
        a = geometry.angles[view]
        if beam_cone:
            src = np.array([-geometry.source_to_origin * np.cos(a),
                            -geometry.source_to_origin * np.sin(a), 0.0])
            d = np.array([axc[i], ayc[j], azc[k]]) - src
            d /= np.linalg.norm(d)
        else:
            d = np.array([np.cos(a), np.sin(a), 0.0])
        angle = np.degrees(np.arccos(np.clip(np.dot(g, d), -1.0, 1.0)))
        cat = _category(angle)
        sums[cat] += err[i, j, k]
        counts[cat] += 1
    mae = {name: (sums[name] / counts[name] if counts[name] else 0.0)
           for name in sums}
    return AngularBreakdown(mae, counts, excluded)


def difference_sinogram(measured: ProjectionSet) -> ProjectionSet:
    """Each view minus the same view of the previous rotation; first rotation 0."""
    k = measured.geometry.projections_per_rotation
    if measured.geometry.n_views <= k:
        raise ValueError("difference sinogram needs at least 2 rotations")
    out = np.zeros_like(measured.data)
    out[k:] = measured.data[k:] - measured.data[:-k]
    return ProjectionSet(measured.geometry, out)


def estimate_event_time(diff: ProjectionSet, threshold_fraction=0.1) -> float:
    """Timestamp of the earliest view whose difference signal crosses threshold.

    The threshold is a fraction of the global peak difference amplitude; for
    a sharp event this lands within about one view spacing of the true time.
    """
    amp = np.max(np.abs(diff.data), axis=(1, 2))
    peak = amp.max()
    if peak <= 0:
        raise ValueError("no dynamic signal in the difference sinogram")
    crossing = np.nonzero(amp >= threshold_fraction * peak)[0]
    return float(diff.geometry.times[crossing[0]])


def flow_direction(tstar: ScalarField3, mask):
    """Unit gradient field of t* on the mask.

    Returns (directions, valid): directions is (nx, ny, nz, 3) with zeros
    off-mask; valid marks masked voxels with a nonzero gradient.
    """
    mask = np.asarray(mask, dtype=bool)
    if not mask.any():
        raise ValueError("mask is empty")
    h = tstar.grid.voxel_size
    g = np.stack(np.gradient(tstar.values, h), axis=-1)
    norm = np.linalg.norm(g, axis=-1)
    valid = mask & (norm > 0)
    out = np.zeros(tstar.values.shape + (3,))
    out[valid] = g[valid] / norm[valid][:, None]
    return out, valid


# ---------------------------------------------------------------------------
# report emission

def write_metrics(path, metrics: dict):
    """Line-oriented key=value summary file."""
    with open(path, "w") as fh:
        for key, value in metrics.items():
            if isinstance(value, float):
                fh.write(f"{key}={value:.9g}\n")
            else:
                fh.write(f"{key}={value}\n")


def write_breakdown_csv(path, breakdown: AngularBreakdown):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["category", "voxels", "mae_rotations"])
        for name, count, mae in breakdown.rows():
            writer.writerow([name, count, f"{mae:.9g}"])
        writer.writerow(["excluded", breakdown.excluded, ""])


def write_hist_csv(path, hist: CooccurrenceHistogram):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["gt_bin_lo", "gt_bin_hi", "rec_bin_lo", "rec_bin_hi", "count"])
        bg = hist.bins_gt
        br = hist.bins_rec
        for i in range(hist.counts.shape[0]):
            for j in range(hist.counts.shape[1]):
                writer.writerow([f"{bg[i]:.9g}", f"{bg[i + 1]:.9g}",
                                 f"{br[j]:.9g}", f"{br[j + 1]:.9g}",
                                 int(hist.counts[i, j])])
