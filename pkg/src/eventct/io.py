"""Raw little-endian float32 serialization with text sidecars.

Volumes: one ``.raw`` payload (x index fastest) plus ``<stem>.meta`` holding
the grid.  An EventVolume is three such files sharing a stem with ``_mu0``,
``_mu1``, ``_tstar`` suffixes.  Projections: one raw stack [view][row][col]
plus a geometry sidecar and a ``<stem>_views.csv`` table of per-view angles
and timestamps.  Round-trips of written files are bit-exact.
"""

import csv
import os

import numpy as np

from .core import AcquisitionGeometry, EventVolume, ProjectionSet, ScalarField3, VoxelGrid3

_EVENT_SUFFIXES = ("_mu0", "_mu1", "_tstar")
_EVENT_UNITS = ("1/cm", "1/cm", "rotations")


def _stem(path):
    base, ext = os.path.splitext(str(path))
    return base, (ext or ".raw")


def _sidecar(path):
    return _stem(path)[0] + ".meta"


def _write_meta(path, fields):
    with open(path, "w") as fh:
        for key, value in fields.items():
            fh.write(f"{key}={value}\n")


def _read_meta(path):
    fields = {}
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            key, _, value = line.partition("=")
            fields[key.strip()] = value.strip()
    return fields


def _write_field(path, field: ScalarField3, unit):
    g = field.grid
    payload = np.asarray(field.values, dtype="<f4").ravel(order="F")
    payload.tofile(path)
    origin = ",".join(f"{c:.17g}" for c in g.origin)
    _write_meta(_sidecar(path), {
        "nx": g.nx, "ny": g.ny, "nz": g.nz,
        "voxel_size_mm": f"{g.voxel_size:.17g}",
        "origin_mm": origin,
        "unit": unit,
    })


def _read_field(path):
    meta_path = _sidecar(path)
    if not os.path.exists(meta_path):
        raise ValueError(f"missing sidecar {meta_path}")
    meta = _read_meta(meta_path)
    shape = (int(meta["nx"]), int(meta["ny"]), int(meta["nz"]))
    origin = tuple(float(v) for v in meta["origin_mm"].split(","))
    grid = VoxelGrid3(shape[0], shape[1], shape[2], float(meta["voxel_size_mm"]), origin)
    raw = np.fromfile(path, dtype="<f4")
    if raw.size != grid.n_voxels:
        raise ValueError(f"{path}: {raw.size} values, sidecar promises {grid.n_voxels}")
    if not np.all(np.isfinite(raw)):
        raise ValueError(f"{path}: non-finite values")
    values = raw.astype(np.float64).reshape(shape, order="F")
    return ScalarField3(grid, values), meta.get("unit", "")


def write_volume(path, obj):
    """Write a ScalarField3 (one file) or EventVolume (three files, shared stem)."""
    if isinstance(obj, EventVolume):
        base, ext = _stem(path)
        for suffix, unit, field in zip(_EVENT_SUFFIXES, _EVENT_UNITS,
                                       (obj.mu0, obj.mu1, obj.tstar)):
            _write_field(base + suffix + ext, field, unit)
    elif isinstance(obj, ScalarField3):
        _write_field(str(path), obj, "1/cm")
    else:
        raise TypeError(f"cannot serialize {type(obj).__name__}")


def read_volume(path):
    """Read back a ScalarField3, or an EventVolume if the stem names a triple."""
    path = str(path)
    if os.path.exists(path):
        return _read_field(path)[0]
    base, ext = _stem(path)
    triple = [base + suffix + ext for suffix in _EVENT_SUFFIXES]
    if all(os.path.exists(p) for p in triple):
        mu0, _ = _read_field(triple[0])
        mu1, _ = _read_field(triple[1])
        tstar, _ = _read_field(triple[2])
        return EventVolume(mu0, mu1, tstar)
    raise ValueError(f"no volume at {path}")


def write_projections(path, pset: ProjectionSet):
    g = pset.geometry
    np.asarray(pset.data, dtype="<f4").ravel(order="C").tofile(path)
    base, _ = _stem(path)
    _write_meta(_sidecar(path), {
        "beam": g.beam,
        "n_views": g.n_views,
        "det_rows": g.det_rows,
        "det_cols": g.det_cols,
        "pixel_pitch_mm": f"{g.pixel_pitch:.17g}",
        "projections_per_rotation": g.projections_per_rotation,
        "origin_to_detector_mm": f"{g.origin_to_detector:.17g}",
        "source_to_origin_mm": ("none" if g.source_to_origin is None
                                else f"{g.source_to_origin:.17g}"),
        "rotation_period": f"{g.rotation_period:.17g}",
    })
    with open(base + "_views.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["index", "angle_rad", "time_rotations"])
        for i in range(g.n_views):
            writer.writerow([i, f"{g.angles[i]:.17g}", f"{g.times[i]:.17g}"])


def read_projections(path):
    path = str(path)
    meta_path = _sidecar(path)
    if not os.path.exists(meta_path):
        raise ValueError(f"missing sidecar {meta_path}")
    meta = _read_meta(meta_path)
    base, _ = _stem(path)
    table = base + "_views.csv"
    if not os.path.exists(table):
        raise ValueError(f"missing view table {table}")
    angles = []
    times = []
    with open(table, newline="") as fh:
        for row in csv.DictReader(fh):
            angles.append(float(row["angle_rad"]))
            times.append(float(row["time_rotations"]))
    so = meta["source_to_origin_mm"]
    geometry = AcquisitionGeometry(
        meta["beam"], int(meta["det_rows"]), int(meta["det_cols"]),
        float(meta["pixel_pitch_mm"]), np.array(angles), np.array(times),
        int(meta["projections_per_rotation"]),
        float(meta["origin_to_detector_mm"]),
        None if so == "none" else float(so),
        float(meta["rotation_period"]))
    n_views = int(meta["n_views"])
    if n_views != geometry.n_views:
        raise ValueError(f"{table}: {geometry.n_views} rows, sidecar promises {n_views}")
    raw = np.fromfile(path, dtype="<f4")
    expected = n_views * geometry.det_rows * geometry.det_cols
    if raw.size != expected:
        raise ValueError(f"{path}: {raw.size} values, sidecar promises {expected}")
    if not np.all(np.isfinite(raw)):
        raise ValueError(f"{path}: non-finite values")
    data = raw.astype(np.float64).reshape(n_views, geometry.det_rows, geometry.det_cols)
    return ProjectionSet(geometry, data)
