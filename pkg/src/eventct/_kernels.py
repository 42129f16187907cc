"""Numba kernels for projection and per-voxel backprojection updates.

All kernels write disjoint output slots per parallel iteration and reduce
per-voxel sums in a fixed order, so results are bit-identical for any
thread count.  Lengths are in mm; line integrals convert to cm so that
attenuation in 1/cm yields dimensionless optical depths.
"""

import numpy as np
from numba import njit, prange

from .stats import streaming_covariance

MM_TO_CM = 0.1


# ---------------------------------------------------------------------------
# point sampling

@njit(inline="always")
def _tri_setup(origin0, origin1, origin2, vsize, nx, ny, nz, x, y, z):
    """Trilinear corner index and weights; flag -1 outside the bounding box.

    Inside the box but beyond the voxel-center hull the fractional index is
    clamped, extending edge values to the box faces.
    """
    fx = (x - origin0) / vsize
    fy = (y - origin1) / vsize
    fz = (z - origin2) / vsize
    if fx < -0.5 or fx > nx - 0.5 or fy < -0.5 or fy > ny - 0.5 or fz < -0.5 or fz > nz - 0.5:
        return -1, 0, 0, 0.0, 0.0, 0.0
    if fx < 0.0:
        fx = 0.0
    elif fx > nx - 1.0:
        fx = nx - 1.0
    if fy < 0.0:
        fy = 0.0
    elif fy > ny - 1.0:
        fy = ny - 1.0
    if fz < 0.0:
        fz = 0.0
    elif fz > nz - 1.0:
        fz = nz - 1.0
    ix = int(fx)
    iy = int(fy)
    iz = int(fz)
    if ix > nx - 2:
        ix = nx - 2 if nx > 1 else 0
    if iy > ny - 2:
        iy = ny - 2 if ny > 1 else 0
    if iz > nz - 2:
        iz = nz - 2 if nz > 1 else 0
    return ix, iy, iz, fx - ix, fy - iy, fz - iz


@njit(inline="always")
def _tri_gather(values, ix, iy, iz, wx, wy, wz):
    nx, ny, nz = values.shape
    jx = ix + 1 if ix + 1 < nx else ix
    jy = iy + 1 if iy + 1 < ny else iy
    jz = iz + 1 if iz + 1 < nz else iz
    c00 = values[ix, iy, iz] * (1 - wx) + values[jx, iy, iz] * wx
    c10 = values[ix, jy, iz] * (1 - wx) + values[jx, jy, iz] * wx
    c01 = values[ix, iy, jz] * (1 - wx) + values[jx, iy, jz] * wx
    c11 = values[ix, jy, jz] * (1 - wx) + values[jx, jy, jz] * wx
    c0 = c00 * (1 - wy) + c10 * wy
    c1 = c01 * (1 - wy) + c11 * wy
    return c0 * (1 - wz) + c1 * wz


@njit(cache=True)
def sample_scalar_point(values, origin, vsize, x, y, z):
    """Trilinear sample of a field at a world point; 0 outside the box."""
    nx, ny, nz = values.shape
    ix, iy, iz, wx, wy, wz = _tri_setup(origin[0], origin[1], origin[2], vsize, nx, ny, nz, x, y, z)
    if ix < 0:
        return 0.0
    return _tri_gather(values, ix, iy, iz, wx, wy, wz)


@njit(cache=True)
def sample_event_point(mu0, mu1, tstar, origin, vsize, x, y, z, t):
    """Event-model attenuation at (x, t): interpolate the parameters, then step."""
    nx, ny, nz = mu0.shape
    ix, iy, iz, wx, wy, wz = _tri_setup(origin[0], origin[1], origin[2], vsize, nx, ny, nz, x, y, z)
    if ix < 0:
        return 0.0
    ts = _tri_gather(tstar, ix, iy, iz, wx, wy, wz)
    if t < ts:
        return _tri_gather(mu0, ix, iy, iz, wx, wy, wz)
    return _tri_gather(mu1, ix, iy, iz, wx, wy, wz)


# ---------------------------------------------------------------------------
# ray geometry

@njit(inline="always")
def _slab_entry_exit(ox, oy, oz, dx, dy, dz, lox, loy, loz, hix, hiy, hiz):
    """Ray parameter interval inside an axis-aligned box; exit < entry on miss."""
    t0 = -1e300
    t1 = 1e300
    for axis in range(3):
        if axis == 0:
            o = ox; d = dx; lo = lox; hi = hix
        elif axis == 1:
            o = oy; d = dy; lo = loy; hi = hiy
        else:
            o = oz; d = dz; lo = loz; hi = hiz
        if d > 1e-12 or d < -1e-12:
            ta = (lo - o) / d
            tb = (hi - o) / d
            if ta > tb:
                ta, tb = tb, ta
            if ta > t0:
                t0 = ta
            if tb < t1:
                t1 = tb
        elif o < lo or o > hi:
            return 1.0, 0.0
    return t0, t1


@njit(inline="always")
def _pixel_ray(beam_cone, cos_a, sin_a, so, od, pitch, nr, nc, row, col):
    """Origin and unit direction of the ray through detector pixel (row, col)."""
    u = (col - (nc - 1) * 0.5) * pitch
    v = (row - (nr - 1) * 0.5) * pitch
    if beam_cone:
        sx = -so * cos_a
        sy = -so * sin_a
        qx = od * cos_a - u * sin_a
        qy = od * sin_a + u * cos_a
        dx = qx - sx
        dy = qy - sy
        dz = v
        norm = np.sqrt(dx * dx + dy * dy + dz * dz)
        return sx, sy, 0.0, dx / norm, dy / norm, dz / norm
    ox = -u * sin_a
    oy = u * cos_a
    return ox, oy, v, cos_a, sin_a, 0.0


@njit(inline="always")
def _project_point(beam_cone, cos_a, sin_a, so, od, pitch, nr, nc, x, y, z):
    """Continuous detector (row, col) of a world point in one view."""
    u = -x * sin_a + y * cos_a
    if beam_cone:
        depth = so + x * cos_a + y * sin_a
        scale = (so + od) / depth
        u *= scale
        v = z * scale
    else:
        v = z
    return v / pitch + (nr - 1) * 0.5, u / pitch + (nc - 1) * 0.5


@njit(cache=True)
def project_point_to_detector(beam_cone, cos_a, sin_a, so, od, pitch, nr, nc, x, y, z):
    return _project_point(beam_cone, cos_a, sin_a, so, od, pitch, nr, nc, x, y, z)


@njit(cache=True)
def pixel_ray(beam_cone, cos_a, sin_a, so, od, pitch, nr, nc, row, col):
    return _pixel_ray(beam_cone, cos_a, sin_a, so, od, pitch, nr, nc, row, col)


@njit(cache=True)
def slab_entry_exit(ox, oy, oz, dx, dy, dz, lox, loy, loz, hix, hiy, hiz):
    return _slab_entry_exit(ox, oy, oz, dx, dy, dz, lox, loy, loz, hix, hiy, hiz)


@njit(inline="always")
def _bilinear(img, r, c):
    nr, nc = img.shape
    i = int(r)
    j = int(c)
    if i > nr - 2:
        i = nr - 2 if nr > 1 else 0
    if j > nc - 2:
        j = nc - 2 if nc > 1 else 0
    wr = r - i
    wc = c - j
    i1 = i + 1 if i + 1 < nr else i
    j1 = j + 1 if j + 1 < nc else j
    top = img[i, j] * (1 - wc) + img[i, j1] * wc
    bot = img[i1, j] * (1 - wc) + img[i1, j1] * wc
    return top * (1 - wr) + bot * wr


@njit(cache=True)
def bilinear_image(img, r, c):
    return _bilinear(img, r, c)


@njit(inline="always")
def _apply_motion(mat, x, y, z):
    px = mat[0, 0] * x + mat[0, 1] * y + mat[0, 2] * z + mat[0, 3]
    py = mat[1, 0] * x + mat[1, 1] * y + mat[1, 2] * z + mat[1, 3]
    pz = mat[2, 0] * x + mat[2, 1] * y + mat[2, 2] * z + mat[2, 3]
    return px, py, pz


# ---------------------------------------------------------------------------
# forward projection

@njit(parallel=True, cache=True)
def forward_event_kernel(mu0, mu1, tstar, origin, vsize,
                         out, cos_a, sin_a, view_times,
                         beam_cone, so, od, pitch, step_mm,
                         motion, use_motion):
    n_views, nr, nc = out.shape
    nx, ny, nz = mu0.shape
    half = 0.5 * vsize
    lox = origin[0] - half
    loy = origin[1] - half
    loz = origin[2] - half
    hix = origin[0] + vsize * (nx - 1) + half
    hiy = origin[1] + vsize * (ny - 1) + half
    hiz = origin[2] + vsize * (nz - 1) + half
    for view in prange(n_views):
        ca = cos_a[view]
        sa = sin_a[view]
        t = view_times[view]
        for row in range(nr):
            for col in range(nc):
                ox, oy, oz, dx, dy, dz = _pixel_ray(beam_cone, ca, sa, so, od, pitch, nr, nc, row, col)
                t0, t1 = _slab_entry_exit(ox, oy, oz, dx, dy, dz, lox, loy, loz, hix, hiy, hiz)
                if t1 <= t0:
                    out[view, row, col] = 0.0
                    continue
                n_steps = int(np.ceil((t1 - t0) / step_mm))
                h = (t1 - t0) / n_steps
                acc = 0.0
                for k in range(n_steps):
                    tau = t0 + (k + 0.5) * h
                    px = ox + tau * dx
                    py = oy + tau * dy
                    pz = oz + tau * dz
                    if use_motion:
                        px, py, pz = _apply_motion(motion[view], px, py, pz)
                    ix, iy, iz, wx, wy, wz = _tri_setup(origin[0], origin[1], origin[2],
                                                        vsize, nx, ny, nz, px, py, pz)
                    if ix < 0:
                        continue
                    ts = _tri_gather(tstar, ix, iy, iz, wx, wy, wz)
                    if t < ts:
                        acc += _tri_gather(mu0, ix, iy, iz, wx, wy, wz)
                    else:
                        acc += _tri_gather(mu1, ix, iy, iz, wx, wy, wz)
                out[view, row, col] = acc * h * MM_TO_CM


@njit(parallel=True, cache=True)
def forward_static_kernel(field, origin, vsize, out, cos_a, sin_a,
                          beam_cone, so, od, pitch, step_mm):
    n_views, nr, nc = out.shape
    nx, ny, nz = field.shape
    half = 0.5 * vsize
    lox = origin[0] - half
    loy = origin[1] - half
    loz = origin[2] - half
    hix = origin[0] + vsize * (nx - 1) + half
    hiy = origin[1] + vsize * (ny - 1) + half
    hiz = origin[2] + vsize * (nz - 1) + half
    for view in prange(n_views):
        ca = cos_a[view]
        sa = sin_a[view]
        for row in range(nr):
            for col in range(nc):
                ox, oy, oz, dx, dy, dz = _pixel_ray(beam_cone, ca, sa, so, od, pitch, nr, nc, row, col)
                t0, t1 = _slab_entry_exit(ox, oy, oz, dx, dy, dz, lox, loy, loz, hix, hiy, hiz)
                if t1 <= t0:
                    out[view, row, col] = 0.0
                    continue
                n_steps = int(np.ceil((t1 - t0) / step_mm))
                h = (t1 - t0) / n_steps
                acc = 0.0
                for k in range(n_steps):
                    tau = t0 + (k + 0.5) * h
                    px = ox + tau * dx
                    py = oy + tau * dy
                    pz = oz + tau * dz
                    ix, iy, iz, wx, wy, wz = _tri_setup(origin[0], origin[1], origin[2],
                                                        vsize, nx, ny, nz, px, py, pz)
                    if ix < 0:
                        continue
                    acc += _tri_gather(field, ix, iy, iz, wx, wy, wz)
                out[view, row, col] = acc * h * MM_TO_CM


@njit(parallel=True, cache=True)
def chord_length_kernel(origin, vsize, shape0, shape1, shape2,
                        out, cos_a, sin_a, beam_cone, so, od, pitch):
    n_views, nr, nc = out.shape
    half = 0.5 * vsize
    lox = origin[0] - half
    loy = origin[1] - half
    loz = origin[2] - half
    hix = origin[0] + vsize * (shape0 - 1) + half
    hiy = origin[1] + vsize * (shape1 - 1) + half
    hiz = origin[2] + vsize * (shape2 - 1) + half
    for view in prange(n_views):
        ca = cos_a[view]
        sa = sin_a[view]
        for row in range(nr):
            for col in range(nc):
                ox, oy, oz, dx, dy, dz = _pixel_ray(beam_cone, ca, sa, so, od, pitch, nr, nc, row, col)
                t0, t1 = _slab_entry_exit(ox, oy, oz, dx, dy, dz, lox, loy, loz, hix, hiy, hiz)
                out[view, row, col] = (t1 - t0) * MM_TO_CM if t1 > t0 else 0.0


# ---------------------------------------------------------------------------
# per-voxel updates

@njit(parallel=True, cache=True)
def event_update_kernel(mu0, mu1, tstar, origin, vsize,
                        corr, view_times, cos_a, sin_a,
                        beam_cone, so, od, pitch,
                        motion, use_motion,
                        weights, use_weights,
                        lambda_t, lambda_0, lambda_1, lambda_delta, lambda_mu, eps,
                        scan_t0, scan_t1, rot_period, freeze_mu):
    """One ordered-subset backprojection pass updating (mu0, mu1, tstar) in place.

    Correction samples are gathered once per voxel; covariances over the
    one-rotation windows before/after the current transition time drive the
    time update, and the cached samples re-split at the new time feed the
    attenuation means.  Views must be in ascending time order so the minus
    window forms a prefix of the cache.
    """
    nx, ny, nz = mu0.shape
    m, nr, nc = corr.shape
    half_rot = 0.5 * rot_period
    t_lo_clip = scan_t0 - rot_period
    t_hi_clip = scan_t1 + rot_period
    for ix in prange(nx):
        tbuf = np.empty(m, dtype=np.float64)
        cbuf = np.empty(m, dtype=np.float64)
        x = origin[0] + vsize * ix
        for iy in range(ny):
            y = origin[1] + vsize * iy
            for iz in range(nz):
                z = origin[2] + vsize * iz
                t_prev = tstar[ix, iy, iz]
                # shift the window center inward so both windows keep full width
                tc = t_prev
                if tc < scan_t0 + rot_period:
                    tc = scan_t0 + rot_period
                if tc > scan_t1 - rot_period:
                    tc = scan_t1 - rot_period
                w_lo = tc - rot_period
                w_hi = tc + rot_period
                n_total = 0
                n_minus = 0
                for j in range(m):
                    tj = view_times[j]
                    if tj < w_lo:
                        continue
                    if tj > w_hi:
                        break
                    px, py, pz = x, y, z
                    if use_motion:
                        px, py, pz = _apply_motion(motion[j], px, py, pz)
                    r, c = _project_point(beam_cone, cos_a[j], sin_a[j], so, od,
                                          pitch, nr, nc, px, py, pz)
                    if r < 0.0 or r > nr - 1.0 or c < 0.0 or c > nc - 1.0:
                        continue
                    tbuf[n_total] = tj
                    cbuf[n_total] = _bilinear(corr[j], r, c)
                    if tj <= tc:
                        n_minus += 1
                    n_total += 1
                _, _, mean_minus, sig_minus = streaming_covariance(tbuf[:n_minus], cbuf[:n_minus])
                _, _, mean_plus, sig_plus = streaming_covariance(tbuf[n_minus:n_total], cbuf[n_minus:n_total])

                dmu = mu1[ix, iy, iz] - mu0[ix, iy, iz]
                gain = lambda_delta * abs(dmu)
                if gain > lambda_mu:
                    gain = lambda_mu
                sg = 1.0 if dmu >= 0.0 else -1.0
                # (time * attenuation) * 1 / attenuation -> time
                dt = (sig_plus - sig_minus) * gain / (dmu + sg * eps)
                if dt > half_rot:
                    dt = half_rot
                elif dt < -half_rot:
                    dt = -half_rot
                w = weights[ix, iy, iz] if use_weights else 1.0
                lt = lambda_t * w
                if lt > 1.0:
                    lt = 1.0
                t_new = t_prev + lt * dt
                if t_new < t_lo_clip:
                    t_new = t_lo_clip
                elif t_new > t_hi_clip:
                    t_new = t_hi_clip

                if not freeze_mu:
                    s0 = 0.0
                    k0 = 0
                    for i in range(n_minus):
                        if tbuf[i] <= t_new:
                            s0 += cbuf[i]
                            k0 += 1
                    s1 = 0.0
                    k1 = 0
                    for i in range(n_minus, n_total):
                        if tbuf[i] > t_new:
                            s1 += cbuf[i]
                            k1 += 1
                    if k0 > 0:
                        l0 = lambda_0 * w
                        if l0 > 1.0:
                            l0 = 1.0
                        v0 = mu0[ix, iy, iz] + l0 * (s0 / k0)
                        mu0[ix, iy, iz] = v0 if v0 > 0.0 else 0.0
                    if k1 > 0:
                        l1 = lambda_1 * w
                        if l1 > 1.0:
                            l1 = 1.0
                        v1 = mu1[ix, iy, iz] + l1 * (s1 / k1)
                        mu1[ix, iy, iz] = v1 if v1 > 0.0 else 0.0
                tstar[ix, iy, iz] = t_new


@njit(parallel=True, cache=True)
def sirt_update_kernel(vol, origin, vsize, corr, cos_a, sin_a,
                       beam_cone, so, od, pitch, relax):
    """SIRT backprojection: add the mean sampled correction, clamp at zero."""
    nx, ny, nz = vol.shape
    m, nr, nc = corr.shape
    for ix in prange(nx):
        x = origin[0] + vsize * ix
        for iy in range(ny):
            y = origin[1] + vsize * iy
            for iz in range(nz):
                z = origin[2] + vsize * iz
                acc = 0.0
                count = 0
                for j in range(m):
                    r, c = _project_point(beam_cone, cos_a[j], sin_a[j], so, od,
                                          pitch, nr, nc, x, y, z)
                    if r < 0.0 or r > nr - 1.0 or c < 0.0 or c > nc - 1.0:
                        continue
                    acc += _bilinear(corr[j], r, c)
                    count += 1
                if count > 0:
                    v = vol[ix, iy, iz] + relax * (acc / count)
                    vol[ix, iy, iz] = v if v > 0.0 else 0.0
