"""Single-pass (time, value) covariance used by the per-voxel update step.

The reconstruction engine reduces an arbitrary number of correction samples
per voxel to running first moments and one co-moment, so a voxel update
needs a single sweep over the sampled corrections.  ``two_pass_covariance``
is the naive reference implementation kept for verification.
"""

import numpy as np
from numba import njit


@njit(cache=True)
def streaming_covariance(x, y):
    """Population covariance of paired samples in one pass.

    Welford-style recursion: both means and the co-moment are updated per
    sample, so the caller can feed a stream without storing it.

    Returns (n, mean_x, mean_y, cov) with cov = 0 for fewer than 2 samples.
    """
    n = 0
    mean_x = 0.0
    mean_y = 0.0
    comoment = 0.0
    for i in range(x.shape[0]):
        n += 1
        dx = x[i] - mean_x
        mean_x += dx / n
        mean_y += (y[i] - mean_y) / n
        # dx uses the pre-update mean, (y - mean_y) the post-update one
        comoment += dx * (y[i] - mean_y)
    if n < 2:
        return n, mean_x, mean_y, 0.0
    return n, mean_x, mean_y, comoment / n


def two_pass_covariance(x, y):
    """Reference population covariance: explicit means, then the cross sum."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    n = x.size
    if n < 2:
        mx = float(x.mean()) if n else 0.0
        my = float(y.mean()) if n else 0.0
        return n, mx, my, 0.0
    mx = float(x.mean())
    my = float(y.mean())
    cov = float(((x - mx) * (y - my)).sum() / n)
    return n, mx, my, cov
