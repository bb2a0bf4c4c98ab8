"""Independent reference implementations used to cross-check the package.

Everything here is written for clarity, not speed: dense loops over small
inputs.  None of these functions share code with the package under test.
"""

import math

import numpy as np


def dense_gaussian_kernel(sigma, truncation):
    radius = int(math.ceil(truncation * sigma))
    taps = [math.exp(-0.5 * (i / sigma) ** 2) for i in range(-radius, radius + 1)]
    s = sum(taps)
    return [v / s for v in taps], radius


def dense_blur_3d(vol, sigma_space, sigma_time, truncation):
    """Direct (non-separated) 3-D Gaussian convolution with replicate edges.

    vol is (t, h, w) float; the full 3-D kernel is the outer product of the
    per-axis 1-D kernels, evaluated voxel by voxel.
    """
    vol = np.asarray(vol, dtype=np.float64)
    t, h, w = vol.shape
    if sigma_time > 0:
        kt, rt = dense_gaussian_kernel(sigma_time, truncation)
    else:
        kt, rt = [1.0], 0
    ks, rs = dense_gaussian_kernel(sigma_space, truncation)
    out = np.zeros_like(vol)
    for it in range(t):
        for iy in range(h):
            for ix in range(w):
                acc = 0.0
                for dt in range(-rt, rt + 1):
                    st = min(max(it + dt, 0), t - 1)
                    for dy in range(-rs, rs + 1):
                        sy = min(max(iy + dy, 0), h - 1)
                        for dx in range(-rs, rs + 1):
                            sx = min(max(ix + dx, 0), w - 1)
                            acc += (kt[dt + rt] * ks[dy + rs] * ks[dx + rs]
                                    * vol[st, sy, sx])
                out[it, iy, ix] = acc
    return out


def shapley_by_permutations(values_by_mask, r):
    """Exact Shapley values by averaging marginals over all r! orderings.

    values_by_mask maps a bitmask (int) to v(S).  Independent of the
    factorial-weight subset formula used by the package.
    """
    import itertools

    phi = np.zeros(r)
    perms = list(itertools.permutations(range(r)))
    for perm in perms:
        mask = 0
        for k in perm:
            before = values_by_mask[mask]
            mask |= 1 << k
            phi[k] += values_by_mask[mask] - before
    return phi / len(perms)


def least_squares_fit(X, y, weights, ridge=0.0):
    """Weighted ridge regression via the numpy lstsq path on the scaled system.

    Returns (intercept, coefficients).  Scales rows by sqrt(w) and augments
    ridge rows explicitly, so no normal-equation code is shared with the
    package solver.
    """
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    w = np.sqrt(np.asarray(weights, dtype=np.float64))
    A = np.concatenate([np.ones((X.shape[0], 1)), X], axis=1) * w[:, None]
    b = y * w
    if ridge > 0:
        reg = np.zeros((X.shape[1], X.shape[1] + 1))
        reg[:, 1:] = np.eye(X.shape[1]) * math.sqrt(ridge)
        A = np.concatenate([A, reg], axis=0)
        b = np.concatenate([b, np.zeros(X.shape[1])])
    beta, *_ = np.linalg.lstsq(A, b, rcond=None)
    return beta[0], beta[1:]
