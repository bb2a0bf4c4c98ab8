"""Plain-numpy implementations of the hot kernels.

This is the fallback backend used when the compiled extension
(``revex._kernels._core``) is not built.  Both backends implement the same
two entry points and must return numerically equivalent results:

* ``correlate1d_3d`` -- 1-D correlation along the middle axis of a
  (pre, n, post) float32 array with edge-replicate padding, accumulated in
  float64.
* ``slic_assign`` -- one assignment sweep of localized K-means: every voxel
  inside a cluster's search window is claimed by the cluster with the
  smallest combined color/space distance (ties go to the lowest cluster
  index).
"""

import numpy as np

BACKEND_NAME = "numpy"


def correlate1d_3d(x3, kernel):
    """Correlate along axis 1 of a C-contiguous (pre, n, post) float32 array.

    Edge-replicate padding; float64 accumulation tap by tap in ascending
    kernel order (the compiled backend follows the same order).
    """
    pre, n, post = x3.shape
    radius = (kernel.shape[0] - 1) // 2
    idx = np.clip(np.arange(-radius, n + radius), 0, n - 1)
    padded = x3[:, idx, :].astype(np.float64)
    acc = np.zeros((pre, n, post), dtype=np.float64)
    for j in range(kernel.shape[0]):
        acc += kernel[j] * padded[:, j:j + n, :]
    return acc.astype(np.float32)


def slic_assign(feat, scale_t, centers_pos, centers_feat, ratio2, radius):
    """Assign every voxel to the nearest cluster within its search window.

    feat          -- (t, h, w, f) float32 feature volume (color space)
    scale_t       -- temporal coordinate scale: frame index i sits at i*scale_t
    centers_pos   -- (k, 3) float64 centers in scaled (zt, y, x) coordinates
    centers_feat  -- (k, f) float64 centers in feature space
    ratio2        -- squared space-vs-color weight (m/S)^2
    radius        -- (rt, ry, rx) window half-size in voxel units

    Returns (labels int32 (t,h,w), dist float64 (t,h,w)); voxels outside all
    windows keep label -1 and dist +inf.
    """
    t, h, w, _ = feat.shape
    rt, ry, rx = radius
    labels = np.full((t, h, w), -1, dtype=np.int32)
    best = np.full((t, h, w), np.inf, dtype=np.float64)
    zts = np.arange(t, dtype=np.float64) * scale_t
    ys = np.arange(h, dtype=np.float64)
    xs = np.arange(w, dtype=np.float64)
    for k in range(centers_pos.shape[0]):
        czt, cy, cx = centers_pos[k]
        # floor(x + 0.5) matches the compiled backend's rounding exactly
        ct = int(np.floor(czt / scale_t + 0.5)) if scale_t > 0 else 0
        t0, t1 = max(0, ct - rt), min(t, ct + rt + 1)
        y0, y1 = max(0, int(cy) - ry), min(h, int(cy) + ry + 1)
        x0, x1 = max(0, int(cx) - rx), min(w, int(cx) + rx + 1)
        if t0 >= t1 or y0 >= y1 or x0 >= x1:
            continue
        dc = feat[t0:t1, y0:y1, x0:x1, :].astype(np.float64) - centers_feat[k]
        d2 = np.einsum("thwf,thwf->thw", dc, dc)
        ds = (
            (zts[t0:t1] - czt)[:, None, None] ** 2
            + ((ys[y0:y1] - cy)[None, :, None] ** 2)
            + ((xs[x0:x1] - cx)[None, None, :] ** 2)
        )
        d2 = d2 + ratio2 * ds
        win_best = best[t0:t1, y0:y1, x0:x1]
        better = d2 < win_best
        win_best[better] = d2[better]
        labels[t0:t1, y0:y1, x0:x1][better] = k
    return labels, best
