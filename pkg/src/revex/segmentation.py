"""Partition a video into regions: 3D grids, 3D SLIC superpixels, and
low-resolution random grids upscaled into soft masks.

Regions are the unit of attribution: every voxel of a region receives the
same relevance, so the partition fully determines the explanation's
granularity.
"""

import math
from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from . import _kernels
from .errors import ParameterError
from .tensor import RVX_DTYPE_U32, VideoTensor, _read_rvx, _write_rvx

_D65 = (0.95047, 1.0, 1.08883)
_RGB_TO_XYZ = np.array([
    [0.4124564, 0.3575761, 0.1804375],
    [0.2126729, 0.7151522, 0.0721750],
    [0.0193339, 0.1191920, 0.9503041],
])


@dataclass(frozen=True)
class SegmentationMap:
    """Per-voxel region labels 0..r-1 over a (t, h, w) volume.

    Every label in [0, r) occurs at least once (total partition).
    """

    labels: np.ndarray
    r: int

    def __post_init__(self):
        labels = np.ascontiguousarray(self.labels, dtype=np.int32)
        if labels.ndim != 3:
            raise ParameterError(f"labels must be (t,h,w), got shape {labels.shape}")
        if self.r < 1:
            raise ParameterError(f"region count must be >= 1, got {self.r}")
        counts = np.bincount(labels.ravel(), minlength=self.r)
        if labels.min() < 0 or labels.max() >= self.r:
            raise ParameterError("labels outside [0, r)")
        if counts.size > self.r or (counts == 0).any():
            raise ParameterError("every label in [0, r) must occur at least once")
        labels.flags.writeable = False
        object.__setattr__(self, "labels", labels)

    @property
    def shape(self):
        return self.labels.shape

    def region_volumes(self):
        return np.bincount(self.labels.ravel(), minlength=self.r)


@dataclass(frozen=True)
class SlicParams:
    n_segments: int
    compactness: float = 10.0
    temporal_scale: float | None = None  # None: sqrt(h*w)/t at call time
    max_iters: int = 10

    def __post_init__(self):
        if self.n_segments < 1:
            raise ParameterError(f"n_segments must be >= 1, got {self.n_segments}")
        if self.compactness <= 0:
            raise ParameterError(f"compactness must be > 0, got {self.compactness}")
        if self.temporal_scale is not None and self.temporal_scale <= 0:
            raise ParameterError("temporal_scale must be > 0")
        if self.max_iters < 1:
            raise ParameterError(f"max_iters must be >= 1, got {self.max_iters}")


def grid_3d(t, h, w, nt, ny, nx):
    """Split a (t, h, w) volume into nt*ny*nx cuboids.

    Cell sizes along each axis differ by at most one voxel.
    """
    if not (1 <= nt <= t and 1 <= ny <= h and 1 <= nx <= w):
        raise ParameterError(
            f"grid ({nt},{ny},{nx}) must satisfy 1 <= n <= dim for dims ({t},{h},{w})")
    lt = (np.arange(t) * nt) // t
    ly = (np.arange(h) * ny) // h
    lx = (np.arange(w) * nx) // w
    labels = ((lt[:, None, None] * ny + ly[None, :, None]) * nx + lx[None, None, :])
    return SegmentationMap(labels.astype(np.int32), nt * ny * nx)


def _srgb_to_lab(rgb):
    """sRGB in [0,1] -> CIELAB (D65), vectorized over any leading shape."""
    rgb = np.asarray(rgb, dtype=np.float64)
    linear = np.where(rgb <= 0.04045, rgb / 12.92, ((rgb + 0.055) / 1.055) ** 2.4)
    xyz = linear @ _RGB_TO_XYZ.T
    xyz /= np.asarray(_D65)
    eps = (6.0 / 29.0) ** 3
    f = np.where(xyz > eps, np.cbrt(xyz), xyz / (3 * (6.0 / 29.0) ** 2) + 4.0 / 29.0)
    lab = np.empty_like(xyz)
    lab[..., 0] = 116.0 * f[..., 1] - 16.0
    lab[..., 1] = 500.0 * (f[..., 0] - f[..., 1])
    lab[..., 2] = 200.0 * (f[..., 1] - f[..., 2])
    return lab


def _slic_features(video):
    if video.c == 3:
        return _srgb_to_lab(video.data).astype(np.float32)
    # single channel: raw intensity scaled to a lightness-like range so the
    # default compactness behaves comparably to the Lab case
    return (video.data[..., :1] * 100.0).astype(np.float32)


def _lattice_counts(scaled_dims, vox_dims, n_segments):
    """Per-axis center counts whose product lands in [n_segments, 2*n_segments]
    where geometry permits, allocated proportionally to the scaled extents."""
    step = (scaled_dims[0] * scaled_dims[1] * scaled_dims[2] / n_segments) ** (1 / 3)
    ideal = [max(d / step, 1e-9) for d in scaled_dims]
    k = [min(vox_dims[i], max(1, math.floor(ideal[i]))) for i in range(3)]
    while k[0] * k[1] * k[2] < n_segments:
        growable = [j for j in range(3) if k[j] < vox_dims[j]]
        if not growable:
            break
        j = max(growable, key=lambda i: ideal[i] / k[i])
        k[j] += 1
    while k[0] * k[1] * k[2] > 2 * n_segments and max(k) > 1:
        j = min((i for i in range(3) if k[i] > 1), key=lambda i: ideal[i] / k[i])
        k[j] -= 1
    return k


def _lattice(t, h, w, scale_t, n_segments):
    """Regular lattice of initial cluster centers (voxel coordinates)."""
    kt, ky, kx = _lattice_counts((scale_t * t, float(h), float(w)),
                                 (t, h, w), n_segments)
    centers = []
    for it in range(kt):
        ct = min(t - 1, max(0, math.floor((it + 0.5) * t / kt)))
        for iy in range(ky):
            cy = min(h - 1, max(0, math.floor((iy + 0.5) * h / ky)))
            for ix in range(kx):
                cx = min(w - 1, max(0, math.floor((ix + 0.5) * w / kx)))
                centers.append((ct, cy, cx))
    return centers


def _connectivity_structure():
    return ndimage.generate_binary_structure(3, 1)


def _fragment_neighbors(out, frag, box):
    """Labels 6-adjacent to `frag` (a boolean crop of `out[box]`)."""
    vals = []
    for axis in range(3):
        left = [slice(None)] * 3
        right = [slice(None)] * 3
        left[axis] = slice(0, -1)
        right[axis] = slice(1, None)
        crop = out[box]
        fl, fr = frag[tuple(left)], frag[tuple(right)]
        vals.append(crop[tuple(right)][fl & ~fr])
        vals.append(crop[tuple(left)][fr & ~fl])
        # fragment voxels on the crop boundary: look one voxel outside
    t0, y0, x0 = (s.start for s in box)
    t1, y1, x1 = (s.stop for s in box)
    shape = out.shape
    if t0 > 0:
        vals.append(out[t0 - 1, y0:y1, x0:x1][frag[0]])
    if t1 < shape[0]:
        vals.append(out[t1, y0:y1, x0:x1][frag[-1]])
    if y0 > 0:
        vals.append(out[t0:t1, y0 - 1, x0:x1][frag[:, 0]])
    if y1 < shape[1]:
        vals.append(out[t0:t1, y1, x0:x1][frag[:, -1]])
    if x0 > 0:
        vals.append(out[t0:t1, y0:y1, x0 - 1][frag[:, :, 0]])
    if x1 < shape[2]:
        vals.append(out[t0:t1, y0:y1, x1][frag[:, :, -1]])
    return np.unique(np.concatenate(vals)) if vals else np.empty(0, dtype=out.dtype)


def _merge_fragments_once(out, r, volumes):
    """One ascending-label sweep of fragment merging on bounding-box crops.

    Returns the number of fragments merged.  Bounding boxes are computed at
    sweep start, so voxels gained during the sweep are handled next sweep.
    """
    structure = _connectivity_structure()
    boxes = ndimage.find_objects(out + 1, max_label=r)
    merged = 0
    for lab in range(r):
        box = boxes[lab]
        if box is None:
            continue
        mask = out[box] == lab
        comp, n = ndimage.label(mask, structure=structure)
        if n <= 1:
            continue
        sizes = np.bincount(comp.ravel())[1:]
        keep = int(np.argmax(sizes)) + 1
        fboxes = ndimage.find_objects(comp)
        for ci in range(1, n + 1):
            if ci == keep:
                continue
            fbox = fboxes[ci - 1]
            gbox = tuple(slice(b.start + f.start, b.start + f.stop)
                         for b, f in zip(box, fbox))
            frag = comp[fbox] == ci
            neighbors = _fragment_neighbors(out, frag, gbox)
            neighbors = neighbors[neighbors != lab]
            if neighbors.size == 0:
                continue
            target = int(neighbors[np.argmax(volumes[neighbors])])
            count = int(sizes[ci - 1])
            out[gbox][frag] = target
            volumes[target] += count
            volumes[lab] -= count
            merged += 1
    return merged


def _enforce_connectivity(labels, r, max_sweeps=32):
    """Merge disconnected fragments into their largest adjacent region.

    For each label, the largest 6-connected component is kept; every other
    component is relabeled to the adjacent region with the most voxels
    (ties to the lowest label).  Sweeps repeat until stable because a merge
    can push a region past the bounding box used to analyse it.
    """
    out = labels.copy()
    volumes = np.bincount(out.ravel(), minlength=r).astype(np.int64)
    for _ in range(max_sweeps):
        if _merge_fragments_once(out, r, volumes) == 0:
            break
    return out


def _compress_labels(labels):
    present = np.unique(labels)
    remap = np.zeros(int(present.max()) + 1, dtype=np.int32)
    remap[present] = np.arange(present.size, dtype=np.int32)
    return remap[labels], int(present.size)


def slic_3d(video, params):
    """3D SLIC: localized K-means over color + scaled (x, y, t) coordinates.

    Deterministic (seedless): centers start on a regular lattice, assignment
    ties break to the lowest cluster index, and fragments left by K-means are
    merged into their largest adjacent region so every output region is
    6-connected.
    """
    if not isinstance(video, VideoTensor):
        raise ParameterError("slic_3d expects a VideoTensor")
    t, h, w = video.t, video.h, video.w
    n_vox = t * h * w
    if params.n_segments > n_vox:
        raise ParameterError(
            f"n_segments={params.n_segments} exceeds voxel count {n_vox}")
    scale_t = params.temporal_scale
    if scale_t is None:
        scale_t = math.sqrt(h * w) / t
    feat = _slic_features(video)
    centers_vox = _lattice(t, h, w, scale_t, params.n_segments)
    k = len(centers_vox)
    centers_pos = np.array(
        [(ct * scale_t, cy, cx) for ct, cy, cx in centers_vox], dtype=np.float64)
    centers_feat = np.array(
        [feat[ct, cy, cx] for ct, cy, cx in centers_vox], dtype=np.float64)

    step = (n_vox / params.n_segments) ** (1.0 / 3.0)
    ratio2 = (params.compactness / step) ** 2
    radius = (max(1, math.ceil(2 * step / scale_t)),
              max(1, math.ceil(2 * step)),
              max(1, math.ceil(2 * step)))

    zts = np.arange(t, dtype=np.float64) * scale_t
    ys = np.arange(h, dtype=np.float64)
    xs = np.arange(w, dtype=np.float64)
    labels = None
    for _ in range(params.max_iters):
        labels, _dist = _kernels.slic_assign(feat, scale_t, centers_pos,
                                             centers_feat, ratio2, radius)
        unassigned = labels < 0
        if unassigned.any():
            labels = _assign_nearest_global(feat, labels, unassigned, zts, ys, xs,
                                            centers_pos, centers_feat, ratio2)
        flat = labels.ravel()
        counts = np.bincount(flat, minlength=k).astype(np.float64)
        occupied = counts > 0
        pos_stack = np.stack(np.meshgrid(zts, ys, xs, indexing="ij"), axis=-1)
        for d in range(3):
            sums = np.bincount(flat, weights=pos_stack[..., d].ravel(), minlength=k)
            centers_pos[occupied, d] = sums[occupied] / counts[occupied]
        for d in range(feat.shape[-1]):
            sums = np.bincount(flat, weights=feat[..., d].ravel().astype(np.float64),
                               minlength=k)
            centers_feat[occupied, d] = sums[occupied] / counts[occupied]

    labels, r = _compress_labels(labels)
    labels = _enforce_connectivity(labels, r)
    labels, r = _compress_labels(labels)
    return SegmentationMap(labels.astype(np.int32), r)


def _assign_nearest_global(feat, labels, unassigned, zts, ys, xs,
                           centers_pos, centers_feat, ratio2):
    """Fallback for voxels outside every search window: full distance scan."""
    it, iy, ix = np.nonzero(unassigned)
    pos = np.stack([zts[it], ys[iy], xs[ix]], axis=1)
    fv = feat[it, iy, ix].astype(np.float64)
    d_feat = ((fv[:, None, :] - centers_feat[None, :, :]) ** 2).sum(axis=2)
    d_pos = ((pos[:, None, :] - centers_pos[None, :, :]) ** 2).sum(axis=2)
    nearest = np.argmin(d_feat + ratio2 * d_pos, axis=1)
    out = labels.copy()
    out[it, iy, ix] = nearest.astype(np.int32)
    return out


def _upsample_linear(values, axis, size):
    """Linear upsampling along one axis, cell centers aligned, edges clamped."""
    g = values.shape[axis]
    pos = (np.arange(size) + 0.5) * g / size - 0.5
    pos = np.clip(pos, 0.0, g - 1.0)
    i0 = np.floor(pos).astype(int)
    i1 = np.minimum(i0 + 1, g - 1)
    frac = (pos - i0).astype(np.float32)
    shape = [1] * values.ndim
    shape[axis] = size
    frac = frac.reshape(shape)
    lo = np.take(values, i0, axis=axis)
    hi = np.take(values, i1, axis=axis)
    return lo * (1.0 - frac) + hi * frac


def low_res_soft_grid(t, h, w, grid, p_keep, rng_seed=0):
    """Random keep/remove cells on a coarse grid, upscaled trilinearly.

    Returns a (t, h, w) float32 soft mask in [0, 1] (1 keeps the original).
    Each low-resolution cell is kept independently with probability p_keep.
    """
    gt, gy, gx = grid
    if gt < 1 or gy < 1 or gx < 1:
        raise ParameterError(f"grid dims must be >= 1, got {grid}")
    if not (0.0 < p_keep <= 1.0):
        raise ParameterError(f"p_keep must be in (0, 1], got {p_keep}")
    rng = np.random.default_rng(rng_seed)
    cells = (rng.random((gt, gy, gx)) < p_keep).astype(np.float32)
    out = _upsample_linear(cells, 0, t)
    out = _upsample_linear(out, 1, h)
    out = _upsample_linear(out, 2, w)
    return np.clip(out, 0.0, 1.0).astype(np.float32)


def region_mean_color(video, seg):
    """Channel-wise mean color of each region, shape (r, c)."""
    if not isinstance(video, VideoTensor):
        raise ParameterError("region_mean_color expects a VideoTensor")
    if seg.shape != (video.t, video.h, video.w):
        raise ParameterError(
            f"segmentation {seg.shape} does not match video {(video.t, video.h, video.w)}")
    flat = seg.labels.ravel()
    counts = np.bincount(flat, minlength=seg.r).astype(np.float64)
    means = np.empty((seg.r, video.c), dtype=np.float64)
    for ch in range(video.c):
        sums = np.bincount(flat, weights=video.data[..., ch].ravel(), minlength=seg.r)
        means[:, ch] = sums / counts
    return means


def write_segmentation(seg, path):
    """Persist labels in RVX format (dtype code 2, uint32, c = 1)."""
    t, h, w = seg.shape
    _write_rvx(path, (t, h, w, 1), RVX_DTYPE_U32,
               seg.labels.astype("<u4")[..., None])


def read_segmentation(path):
    dims, code, arr = _read_rvx(path)
    if code != RVX_DTYPE_U32:
        from .errors import FormatError
        raise FormatError(f"{path}: expected label map (dtype 2), got {code}")
    labels = arr[..., 0].astype(np.int32)
    return SegmentationMap(labels, int(labels.max()) + 1)
