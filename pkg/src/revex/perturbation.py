"""Feature selection, soft-mask construction, and feature removal.

A coalition is a binary keep/remove vector over regions (1 keeps the region
untouched).  Coalitions become soft masks by rasterizing onto the voxel grid
and blurring with a small "fade" kernel that removes hard occlusion edges;
a removal operator then blends the original video with a fill (blurred copy,
constant color, or per-region mean) under that mask.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .errors import ParameterError
from .segmentation import region_mean_color
from .tensor import BlurParams, VideoTensor, blur_volume, gaussian_kernel_1d

SAMPLING_KINDS = ("bernoulli", "leave_one_out", "keep_one", "shap_kernel")
REMOVAL_KINDS = ("blur", "constant", "region_mean")

DEFAULT_REMOVAL_BLUR = BlurParams(sigma_space=10.0, sigma_time=2.0, truncation=2.0)


@dataclass(frozen=True)
class SamplingStrategy:
    """Which coalitions to draw: i.i.d. Bernoulli keeps, exhaustive
    leave-one-out / keep-one, or Shapley-kernel-distributed sizes."""

    kind: str
    n_samples: int = 1000
    p: float = 0.5  # removal probability (bernoulli only)
    rng_seed: int = 0

    def __post_init__(self):
        if self.kind not in SAMPLING_KINDS:
            raise ParameterError(f"unknown sampling kind {self.kind!r}")
        if self.n_samples < 1:
            raise ParameterError(f"n_samples must be >= 1, got {self.n_samples}")
        if self.kind == "bernoulli" and not (0.0 < self.p < 1.0):
            raise ParameterError(f"p must be in (0, 1), got {self.p}")


@dataclass(frozen=True)
class RemovalOperator:
    """How removed regions are filled.

    fade softens the binary keep mask before blending; by default it uses
    half the removal blur's sigmas so occlusion edges fade in over a smaller
    scale than the removal itself.
    """

    kind: str = "blur"
    blur: BlurParams = field(default_factory=lambda: DEFAULT_REMOVAL_BLUR)
    color: tuple = (0.0, 0.0, 0.0)
    fade: BlurParams | None = None

    def __post_init__(self):
        if self.kind not in REMOVAL_KINDS:
            raise ParameterError(f"unknown removal kind {self.kind!r}")
        if self.kind == "constant":
            if any((not math.isfinite(v)) or v < 0.0 or v > 1.0 for v in self.color):
                raise ParameterError(f"constant color must be in [0,1], got {self.color}")

    def fade_params(self):
        """The mask-softening blur; defaults to half the removal sigmas."""
        if self.fade is not None:
            return self.fade
        return self.blur.scaled(0.5)


def shap_kernel_size_probs(r):
    """P(coalition size = k) proportional to (r-1) / (k * (r-k)), k in 1..r-1."""
    ks = np.arange(1, r)
    w = (r - 1) / (ks * (r - ks))
    return w / w.sum()


def sample_coalitions(r, strategy):
    """Draw coalitions as an (n, r) uint8 matrix (rows are coalitions).

    bernoulli      n_samples rows, each region kept independently w.p. 1-p
    leave_one_out  exactly r rows; row k removes only region k
    keep_one       exactly r rows; row k keeps only region k
    shap_kernel    n_samples rows; sizes follow the Shapley kernel's size
                   distribution, members uniform given the size; the empty
                   and full coalitions never occur
    """
    if r < 1:
        raise ParameterError(f"region count must be >= 1, got {r}")
    if strategy.kind == "leave_one_out":
        return (np.ones((r, r), dtype=np.uint8) - np.eye(r, dtype=np.uint8))
    if strategy.kind == "keep_one":
        return np.eye(r, dtype=np.uint8)
    rng = np.random.default_rng(strategy.rng_seed)
    if strategy.kind == "bernoulli":
        return (rng.random((strategy.n_samples, r)) >= strategy.p).astype(np.uint8)
    # shap_kernel
    if r < 2:
        raise ParameterError("shap_kernel sampling needs at least 2 regions")
    probs = shap_kernel_size_probs(r)
    sizes = rng.choice(np.arange(1, r), size=strategy.n_samples, p=probs)
    out = np.zeros((strategy.n_samples, r), dtype=np.uint8)
    for i, k in enumerate(sizes):
        out[i, rng.permutation(r)[:k]] = 1
    return out


def _as_coalition(z, r):
    z = np.asarray(z)
    if z.ndim != 1 or z.shape[0] != r:
        raise ParameterError(f"coalition length {z.shape} does not match r={r}")
    return z.astype(np.uint8)


def coalition_to_soft_mask(z, seg, fade=None):
    """Rasterize a coalition to a voxel mask and soften it with `fade`.

    Returns (t, h, w) float32 in [0, 1]; 1 keeps the original voxel.  The
    all-ones coalition maps to an exactly-ones mask.
    """
    z = _as_coalition(z, seg.r)
    binary = z.astype(np.float32)[seg.labels]
    if fade is None:
        return binary
    return np.clip(blur_volume(binary, fade), 0.0, 1.0)


def region_fill(video, op, seg=None):
    """The (t, h, w, c) fill volume a removal operator substitutes in."""
    if op.kind == "blur":
        return np.clip(blur_volume(video.data, op.blur), 0.0, 1.0)
    if op.kind == "constant":
        color = np.asarray(op.color, dtype=np.float32)[:video.c]
        if color.size != video.c:
            raise ParameterError(
                f"constant color has {color.size} channels, video has {video.c}")
        return np.broadcast_to(color, video.shape).copy()
    if seg is None:
        raise ParameterError("region_mean removal requires a segmentation")
    means = region_mean_color(video, seg).astype(np.float32)
    return means[seg.labels]


def compose(video_data, mask, fill):
    """Blend original and fill under a soft keep mask: m*v + (1-m)*fill."""
    m = mask[..., None]
    out = m * video_data + (1.0 - m) * fill
    return np.clip(out, 0.0, 1.0)


def remove_features(video, mask, op, seg=None):
    """Apply a removal operator under a soft mask; dims are preserved.

    mask == 1 keeps voxels bit-exactly; mask == 0 substitutes the fill.
    """
    if not isinstance(video, VideoTensor):
        raise ParameterError("remove_features expects a VideoTensor")
    mask = np.asarray(mask, dtype=np.float32)
    if mask.shape != (video.t, video.h, video.w):
        raise ParameterError(
            f"mask shape {mask.shape} does not match video {(video.t, video.h, video.w)}")
    if mask.min() < 0.0 or mask.max() > 1.0:
        raise ParameterError("mask values must lie in [0, 1]")
    fill = region_fill(video, op, seg)
    return VideoTensor(compose(video.data, mask, fill))


def occlusion_windows(t, h, w, kernel, strides):
    """Sliding occlusion windows: origins per axis are evenly spaced from 0
    to the far edge (stride counts, not step sizes).

    Returns a list of (t0, t1, y0, y1, x0, x1) half-open cuboids, ordered by
    (t, y, x) origin.
    """
    kt, kh, kw = kernel
    st, sh, sw = strides
    if kt > t or kh > h or kw > w:
        raise ParameterError(f"kernel {kernel} exceeds volume dims {(t, h, w)}")
    if min(kt, kh, kw) < 1:
        raise ParameterError(f"kernel dims must be >= 1, got {kernel}")
    if min(st, sh, sw) < 1:
        raise ParameterError(f"strides must be >= 1, got {strides}")

    def origins(dim, k, s):
        if s == 1:
            return [0]
        return [int(round(i * (dim - k) / (s - 1))) for i in range(s)]

    windows = []
    for t0 in origins(t, kt, st):
        for y0 in origins(h, kh, sh):
            for x0 in origins(w, kw, sw):
                windows.append((t0, t0 + kt, y0, y0 + kh, x0, x0 + kw))
    return windows


def window_soft_mask(dims, window, fade=None):
    """Soft keep-mask removing one cuboid window.

    The faded mask of a cuboid factorizes into per-axis 1-D blurred interval
    profiles, so this is exact and cheap.
    """
    profiles = []
    for dim, lo, hi in zip(dims, window[0::2], window[1::2]):
        prof = np.zeros(dim, dtype=np.float32)
        prof[lo:hi] = 1.0
        profiles.append(prof)
    if fade is not None:
        sigmas = (fade.sigma_time, fade.sigma_space, fade.sigma_space)
        for i, sigma in enumerate(sigmas):
            if sigma > 0:
                k = gaussian_kernel_1d(sigma, fade.truncation)
                profiles[i] = _kernels.correlate1d(
                    profiles[i].reshape(1, -1, 1), k, 1).ravel()
    removed = np.einsum("t,y,x->tyx", *profiles)
    return np.clip(1.0 - removed, 0.0, 1.0).astype(np.float32)


def blurred_region_indicators(seg, fade=None):
    """Per-region faded indicator stack, shape (r, t*h*w) float32.

    Row k is the fade-blur of region k's binary indicator; because blurring
    is linear and regions partition the volume, the soft mask of any
    coalition z is 1 - sum_{k removed} row_k, which enables batched mask
    construction as a matrix product.
    """
    t, h, w = seg.shape
    out = np.empty((seg.r, t * h * w), dtype=np.float32)
    for k in range(seg.r):
        ind = (seg.labels == k).astype(np.float32)
        if fade is not None:
            ind = blur_volume(ind, fade)
        out[k] = ind.ravel()
    return out


def coalition_masks_from_indicators(coalitions, indicators):
    """Batched soft masks (n, t*h*w) = 1 - (1-z) @ indicators, clipped."""
    removed = (1.0 - coalitions.astype(np.float32))
    masks = 1.0 - removed @ indicators
    return np.clip(masks, 0.0, 1.0)
