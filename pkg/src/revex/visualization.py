"""Render saliency volumes as heat-map overlays.

The overlay blends a colormapped saliency over a desaturated copy of the
input (scene colors under a heat map are ambiguous otherwise), weighting by
alpha times the normalized saliency itself, so irrelevant voxels show the
plain grayscale frame.
"""

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ParameterError
from .explainers import RegionRelevance, SaliencyVolume
from .tensor import VideoTensor

# Colormap lookup tables are generated from these fixed anchors at import
# time, so renders are bit-reproducible.  "heat" runs cold blue -> warm red
# (jet-like); "mono" is a monotone-luminance map (viridis-like anchors).
_HEAT_ANCHORS = (
    (0.000, (0.0, 0.0, 0.5)),
    (0.125, (0.0, 0.0, 1.0)),
    (0.375, (0.0, 1.0, 1.0)),
    (0.625, (1.0, 1.0, 0.0)),
    (0.875, (1.0, 0.0, 0.0)),
    (1.000, (0.5, 0.0, 0.0)),
)
_MONO_ANCHORS = (
    (0.00, (0.267, 0.005, 0.329)),
    (0.25, (0.229, 0.322, 0.546)),
    (0.50, (0.128, 0.565, 0.551)),
    (0.75, (0.369, 0.789, 0.383)),
    (1.00, (0.993, 0.906, 0.144)),
)


def _build_lut(anchors):
    xs = np.array([a[0] for a in anchors])
    cols = np.array([a[1] for a in anchors])
    grid = np.linspace(0.0, 1.0, 256)
    lut = np.stack([np.interp(grid, xs, cols[:, ch]) for ch in range(3)], axis=1)
    return lut.astype(np.float32)


COLORMAPS = {"heat": _build_lut(_HEAT_ANCHORS), "mono": _build_lut(_MONO_ANCHORS)}


@dataclass(frozen=True)
class RenderConfig:
    clamp_negative: bool = True
    stretch: bool = True
    top_n: int | None = None
    min_relevance: float | None = None
    cumulative_cutoff: float | None = None
    alpha: float = 0.6
    colormap: str = "heat"

    def __post_init__(self):
        active = [v is not None for v in
                  (self.top_n, self.min_relevance, self.cumulative_cutoff)]
        if sum(active) > 1:
            raise ParameterError(
                "at most one of top_n / min_relevance / cumulative_cutoff")
        if not (0.0 <= self.alpha <= 1.0):
            raise ParameterError(f"alpha must be in [0, 1], got {self.alpha}")
        if self.colormap not in COLORMAPS:
            raise ParameterError(f"unknown colormap {self.colormap!r}")
        if self.cumulative_cutoff is not None and not (0.0 < self.cumulative_cutoff <= 1.0):
            raise ParameterError("cumulative_cutoff must be in (0, 1]")
        if self.top_n is not None and self.top_n < 0:
            raise ParameterError("top_n must be >= 0")


def normalize_saliency(volume, cfg=None):
    """Clamp negatives (if configured), then min-max stretch to [0, 1].

    Constant volumes map to all zeros rather than inventing a hot spot.
    """
    cfg = cfg or RenderConfig()
    data = volume.data.astype(np.float64)
    if cfg.clamp_negative:
        data = np.maximum(data, 0.0)
    if cfg.stretch:
        lo, hi = float(data.min()), float(data.max())
        data = np.zeros_like(data) if hi <= lo else (data - lo) / (hi - lo)
    else:
        data = np.clip(data, 0.0, 1.0)
    return SaliencyVolume(data.astype(np.float32),
                          dict(volume.provenance, normalized=True,
                               clamped=cfg.clamp_negative))


def filter_regions(relevance, cfg):
    """Zero out non-selected regions.

    top_n keeps the n largest values; min_relevance keeps values >= the
    threshold; cumulative_cutoff keeps the largest values until their share
    of the total positive relevance reaches the cutoff.
    """
    values = relevance.values.copy()
    keep = np.ones(values.shape[0], dtype=bool)
    if cfg.top_n is not None:
        keep[:] = False
        order = np.argsort(-values, kind="stable")
        keep[order[:cfg.top_n]] = True
    elif cfg.min_relevance is not None:
        keep = values >= cfg.min_relevance
    elif cfg.cumulative_cutoff is not None:
        keep[:] = False
        total = np.maximum(values, 0.0).sum()
        if total > 0:
            acc = 0.0
            for idx in np.argsort(-values, kind="stable"):
                if values[idx] <= 0:
                    break
                keep[idx] = True
                acc += values[idx]
                if acc >= cfg.cumulative_cutoff * total - 1e-12:
                    break
    values[~keep] = 0.0
    return RegionRelevance(values, relevance.method, relevance.class_index)


def _grayscale(video):
    if video.c == 1:
        return np.repeat(video.data, 3, axis=-1)
    weights = np.array([0.299, 0.587, 0.114], dtype=np.float32)
    lum = video.data @ weights
    return np.repeat(lum[..., None], 3, axis=-1)


def colormap_rgb(saliency01, name="heat"):
    """Map normalized saliency to RGB through the fixed 256-entry table."""
    lut = COLORMAPS[name]
    idx = np.clip(np.round(np.asarray(saliency01) * 255.0), 0, 255).astype(np.int32)
    return lut[idx]


def composite(video, saliency, cfg=None):
    """Overlay: (1 - alpha*s) * grayscale(v) + alpha*s * colormap(s)."""
    cfg = cfg or RenderConfig()
    s = np.asarray(saliency.data if isinstance(saliency, SaliencyVolume)
                   else saliency, dtype=np.float32)
    if s.shape != (video.t, video.h, video.w):
        raise ParameterError("saliency dims do not match the video")
    if s.min() < 0.0 or s.max() > 1.0:
        raise ParameterError("composite expects normalized saliency in [0, 1]")
    weight = (cfg.alpha * s)[..., None]
    out = (1.0 - weight) * _grayscale(video) + weight * colormap_rgb(s, cfg.colormap)
    return VideoTensor(np.clip(out, 0.0, 1.0))


def boundary_overlay(video, seg, color=(1.0, 1.0, 0.0)):
    """Paint region boundaries (6-neighbor label changes) onto the video."""
    labels = seg.labels
    edge = np.zeros(labels.shape, dtype=bool)
    for axis in range(3):
        left = [slice(None)] * 3
        right = [slice(None)] * 3
        left[axis] = slice(0, -1)
        right[axis] = slice(1, None)
        diff = labels[tuple(left)] != labels[tuple(right)]
        edge[tuple(left)] |= diff
        edge[tuple(right)] |= diff
    out = (np.repeat(video.data, 3, axis=-1) if video.c == 1
           else video.data.copy())
    out[edge] = np.asarray(color, dtype=np.float32)
    return VideoTensor(out)


def contact_sheet(video, path):
    """Write a first/middle/last-frame strip as one PNG."""
    from PIL import Image

    frames = [0, video.t // 2, video.t - 1]
    data = np.round(video.data * 255.0).astype(np.uint8)
    strip = np.concatenate([data[i] for i in frames], axis=1)
    if strip.shape[-1] == 1:
        strip = strip[..., 0]
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    Image.fromarray(strip).save(path)
