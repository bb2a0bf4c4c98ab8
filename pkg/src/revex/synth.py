"""Synthetic test scenes with planted ground truth.

A scene is band-limited background noise with a high-frequency textured box
pasted in; the matching predictor measures surviving detail inside the box,
so explanations, curves, and localization metrics all have an analytically
known right answer.
"""

import math
from dataclasses import dataclass

import numpy as np

from .errors import ParameterError
from .evaluation import GroundTruthTrack
from .tensor import BlurParams, VideoTensor, blur_volume

SYNTH_PREDICTOR_BLUR = BlurParams(sigma_space=4.0, sigma_time=1.0, truncation=2.0)


@dataclass(frozen=True)
class SynthScene:
    video: VideoTensor
    track: GroundTruthTrack
    box_hull: tuple  # (t0, t1, y0, y1, x0, x1) enclosing the whole track
    gt_saliency: np.ndarray  # indicator of the track, float32 (t, h, w)


def synth_scene(t=16, h=112, w=112, c=3, box_frac=0.1, seed=0, track_seed=None,
                motion=0):
    """Build a textured scene with a planted high-frequency box.

    The noise field derives from `seed`; the box position (and drift, when
    `motion` > 0 pixels/frame) derives from `track_seed` (defaults to seed),
    so two scenes can share a track while differing in texture.
    """
    if not (0.0 < box_frac < 0.5):
        raise ParameterError(f"box_frac must be in (0, 0.5), got {box_frac}")
    noise_rng = np.random.default_rng([seed, 0])
    track_rng = np.random.default_rng([seed if track_seed is None else track_seed, 1])

    background = noise_rng.random((t, h, w, c), dtype=np.float32)
    background = blur_volume(background, BlurParams(3.0, 1.0))
    lo, hi = background.min(), background.max()
    background = 0.15 + 0.7 * (background - lo) / max(hi - lo, 1e-9)

    side = max(4, int(round(math.sqrt(box_frac * h * w))))
    if side >= min(h, w):
        raise ParameterError("box_frac too large for the spatial dims")
    y0 = int(track_rng.integers(0, h - side + 1))
    x0 = int(track_rng.integers(0, w - side + 1))
    vy = vx = 0
    if motion > 0:
        vy = int(track_rng.integers(-motion, motion + 1))
        vx = int(track_rng.integers(-motion, motion + 1))

    texture = noise_rng.random((t, side, side, c), dtype=np.float32)
    video = background.copy()
    boxes = {}
    for ft in range(t):
        by = min(max(y0 + vy * ft, 0), h - side)
        bx = min(max(x0 + vx * ft, 0), w - side)
        video[ft, by:by + side, bx:bx + side] = texture[ft]
        boxes[ft] = (by, by + side, bx, bx + side)

    track = GroundTruthTrack(boxes)
    ys = [b[0] for b in boxes.values()]
    xs = [b[2] for b in boxes.values()]
    hull = (0, t, min(ys), max(ys) + side, min(xs), max(xs) + side)
    gt = track.mask((t, h, w)).astype(np.float32)
    return SynthScene(VideoTensor(np.clip(video, 0.0, 1.0)), track, hull, gt)


def region_weights_from_box(seg, hull, total=0.9):
    """Grid-region weights proportional to overlap with the box hull."""
    t0, t1, y0, y1, x0, x1 = hull
    boxmask = np.zeros(seg.shape, dtype=bool)
    boxmask[t0:t1, y0:y1, x0:x1] = True
    overlap = np.bincount(seg.labels[boxmask].ravel(), minlength=seg.r).astype(float)
    if overlap.sum() <= 0:
        raise ParameterError("box hull does not intersect the segmentation")
    return total * overlap / overlap.sum()
