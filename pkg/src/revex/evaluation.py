"""Five explanation-quality metrics: deletion AUC, insertion AUC, average
drop, pointing game, and threshold-swept IoU localization.

Deletion/insertion perturb voxels in decreasing relevance order with hard
selection masks, so the curve endpoints are bit-identical to plain predictor
calls on the unperturbed and fully-filled videos.
"""

import csv
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ParameterError, UndefinedDropError
from .perturbation import RemovalOperator, region_fill
from .predictors import predict_batch
from .tensor import VideoTensor

IOU_THRESHOLDS = np.round(np.arange(0, 21) * 0.05, 2)

METRIC_CSV_COLUMNS = ("video_id", "method", "deletion_auc", "insertion_auc",
                      "avg_drop_pct", "pointing_hit", "best_iou",
                      "best_threshold")


@dataclass(frozen=True)
class PerturbationCurve:
    """Confidence as a function of the perturbed-voxel fraction."""

    fractions: np.ndarray
    confidences: np.ndarray

    def __post_init__(self):
        fr = np.ascontiguousarray(self.fractions, dtype=np.float64)
        cf = np.ascontiguousarray(self.confidences, dtype=np.float64)
        if fr.ndim != 1 or fr.shape != cf.shape or fr.size < 2:
            raise ParameterError("curve needs matching 1-D fractions/confidences")
        if fr[0] != 0.0 or fr[-1] != 1.0 or (np.diff(fr) <= 0).any():
            raise ParameterError("fractions must increase strictly from 0 to 1")
        if cf.min() < 0.0 or cf.max() > 1.0:
            raise ParameterError("confidences must lie in [0, 1]")
        object.__setattr__(self, "fractions", fr)
        object.__setattr__(self, "confidences", cf)


@dataclass(frozen=True)
class GroundTruthTrack:
    """Per-frame optional axis-aligned boxes (y0, y1, x0, x1), half-open."""

    boxes: dict

    def __post_init__(self):
        if not self.boxes:
            raise ParameterError("ground truth needs at least one annotated frame")
        clean = {}
        for t, box in self.boxes.items():
            y0, y1, x0, x1 = (int(v) for v in box)
            if not (0 <= y0 < y1 and 0 <= x0 < x1 and int(t) >= 0):
                raise ParameterError(f"degenerate box {box} at frame {t}")
            clean[int(t)] = (y0, y1, x0, x1)
        object.__setattr__(self, "boxes", clean)

    @classmethod
    def from_json(cls, path):
        raw = json.loads(Path(path).read_text())
        return cls({entry["t"]: tuple(entry["box"]) for entry in raw["frames"]})

    def to_json(self, path):
        frames = [{"t": t, "box": list(box)} for t, box in sorted(self.boxes.items())]
        Path(path).write_text(json.dumps({"frames": frames}, indent=2) + "\n")

    def mask(self, dims):
        """Boolean (t, h, w) mask of all boxes; validates bounds."""
        t, h, w = dims
        out = np.zeros(dims, dtype=bool)
        for ft, (y0, y1, x0, x1) in self.boxes.items():
            if ft >= t or y1 > h or x1 > w:
                raise ParameterError(
                    f"annotation (t={ft}, box={(y0, y1, x0, x1)}) exceeds dims {dims}")
            out[ft, y0:y1, x0:x1] = True
        return out


@dataclass(frozen=True)
class LocalizationResult:
    hit: bool
    best_iou: float
    best_threshold: float


def _relevance_order(saliency):
    """Voxel indices by descending saliency; ties keep (t, y, x) scan order."""
    return np.argsort(-saliency.ravel(), kind="stable")


def _curve(video, saliency, predictor, class_index, steps, removal, insertion):
    if not isinstance(video, VideoTensor):
        raise ParameterError("curves expect a VideoTensor")
    saliency = np.asarray(saliency, dtype=np.float32)
    if saliency.shape != (video.t, video.h, video.w):
        raise ParameterError(
            f"saliency {saliency.shape} does not match video "
            f"{(video.t, video.h, video.w)}")
    if steps < 2:
        raise ParameterError(f"steps must be >= 2, got {steps}")
    removal = removal or RemovalOperator("blur")
    fill = region_fill(video, removal)
    order = _relevance_order(saliency)
    n_vox = order.size
    fractions = np.arange(steps + 1) / steps
    batch = np.empty((steps + 1,) + video.shape, dtype=np.float32)
    for i, f in enumerate(fractions):
        count = int(round(f * n_vox))
        selected = np.zeros(n_vox, dtype=bool)
        selected[order[:count]] = True
        selected = selected.reshape(saliency.shape)[..., None]
        if insertion:
            # restore the most relevant voxels of the original into the fill
            batch[i] = np.where(selected, video.data, fill)
        else:
            batch[i] = np.where(selected, fill, video.data)
    confidences = predict_batch(predictor, batch)[:, class_index]
    return PerturbationCurve(fractions, np.clip(confidences, 0.0, 1.0))


def deletion_curve(video, saliency, predictor, class_index=0, steps=20,
                   removal=None):
    """Remove the most relevant voxels first; good saliency drops fast."""
    return _curve(video, saliency, predictor, class_index, steps, removal,
                  insertion=False)


def insertion_curve(video, saliency, predictor, class_index=0, steps=20,
                    removal=None):
    """Restore the most relevant voxels into the fill; good saliency rises fast."""
    return _curve(video, saliency, predictor, class_index, steps, removal,
                  insertion=True)


def auc(curve):
    """Trapezoidal area under the curve over the [0, 1] fraction axis."""
    return float(np.trapezoid(curve.confidences, curve.fractions))


def minmax_normalize(saliency):
    """Min-max map to [0, 1]; constant input maps to all zeros."""
    saliency = np.asarray(saliency, dtype=np.float64)
    lo, hi = float(saliency.min()), float(saliency.max())
    if hi <= lo:
        return np.zeros_like(saliency, dtype=np.float32)
    return ((saliency - lo) / (hi - lo)).astype(np.float32)


def _ensure_unit_range(saliency):
    """Callers are expected to pass min-max normalized saliency; anything
    already inside [0, 1] is used untouched (so a constant 0.5 stays 0.5),
    out-of-range input gets min-max normalized as a courtesy."""
    saliency = np.asarray(saliency, dtype=np.float32)
    if saliency.min() >= 0.0 and saliency.max() <= 1.0:
        return saliency
    return minmax_normalize(saliency)


def average_drop(video, saliency, predictor, class_index=0, removal=None):
    """Percent confidence drop when blending toward the fill inversely to
    relevance: perturbed = s*v + (1-s)*fill with s min-max normalized.

    One perturbed predictor pass; returns 100 * max(0, p0 - p~) / p0.
    """
    if not isinstance(video, VideoTensor):
        raise ParameterError("average_drop expects a VideoTensor")
    s = _ensure_unit_range(saliency)
    if s.shape != (video.t, video.h, video.w):
        raise ParameterError("saliency dims do not match the video")
    removal = removal or RemovalOperator("blur")
    fill = region_fill(video, removal)
    blended = np.clip(s[..., None] * video.data + (1.0 - s[..., None]) * fill,
                      0.0, 1.0)
    confs = predict_batch(predictor, np.stack([video.data, blended]))
    p0, p_pert = float(confs[0, class_index]), float(confs[1, class_index])
    if p0 <= 0.0:
        raise UndefinedDropError("average drop undefined: base prediction is 0")
    return 100.0 * max(0.0, p0 - p_pert) / p0


def pointing_game(saliency, track):
    """Hit iff the global saliency maximum falls inside that frame's box.

    Ties resolve to the earliest voxel in (t, y, x) scan order.  Frames
    without an annotation are misses.
    """
    saliency = np.asarray(saliency)
    t, y, x = np.unravel_index(int(np.argmax(saliency)), saliency.shape)
    box = track.boxes.get(int(t))
    if box is None:
        return False
    y0, y1, x0, x1 = box
    return bool(y0 <= y < y1 and x0 <= x < x1)


def pointing_accuracy(hits):
    hits = list(hits)
    if not hits:
        raise ParameterError("no pointing-game results to aggregate")
    return 100.0 * sum(bool(h) for h in hits) / len(hits)


def best_iou(saliency, track):
    """Best IoU across binarization thresholds {0, 0.05, ..., 1}.

    Saliency already in [0, 1] is binarized as given (out-of-range input is
    min-max normalized first).  At threshold 0 the binarization
    is the strictly-positive support (otherwise every voxel would qualify
    and the threshold would be meaningless); empty binarizations count as
    IoU 0.  Only annotated frames contribute to intersection and union.
    """
    saliency = np.asarray(saliency)
    if saliency.ndim != 3:
        raise ParameterError("saliency must be (t, h, w)")
    s = _ensure_unit_range(saliency)
    gt_mask = track.mask(s.shape)
    annotated = sorted(k for k in track.boxes if k < s.shape[0])
    if not annotated:
        raise ParameterError("no annotated frames inside the volume")
    s_ann = s[annotated]
    gt_ann = gt_mask[annotated]
    best_val, best_th = 0.0, float(IOU_THRESHOLDS[0])
    for th in IOU_THRESHOLDS:
        binar = (s_ann > 0.0) if th == 0.0 else (s_ann >= th)
        inter = float(np.logical_and(binar, gt_ann).sum())
        union = float(np.logical_or(binar, gt_ann).sum())
        iou = inter / union if union > 0 else 0.0
        if iou > best_val:
            best_val, best_th = iou, float(th)
    return LocalizationResult(hit=pointing_game(saliency, track),
                              best_iou=best_val, best_threshold=best_th)


def iou_accuracy(results, threshold=0.5):
    results = list(results)
    if not results:
        raise ParameterError("no localization results to aggregate")
    return 100.0 * sum(res.best_iou >= threshold for res in results) / len(results)


def average_iou(results):
    results = list(results)
    if not results:
        raise ParameterError("no localization results to aggregate")
    return 100.0 * float(np.mean([res.best_iou for res in results]))


def write_metrics_csv(rows, path):
    """Write metric rows (dicts keyed by METRIC_CSV_COLUMNS) to a CSV file."""
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=METRIC_CSV_COLUMNS)
        writer.writeheader()
        for row in rows:
            writer.writerow({col: row.get(col, "") for col in METRIC_CSV_COLUMNS})
