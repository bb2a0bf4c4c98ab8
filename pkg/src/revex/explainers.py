"""Summary techniques: map (coalitions, predictions) to region or voxel
relevance.

Six methods are provided -- a weighted-ridge linear surrogate (LIME), a
Shapley-kernel weighted least squares (Kernel SHAP), kept-mask averaging
(RISE), leave-one-out differences (LOCO), keep-one probing (UP), and sliding
occlusion (SOS) -- plus an exact brute-force Shapley solver that serves as
the estimation oracle.  All of them are deterministic, pure aggregations of
their inputs.
"""

import hashlib
import json
import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ParameterError, SolverError
from .tensor import blur_volume

logger = logging.getLogger(__name__)

METHOD_NAMES = ("lime", "kernel_shap", "rise", "loco", "up", "sos",
                "shapley_exact")


@dataclass(frozen=True)
class RegionRelevance:
    """Signed relevance per region for one class."""

    values: np.ndarray
    method: str
    class_index: int = 0

    def __post_init__(self):
        values = np.ascontiguousarray(self.values, dtype=np.float64)
        if values.ndim != 1:
            raise ParameterError(f"relevance must be a vector, got {values.shape}")
        if not np.all(np.isfinite(values)):
            raise ParameterError("relevance values must be finite")
        values.flags.writeable = False
        object.__setattr__(self, "values", values)

    @property
    def r(self):
        return self.values.shape[0]


@dataclass(frozen=True)
class SaliencyVolume:
    """Per-voxel relevance over (t, h, w) plus provenance for reproducibility."""

    data: np.ndarray
    provenance: dict = field(default_factory=dict)

    def __post_init__(self):
        data = np.ascontiguousarray(self.data, dtype=np.float32)
        if data.ndim != 3:
            raise ParameterError(f"saliency must be (t,h,w), got {data.shape}")
        if not np.all(np.isfinite(data)):
            raise ParameterError("saliency values must be finite")
        data.flags.writeable = False
        object.__setattr__(self, "data", data)

    @property
    def shape(self):
        return self.data.shape


def config_hash(config):
    """Stable short hash of a JSON-serializable config record."""
    blob = json.dumps(config, sort_keys=True, default=str).encode("utf-8")
    return hashlib.sha256(blob).hexdigest()[:16]


@dataclass(frozen=True)
class LimeConfig:
    ridge_lambda: float = 1e-3
    kernel_width: float = 0.25  # over the removed-fraction distance

    def __post_init__(self):
        if self.ridge_lambda < 0:
            raise ParameterError("ridge_lambda must be >= 0")
        if self.kernel_width <= 0:
            raise ParameterError("kernel_width must be > 0")


def _check_samples(coalitions, preds):
    coalitions = np.asarray(coalitions, dtype=np.float64)
    preds = np.asarray(preds, dtype=np.float64)
    if coalitions.ndim != 2:
        raise ParameterError(f"coalitions must be (n, r), got {coalitions.shape}")
    if preds.shape != (coalitions.shape[0],):
        raise ParameterError(
            f"{coalitions.shape[0]} coalitions but {preds.shape} predictions")
    return coalitions, preds


def explain_lime(coalitions, preds, cfg=None, class_index=0):
    """Weighted ridge regression of predictions on keep/remove vectors.

    Sample i is weighted exp(-d_i^2 / kernel_width^2) where d_i is the
    fraction of regions it removes; coefficients (without the intercept) are
    the region relevances.
    """
    cfg = cfg or LimeConfig()
    z, y = _check_samples(coalitions, preds)
    n, r = z.shape
    removed_fraction = 1.0 - z.mean(axis=1)
    weights = np.exp(-(removed_fraction ** 2) / cfg.kernel_width ** 2)
    design = np.concatenate([np.ones((n, 1)), z], axis=1)
    wd = design * weights[:, None]
    normal = design.T @ wd
    penalty = np.eye(r + 1) * cfg.ridge_lambda
    penalty[0, 0] = 0.0  # intercept stays unpenalized
    rhs = wd.T @ y
    try:
        beta = np.linalg.solve(normal + penalty, rhs)
    except np.linalg.LinAlgError as exc:
        raise SolverError(
            "singular normal matrix; sample more coalitions or set "
            "ridge_lambda > 0") from exc
    return RegionRelevance(beta[1:], "lime", class_index)


def shapley_kernel_weight(r, size):
    """pi(z) = (r-1) / (C(r, |z|) * |z| * (r-|z|)) for 0 < |z| < r.

    Evaluated through log-gamma so large region counts neither overflow the
    binomial coefficient nor lose the relative weighting.
    """
    r, size = int(r), int(size)
    if size <= 0 or size >= r:
        raise ParameterError("Shapley kernel weight undefined for empty/full")
    log_comb = (math.lgamma(r + 1) - math.lgamma(size + 1)
                - math.lgamma(r - size + 1))
    return math.exp(math.log(r - 1) - log_comb - math.log(size)
                    - math.log(r - size))


def explain_kernel_shap(coalitions, preds, f_empty, f_full, class_index=0):
    """Shapley values by kernel-weighted least squares.

    The efficiency constraint sum(phi) = f_full - f_empty is enforced by
    eliminating the last region's coefficient, so it holds exactly.  Under
    full coalition enumeration this reproduces exact Shapley values.
    """
    z, y = _check_samples(coalitions, preds)
    n, r = z.shape
    if r < 2:
        raise ParameterError("kernel SHAP needs at least 2 regions")
    sizes = z.sum(axis=1).astype(int)
    if (sizes == 0).any() or (sizes == r).any():
        raise ParameterError("samples must exclude the empty and full coalitions")
    weights = np.array([shapley_kernel_weight(r, s) for s in sizes])
    delta = f_full - f_empty
    y_adj = (y - f_empty) - z[:, -1] * delta
    x_adj = z[:, :-1] - z[:, -1:]
    wd = x_adj * weights[:, None]
    normal = x_adj.T @ wd
    rhs = wd.T @ y_adj
    try:
        head = np.linalg.solve(normal, rhs)
    except np.linalg.LinAlgError as exc:
        raise SolverError(
            "underdetermined system: too few distinct coalitions for the "
            "region count") from exc
    phi = np.empty(r)
    phi[:-1] = head
    phi[-1] = delta - head.sum()
    return RegionRelevance(phi, "kernel_shap", class_index)


def brute_force_shapley(coalition_value, r, class_index=0):
    """Exact Shapley values by enumerating all 2^r coalitions (r <= 12).

    coalition_value takes a (r,) uint8 keep vector and returns the model's
    value for that coalition.
    """
    if r < 1:
        raise ParameterError("region count must be >= 1")
    if r > 12:
        raise ParameterError(f"brute force capped at r=12 (2^r evaluations), got {r}")
    values = np.empty(1 << r)
    z = np.empty(r, dtype=np.uint8)
    for mask in range(1 << r):
        for k in range(r):
            z[k] = (mask >> k) & 1
        values[mask] = coalition_value(z.copy())
    fact = [math.factorial(i) for i in range(r + 1)]
    phi = np.zeros(r)
    for mask in range(1 << r):
        s = bin(mask).count("1")
        for k in range(r):
            if mask & (1 << k):
                continue
            weight = fact[s] * fact[r - s - 1] / fact[r]
            phi[k] += weight * (values[mask | (1 << k)] - values[mask])
    return RegionRelevance(phi, "shapley_exact", class_index)


def explain_rise(masks, preds, class_index=0):
    """Kept-weighted mean prediction per cell.

    masks is either an (n, r) coalition matrix (region relevance out) or an
    (n, t, h, w) stack of soft masks (voxel saliency out).  Cells never kept
    by any sample fall back to the mean prediction and are logged.
    """
    masks = np.asarray(masks, dtype=np.float32)
    preds = np.asarray(preds, dtype=np.float64)
    if masks.ndim not in (2, 4):
        raise ParameterError(f"masks must be (n,r) or (n,t,h,w), got {masks.shape}")
    if masks.shape[0] != preds.shape[0] or masks.shape[0] == 0:
        raise ParameterError("need one prediction per mask, at least one sample")
    numer = np.tensordot(preds, masks.astype(np.float64), axes=(0, 0))
    denom = masks.astype(np.float64).sum(axis=0)
    fallback = float(preds.mean())
    uncovered = denom <= 0
    if uncovered.any():
        logger.warning("rise: %d cells never kept by any sample; using the "
                       "mean prediction for them", int(uncovered.sum()))
    out = np.where(uncovered, fallback, numer / np.where(uncovered, 1.0, denom))
    if masks.ndim == 2:
        return RegionRelevance(out, "rise", class_index)
    return SaliencyVolume(out.astype(np.float32),
                          {"method": "rise", "class_index": class_index})


def explain_loco(p_full, loo_preds, class_index=0):
    """Leave-one-out differences: phi_k = p_full - prediction without region k."""
    loo = np.asarray(loo_preds, dtype=np.float64)
    if loo.ndim != 1:
        raise ParameterError("loo_preds must be a vector")
    return RegionRelevance(float(p_full) - loo, "loco", class_index)


def explain_up(keep_one_preds, class_index=0):
    """Keep-one probing: region relevance is the prediction with only it kept."""
    keep = np.asarray(keep_one_preds, dtype=np.float64)
    if keep.ndim != 1:
        raise ParameterError("keep_one_preds must be a vector")
    return RegionRelevance(keep.copy(), "up", class_index)


def explain_sos(windows, preds, p_full, dims, class_index=0):
    """Sliding-occlusion saliency: mean drop over the windows covering a voxel.

    Stored as p_full - prediction so that larger means more important;
    voxels no window covers get zero (and a log warning).
    """
    preds = np.asarray(preds, dtype=np.float64)
    if len(windows) != preds.shape[0]:
        raise ParameterError(
            f"{len(windows)} windows but {preds.shape[0]} predictions")
    acc = np.zeros(dims, dtype=np.float64)
    cover = np.zeros(dims, dtype=np.int32)
    for (t0, t1, y0, y1, x0, x1), pred in zip(windows, preds):
        acc[t0:t1, y0:y1, x0:x1] += float(p_full) - pred
        cover[t0:t1, y0:y1, x0:x1] += 1
    uncovered = cover == 0
    if uncovered.any():
        logger.warning("sos: %d voxels covered by no window; their saliency "
                       "is zero", int(uncovered.sum()))
    out = np.divide(acc, cover, out=np.zeros_like(acc), where=~uncovered)
    return SaliencyVolume(out.astype(np.float32),
                          {"method": "sos", "class_index": class_index})


def relevance_to_volume(relevance, seg, fade=None):
    """Paint region relevance onto voxels, optionally softened by `fade`."""
    if relevance.r != seg.r:
        raise ParameterError(
            f"relevance has {relevance.r} regions, segmentation has {seg.r}")
    vol = relevance.values.astype(np.float32)[seg.labels]
    if fade is not None:
        vol = blur_volume(vol, fade)
    return SaliencyVolume(vol, {"method": relevance.method,
                                "class_index": relevance.class_index,
                                "faded": fade is not None})
