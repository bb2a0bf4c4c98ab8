"""Per-method orchestration: segmentation -> sampling -> removal ->
prediction -> summary -> saliency volume, with per-stage wall-clock timing
(segmentation / inference / explanation).

Method defaults mirror the standard configuration of each technique:
video-lime, video-kernel-shap, video-loco and video-up segment with 3D SLIC
(~200 regions); video-rise uses an upscaled 4x7x7 random grid; video-sos
slides a 3D occlusion kernel on a 7x13x13 stride lattice (1183 windows).
LIME, Kernel SHAP and RISE default to 5x the region count in samples; LOCO
and UP need exactly one pass per region.
"""

import time
from dataclasses import dataclass, field

import numpy as np

from .errors import ParameterError
from .explainers import (LimeConfig, config_hash, explain_kernel_shap,
                         explain_lime, explain_loco, explain_sos, explain_up,
                         relevance_to_volume, SaliencyVolume)
from .perturbation import (RemovalOperator, SamplingStrategy,
                           blurred_region_indicators,
                           coalition_masks_from_indicators, occlusion_windows,
                           region_fill, sample_coalitions, window_soft_mask)
from .predictors import predict_batch
from .segmentation import SlicParams, low_res_soft_grid, slic_3d
from .tensor import VideoTensor

METHODS = ("video-lime", "video-kernel-shap", "video-rise", "video-loco",
           "video-up", "video-sos")

RISE_GRID = (4, 7, 7)
SOS_KERNEL_DIVISOR = (4, 7, 7)
SOS_STRIDES = (7, 13, 13)


@dataclass
class StageTimings:
    segmentation: float = 0.0
    inference: float = 0.0
    explanation: float = 0.0

    @property
    def total(self):
        return self.segmentation + self.inference + self.explanation

    def as_dict(self):
        return {"segmentation_s": round(self.segmentation, 4),
                "inference_s": round(self.inference, 4),
                "explanation_s": round(self.explanation, 4),
                "total_s": round(self.total, 4)}


@dataclass
class ExplanationResult:
    method: str
    saliency: SaliencyVolume
    relevance: object  # RegionRelevance or None for voxel-native methods
    timings: StageTimings
    sample_count: int
    provenance: dict = field(default_factory=dict)
    first_sample: np.ndarray | None = None  # set when cfg.keep_first_sample


@dataclass(frozen=True)
class MethodConfig:
    method: str
    n_regions: int = 200
    n_samples: int | None = None  # None: per-method default
    bernoulli_p: float = 0.5
    rise_p_keep: float = 0.5
    slic: SlicParams | None = None
    lime: LimeConfig = field(default_factory=LimeConfig)
    removal: RemovalOperator = field(default_factory=RemovalOperator)
    chunk_size: int = 16
    fade_visualization: bool = True
    keep_first_sample: bool = False  # expose the first perturbed video (debug)

    def __post_init__(self):
        if self.method not in METHODS:
            raise ParameterError(
                f"unknown method {self.method!r}; expected one of {METHODS}")
        if self.chunk_size < 1:
            raise ParameterError("chunk_size must be >= 1")


def resolve_class_index(spec, predictor, video):
    """Map the CLI's --class value (int or 'top1') to a class index."""
    if isinstance(spec, int):
        return spec
    if spec == "top1":
        conf = predict_batch(predictor, [video])[0]
        return int(np.argmax(conf))
    try:
        return int(spec)
    except (TypeError, ValueError):
        raise ParameterError(f"class index must be an int or 'top1', got {spec!r}")


class _Stopwatch:
    def __init__(self):
        self.elapsed = 0.0

    def __enter__(self):
        self._start = time.perf_counter()
        return self

    def __exit__(self, *exc):
        self.elapsed += time.perf_counter() - self._start
        return False


def _predict_streamed(predictor, video, fill, mask_chunks, class_index,
                      timings, capture=None):
    """Compose and predict perturbed samples chunk by chunk.

    mask_chunks yields (n, t, h, w) float32 soft keep-masks; composition is
    charged to explanation time, prediction to inference time.  When
    `capture` is an empty list, the first perturbed sample is appended to it.
    """
    delta = video.data - fill
    preds = []
    for masks in mask_chunks:
        with _Stopwatch() as sw_exp:
            batch = np.clip(fill + masks[..., None] * delta, 0.0, 1.0)
        timings.explanation += sw_exp.elapsed
        if capture is not None and not capture:
            capture.append(batch[0].copy())
        with _Stopwatch() as sw_inf:
            conf = predict_batch(predictor, batch)
        timings.inference += sw_inf.elapsed
        preds.append(conf[:, class_index])
    return np.concatenate(preds) if preds else np.empty(0)


def _coalition_chunks(coalitions, indicators, dims, chunk_size):
    for i in range(0, coalitions.shape[0], chunk_size):
        chunk = coalitions[i:i + chunk_size]
        masks = coalition_masks_from_indicators(chunk, indicators)
        yield masks.reshape((-1,) + dims)


def _predict_single(predictor, data, class_index, timings):
    with _Stopwatch() as sw:
        conf = predict_batch(predictor, data[None])
    timings.inference += sw.elapsed
    return float(conf[0, class_index])


def _segment(video, cfg, timings):
    slic = cfg.slic or SlicParams(n_segments=cfg.n_regions)
    with _Stopwatch() as sw:
        seg = slic_3d(video, slic)
    timings.segmentation += sw.elapsed
    return seg, slic


def _region_method(video, cfg, predictor, class_index, seed, timings):
    """Shared body of the four region-based methods (lime/kshap/loco/up)."""
    seg, slic = _segment(video, cfg, timings)
    method = cfg.method
    if method == "video-lime":
        n = cfg.n_samples or 5 * cfg.n_regions
        strategy = SamplingStrategy("bernoulli", n_samples=n, p=cfg.bernoulli_p,
                                    rng_seed=seed)
    elif method == "video-kernel-shap":
        n = cfg.n_samples or 5 * cfg.n_regions
        strategy = SamplingStrategy("shap_kernel", n_samples=n, rng_seed=seed)
    elif method == "video-loco":
        strategy = SamplingStrategy("leave_one_out")
    else:
        strategy = SamplingStrategy("keep_one")
    coalitions = sample_coalitions(seg.r, strategy)

    fade = cfg.removal.fade_params()
    with _Stopwatch() as sw:
        indicators = blurred_region_indicators(seg, fade)
        fill = region_fill(video, cfg.removal, seg)
    timings.explanation += sw.elapsed

    dims = (video.t, video.h, video.w)
    chunks = _coalition_chunks(coalitions, indicators, dims, cfg.chunk_size)
    capture = [] if cfg.keep_first_sample else None
    preds = _predict_streamed(predictor, video, fill, chunks, class_index,
                              timings, capture)

    with _Stopwatch() as sw:
        if method == "video-lime":
            relevance = explain_lime(coalitions, preds, cfg.lime, class_index)
        elif method == "video-kernel-shap":
            relevance = None  # needs f_empty / f_full below
        elif method == "video-loco":
            relevance = None  # needs p_full below
        else:
            relevance = explain_up(preds, class_index)
    timings.explanation += sw.elapsed

    if method == "video-kernel-shap":
        f_full = _predict_single(predictor, video.data, class_index, timings)
        empty_mask = coalition_masks_from_indicators(
            np.zeros((1, seg.r), dtype=np.uint8), indicators).reshape(dims)
        with _Stopwatch() as sw:
            empty_video = np.clip(fill + empty_mask[..., None]
                                  * (video.data - fill), 0.0, 1.0)
        timings.explanation += sw.elapsed
        f_empty = _predict_single(predictor, empty_video, class_index, timings)
        with _Stopwatch() as sw:
            relevance = explain_kernel_shap(coalitions, preds, f_empty, f_full,
                                            class_index)
        timings.explanation += sw.elapsed
    elif method == "video-loco":
        p_full = _predict_single(predictor, video.data, class_index, timings)
        with _Stopwatch() as sw:
            relevance = explain_loco(p_full, preds, class_index)
        timings.explanation += sw.elapsed

    with _Stopwatch() as sw:
        vis_fade = fade if cfg.fade_visualization else None
        saliency = relevance_to_volume(relevance, seg, vis_fade)
    timings.explanation += sw.elapsed
    first = capture[0] if capture else None
    extra = {"segmentation": {"kind": "slic_3d", "n_segments": slic.n_segments,
                              "compactness": slic.compactness,
                              "max_iters": slic.max_iters,
                              "region_count": seg.r},
             "sampling": {"kind": strategy.kind, "p": strategy.p}}
    return relevance, saliency, len(coalitions), extra, first


def _rise_method(video, cfg, predictor, class_index, seed, timings):
    dims = (video.t, video.h, video.w)
    n = cfg.n_samples or 5 * cfg.n_regions
    with _Stopwatch() as sw:
        fill = region_fill(video, cfg.removal)
    timings.explanation += sw.elapsed
    delta = video.data - fill
    numer = np.zeros(dims, dtype=np.float64)
    denom = np.zeros(dims, dtype=np.float64)
    preds_sum = 0.0
    first = None
    for start in range(0, n, cfg.chunk_size):
        count = min(cfg.chunk_size, n - start)
        with _Stopwatch() as sw:
            masks = np.stack([
                low_res_soft_grid(*dims, RISE_GRID, cfg.rise_p_keep,
                                  rng_seed=[seed, start + i])
                for i in range(count)])
            batch = np.clip(fill + masks[..., None] * delta, 0.0, 1.0)
        timings.explanation += sw.elapsed
        if cfg.keep_first_sample and first is None:
            first = batch[0].copy()
        with _Stopwatch() as sw:
            conf = predict_batch(predictor, batch)
        timings.inference += sw.elapsed
        preds = conf[:, class_index]
        with _Stopwatch() as sw:
            numer += np.tensordot(preds, masks.astype(np.float64), axes=(0, 0))
            denom += masks.astype(np.float64).sum(axis=0)
            preds_sum += float(preds.sum())
        timings.explanation += sw.elapsed
    with _Stopwatch() as sw:
        uncovered = denom <= 0
        fallback = preds_sum / n
        data = np.where(uncovered, fallback,
                        numer / np.where(uncovered, 1.0, denom))
        saliency = SaliencyVolume(data.astype(np.float32),
                                  {"method": "rise", "class_index": class_index})
    timings.explanation += sw.elapsed
    extra = {"segmentation": {"kind": "low_res_grid", "grid": list(RISE_GRID)},
             "sampling": {"kind": "rise_soft_masks", "p_keep": cfg.rise_p_keep}}
    return None, saliency, n, extra, first


def _sos_method(video, cfg, predictor, class_index, seed, timings):
    dims = (video.t, video.h, video.w)
    kernel = tuple(max(1, -(-d // k)) for d, k in zip(dims, SOS_KERNEL_DIVISOR))
    strides = tuple(min(s, max(1, d - k + 1))
                    for s, d, k in zip(SOS_STRIDES, dims, kernel))
    windows = occlusion_windows(*dims, kernel, strides)
    fade = cfg.removal.fade_params()
    with _Stopwatch() as sw:
        fill = region_fill(video, cfg.removal)
    timings.explanation += sw.elapsed

    def chunks():
        for start in range(0, len(windows), cfg.chunk_size):
            part = windows[start:start + cfg.chunk_size]
            yield np.stack([window_soft_mask(dims, w, fade) for w in part])

    capture = [] if cfg.keep_first_sample else None
    preds = _predict_streamed(predictor, video, fill, chunks(), class_index,
                              timings, capture)
    p_full = _predict_single(predictor, video.data, class_index, timings)
    with _Stopwatch() as sw:
        saliency = explain_sos(windows, preds, p_full, dims, class_index)
    timings.explanation += sw.elapsed
    extra = {"segmentation": {"kind": "occlusion_windows",
                              "kernel": list(kernel), "strides": list(strides)},
             "sampling": {"kind": "sliding_windows"}}
    first = capture[0] if capture else None
    return None, saliency, len(windows), extra, first


def run_method(video, method_or_cfg, predictor, class_index=0, seed=0):
    """Run one explanation method end to end on a video.

    Returns an ExplanationResult with the saliency volume, the per-region
    relevance where the method has one, stage timings, and a provenance
    record sufficient to reproduce the run bit for bit.
    """
    if not isinstance(video, VideoTensor):
        raise ParameterError("run_method expects a VideoTensor")
    cfg = (method_or_cfg if isinstance(method_or_cfg, MethodConfig)
           else MethodConfig(method=method_or_cfg))
    timings = StageTimings()
    if cfg.method == "video-rise":
        relevance, saliency, n, extra, first = _rise_method(
            video, cfg, predictor, class_index, seed, timings)
    elif cfg.method == "video-sos":
        relevance, saliency, n, extra, first = _sos_method(
            video, cfg, predictor, class_index, seed, timings)
    else:
        relevance, saliency, n, extra, first = _region_method(
            video, cfg, predictor, class_index, seed, timings)

    from . import _kernels

    removal = cfg.removal
    config_record = {
        "method": cfg.method,
        "class_index": class_index,
        "seed": seed,
        "sample_count": n,
        "removal": {"kind": removal.kind,
                    "blur": {"sigma_space": removal.blur.sigma_space,
                             "sigma_time": removal.blur.sigma_time,
                             "truncation": removal.blur.truncation},
                    "fade": {"sigma_space": removal.fade_params().sigma_space,
                             "sigma_time": removal.fade_params().sigma_time}},
        "kernel_backend": _kernels.BACKEND,
        **extra,
    }
    provenance = dict(config_record)
    provenance["config_hash"] = config_hash(config_record)
    provenance["timings"] = timings.as_dict()
    saliency = SaliencyVolume(saliency.data, dict(saliency.provenance,
                                                  **provenance))
    return ExplanationResult(cfg.method, saliency, relevance, timings, n,
                             provenance, first)
