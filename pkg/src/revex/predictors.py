"""The black-box model contract: batched class-confidence prediction.

Synthetic predictors expose planted ground truth for testing the whole
pipeline without a trained network: their confidence measures how much
unblurred high-frequency detail survives inside known regions, which makes
the effect of blur-removal analytically checkable.  Remote models are
reached through a small JSON-over-HTTP wire protocol (see `WIRE_PROTOCOL`).
"""

import base64
import json
import math
import time
import urllib.error
import urllib.request
from dataclasses import dataclass

import numpy as np

from .errors import ParameterError, ProtocolError, TransportError
from .perturbation import DEFAULT_REMOVAL_BLUR
from .tensor import BlurParams, VideoTensor, blur_volume

WIRE_PROTOCOL = {
    "predict": {
        "method": "POST",
        "path": "/predict",
        "request": {"shape": "[n,t,h,w,c]", "dtype": "f32le",
                    "data": "base64 of little-endian float32, row-major"},
        "response": {"confidences": "[[per-class floats] per input]",
                     "normalized": "bool"},
    },
    "info": {
        "method": "GET",
        "path": "/info",
        "response": {"class_count": "int", "max_batch": "int",
                     "normalized": "bool"},
    },
    "errors": {"malformed": 400, "overload": 503},
}


def encode_predict_request(batch):
    """Wire-encode an (n, t, h, w, c) float batch as the /predict body."""
    batch = np.ascontiguousarray(batch, dtype="<f4")
    return {
        "shape": list(batch.shape),
        "dtype": "f32le",
        "data": base64.b64encode(batch.tobytes(order="C")).decode("ascii"),
    }


def decode_predict_request(body):
    """Decode a /predict body back into an (n, t, h, w, c) float32 array.

    Raises ProtocolError on any malformation; servers map that to HTTP 400.
    """
    try:
        shape = tuple(int(v) for v in body["shape"])
        if len(shape) != 5 or any(v < 1 for v in shape):
            raise ProtocolError(f"bad shape {shape}")
        if body.get("dtype") != "f32le":
            raise ProtocolError(f"unsupported dtype {body.get('dtype')!r}")
        raw = base64.b64decode(body["data"], validate=True)
    except ProtocolError:
        raise
    except Exception as exc:
        raise ProtocolError(f"malformed predict request: {exc}") from exc
    count = int(np.prod(shape))
    if len(raw) != count * 4:
        raise ProtocolError(
            f"payload holds {len(raw)} bytes, shape implies {count * 4}")
    return np.frombuffer(raw, dtype="<f4").reshape(shape).astype(np.float32)


def _stack_batch(videos):
    if isinstance(videos, np.ndarray):
        if videos.ndim != 5:
            raise ParameterError(f"batch array must be 5-D, got {videos.shape}")
        if videos.shape[0] == 0:
            raise ParameterError("batch must be non-empty")
        return np.ascontiguousarray(videos, dtype=np.float32)
    videos = list(videos)
    if not videos:
        raise ParameterError("batch must be non-empty")
    arrays = [v.data if isinstance(v, VideoTensor) else np.asarray(v, np.float32)
              for v in videos]
    shape = arrays[0].shape
    if any(a.shape != shape for a in arrays):
        raise ParameterError("all videos in a batch must share dims")
    return np.stack(arrays)


def predict_batch(predictor, videos):
    """Gateway entry point: order-preserving batched prediction.

    Accepts any batch size and splits internally to the predictor's declared
    maximum, so explainers never manage batching.  Returns (n, class_count)
    float64 confidences.
    """
    batch = _stack_batch(videos)
    limit = predictor.max_batch or len(batch)
    outs = [predictor.predict(batch[i:i + limit])
            for i in range(0, len(batch), limit)]
    result = np.concatenate(outs, axis=0)
    if result.shape != (len(batch), predictor.class_count):
        raise ProtocolError(
            f"predictor returned shape {result.shape}, expected "
            f"{(len(batch), predictor.class_count)}")
    return result


def _spread_confidence(conf, class_count, target_class):
    """Target class takes `conf`; the rest share 1-conf uniformly."""
    n = conf.shape[0]
    out = np.empty((n, class_count), dtype=np.float64)
    if class_count == 1:
        out[:, 0] = conf
        return out
    rest = (1.0 - conf) / (class_count - 1)
    out[:] = rest[:, None]
    out[:, target_class] = conf
    return out


class EchoPredictor:
    """Target confidence equals the mean voxel value; analytic and instant."""

    max_batch = None
    normalized = True

    def __init__(self, class_count=2, target_class=0):
        if class_count < 1:
            raise ParameterError("class_count must be >= 1")
        self.class_count = class_count
        self.target_class = target_class

    def predict(self, batch):
        conf = batch.reshape(batch.shape[0], -1).mean(axis=1).astype(np.float64)
        return _spread_confidence(conf, self.class_count, self.target_class)


def _crop_bounds(lo, hi, dim, radius):
    return max(0, lo - radius), min(dim, hi + radius)


def _blur_radii(blur):
    rt = math.ceil(blur.truncation * blur.sigma_time) if blur.sigma_time > 0 else 0
    rs = math.ceil(blur.truncation * blur.sigma_space)
    return rt, rs


def box_hf_energy(data, box, blur):
    """Mean |x - blur(x)| inside a cuboid box of a (t, h, w, c) volume.

    Only a radius-padded crop around the box is blurred; replicate padding
    makes the crop values identical to a full-volume blur.
    """
    t0, t1, y0, y1, x0, x1 = box
    rt, rs = _blur_radii(blur)
    ct0, ct1 = _crop_bounds(t0, t1, data.shape[0], rt)
    cy0, cy1 = _crop_bounds(y0, y1, data.shape[1], rs)
    cx0, cx1 = _crop_bounds(x0, x1, data.shape[2], rs)
    crop = data[ct0:ct1, cy0:cy1, cx0:cx1]
    hf = np.abs(crop - blur_volume(crop, blur))
    inner = hf[t0 - ct0:t1 - ct0, y0 - cy0:y1 - cy0, x0 - cx0:x1 - cx0]
    return float(inner.mean())


def region_hf_energies(data, labels, r, blur):
    """Per-region mean |x - blur(x)| over a (t, h, w, c) volume."""
    hf = np.abs(data - blur_volume(data, blur)).mean(axis=-1)
    flat = labels.ravel()
    sums = np.bincount(flat, weights=hf.ravel().astype(np.float64), minlength=r)
    counts = np.bincount(flat, minlength=r)
    return sums / counts


class HFBoxPredictor:
    """Planted-box oracle: confidence = clip(gain * E(x) / E(reference), 0, 1)
    where E is the high-frequency energy inside the box."""

    max_batch = None
    normalized = True

    def __init__(self, box, reference, blur=None, gain=1.0, class_count=2,
                 target_class=0):
        if class_count < 1:
            raise ParameterError("class_count must be >= 1")
        blur = blur or DEFAULT_REMOVAL_BLUR
        t0, t1, y0, y1, x0, x1 = box
        if not (0 <= t0 < t1 <= reference.t and 0 <= y0 < y1 <= reference.h
                and 0 <= x0 < x1 <= reference.w):
            raise ParameterError(f"degenerate or out-of-bounds box {box}")
        self.box = tuple(int(v) for v in box)
        self.blur = blur
        self.gain = float(gain)
        self.class_count = class_count
        self.target_class = target_class
        self.reference_shape = reference.shape
        self.reference_energy = box_hf_energy(reference.data, self.box, blur)
        if self.reference_energy <= 0:
            raise ParameterError("reference video has no detail inside the box")

    def predict(self, batch):
        if batch.shape[1:] != self.reference_shape:
            raise ParameterError(
                f"input dims {batch.shape[1:]} do not match the predictor's "
                f"reference {self.reference_shape}")
        conf = np.array([
            box_hf_energy(batch[i], self.box, self.blur)
            for i in range(batch.shape[0])
        ]) / self.reference_energy
        conf = np.clip(self.gain * conf, 0.0, 1.0)
        return _spread_confidence(conf, self.class_count, self.target_class)


class RegionLinearPredictor:
    """Per-region linear oracle: confidence = clip(bias + sum w_k e_k(x), 0, 1)
    with e_k the region's high-frequency energy normalized by the reference."""

    max_batch = None
    normalized = True

    def __init__(self, seg, weights, bias, reference, blur=None, class_count=2,
                 target_class=0):
        if class_count < 1:
            raise ParameterError("class_count must be >= 1")
        blur = blur or DEFAULT_REMOVAL_BLUR
        weights = np.asarray(weights, dtype=np.float64)
        if weights.shape != (seg.r,):
            raise ParameterError(
                f"weights shape {weights.shape} does not match r={seg.r}")
        if not np.all(np.isfinite(weights)):
            raise ParameterError("weights must be finite")
        if seg.shape != (reference.t, reference.h, reference.w):
            raise ParameterError("segmentation dims do not match the reference")
        self.seg = seg
        self.weights = weights
        self.bias = float(bias)
        self.blur = blur
        self.class_count = class_count
        self.target_class = target_class
        self.reference_energies = region_hf_energies(
            reference.data, seg.labels, seg.r, blur)
        if (self.reference_energies <= 0).any():
            raise ParameterError("reference video has detail-free regions")

    def region_energies(self, data):
        e = region_hf_energies(data, self.seg.labels, self.seg.r, self.blur)
        return e / self.reference_energies

    def predict(self, batch):
        if batch.shape[1:4] != self.seg.shape:
            raise ParameterError(
                f"input dims {batch.shape[1:4]} do not match the "
                f"segmentation {self.seg.shape}")
        conf = np.array([
            self.bias + float(self.weights @ self.region_energies(batch[i]))
            for i in range(batch.shape[0])
        ])
        conf = np.clip(conf, 0.0, 1.0)
        return _spread_confidence(conf, self.class_count, self.target_class)


def make_hf_box(box, reference, blur=None, gain=1.0, class_count=2,
                target_class=0):
    """Planted-box oracle predictor (see HFBoxPredictor)."""
    return HFBoxPredictor(box, reference, blur=blur, gain=gain,
                          class_count=class_count, target_class=target_class)


def make_region_linear(seg, weights, bias, reference, blur=None, class_count=2,
                       target_class=0):
    """Per-region linear oracle predictor (see RegionLinearPredictor)."""
    return RegionLinearPredictor(seg, weights, bias, reference, blur=blur,
                                 class_count=class_count,
                                 target_class=target_class)


def _blur_to_dict(blur):
    return {"sigma_space": blur.sigma_space, "sigma_time": blur.sigma_time,
            "truncation": blur.truncation}


def _blur_from_dict(d):
    return BlurParams(d["sigma_space"], d["sigma_time"], d.get("truncation", 2.0))


def save_predictor_spec(spec, path):
    """Write a predictor spec as JSON (file paths stay relative to it)."""
    from pathlib import Path

    Path(path).write_text(json.dumps(spec, indent=2, sort_keys=True) + "\n")


def load_predictor(path):
    """Build a predictor from a JSON spec file.

    Relative reference/segmentation paths resolve against the spec's
    directory, so a synth output directory is self-contained.
    """
    from pathlib import Path

    from .segmentation import read_segmentation
    from .tensor import read_tensor

    path = Path(path)
    spec = json.loads(path.read_text())
    kind = spec.get("kind")
    common = {"class_count": int(spec.get("class_count", 2)),
              "target_class": int(spec.get("target_class", 0))}
    if kind == "echo":
        return EchoPredictor(**common)
    if kind == "hf_box":
        reference = read_tensor(path.parent / spec["reference"])
        return HFBoxPredictor(tuple(spec["box"]), reference,
                              blur=_blur_from_dict(spec["blur"]),
                              gain=float(spec.get("gain", 1.0)), **common)
    if kind == "region_linear":
        reference = read_tensor(path.parent / spec["reference"])
        seg = read_segmentation(path.parent / spec["segmentation"])
        return RegionLinearPredictor(seg, spec["weights"], float(spec["bias"]),
                                     reference,
                                     blur=_blur_from_dict(spec["blur"]), **common)
    raise ParameterError(f"unknown predictor kind {kind!r} in {path}")


def resolve_predictor(arg):
    """Turn the --predictor CLI argument into a predictor instance.

    Accepted forms: `builtin:echo`, `builtin:<spec.json>` (also a bare .json
    path), or an http(s):// endpoint speaking the wire protocol.
    """
    if arg.startswith(("http://", "https://")):
        return RemotePredictor(arg)
    if arg.startswith("builtin:"):
        arg = arg[len("builtin:"):]
    if arg == "echo":
        return EchoPredictor()
    if arg.endswith(".json"):
        return load_predictor(arg)
    raise ParameterError(
        f"cannot resolve predictor {arg!r}; expected builtin:echo, a predictor "
        "spec .json, or an http endpoint")


class RemotePredictor:
    """Client for the wire protocol; /info is fetched once and cached.

    Transient failures (connection errors, HTTP 503) are retried with
    exponential backoff starting at 100 ms; 400-level answers and malformed
    bodies raise ProtocolError immediately.
    """

    def __init__(self, endpoint, timeout=30.0, attempts=3, backoff=0.1):
        self.endpoint = endpoint.rstrip("/")
        self.timeout = timeout
        self.attempts = attempts
        self.backoff = backoff
        self._info = None

    def _request(self, path, payload=None):
        url = self.endpoint + path
        data = None
        headers = {}
        if payload is not None:
            data = json.dumps(payload).encode("utf-8")
            headers["Content-Type"] = "application/json"
        last_exc = None
        for attempt in range(self.attempts):
            if attempt:
                time.sleep(self.backoff * (2 ** (attempt - 1)))
            req = urllib.request.Request(url, data=data, headers=headers)
            try:
                with urllib.request.urlopen(req, timeout=self.timeout) as resp:
                    return json.loads(resp.read().decode("utf-8"))
            except urllib.error.HTTPError as exc:
                if exc.code == 503:
                    last_exc = exc
                    continue
                try:
                    detail = json.loads(exc.read().decode("utf-8")).get("error", "")
                except Exception:
                    detail = ""
                raise ProtocolError(
                    f"{url} answered HTTP {exc.code}: {detail}") from exc
            except (urllib.error.URLError, TimeoutError, OSError) as exc:
                last_exc = exc
                continue
            except json.JSONDecodeError as exc:
                raise ProtocolError(f"{url} returned invalid JSON") from exc
        raise TransportError(
            f"{url} unreachable after {self.attempts} attempts: {last_exc}",
            attempts=self.attempts)

    def info(self):
        if self._info is None:
            raw = self._request("/info")
            try:
                self._info = {
                    "class_count": int(raw["class_count"]),
                    "max_batch": int(raw["max_batch"]),
                    "normalized": bool(raw["normalized"]),
                }
            except (KeyError, TypeError, ValueError) as exc:
                raise ProtocolError(f"malformed /info response: {raw!r}") from exc
        return self._info

    @property
    def class_count(self):
        return self.info()["class_count"]

    @property
    def max_batch(self):
        return self.info()["max_batch"]

    @property
    def normalized(self):
        return self.info()["normalized"]

    def predict(self, batch):
        raw = self._request("/predict", encode_predict_request(batch))
        try:
            conf = np.asarray(raw["confidences"], dtype=np.float64)
        except (KeyError, TypeError, ValueError) as exc:
            raise ProtocolError(f"malformed /predict response: {raw!r}") from exc
        if conf.shape != (batch.shape[0], self.class_count):
            raise ProtocolError(
                f"confidences shape {conf.shape}, expected "
                f"{(batch.shape[0], self.class_count)}")
        if not np.all(np.isfinite(conf)):
            raise ProtocolError("non-finite confidences in response")
        if raw.get("normalized") and np.abs(conf.sum(axis=1) - 1.0).max() > 1e-3:
            raise ProtocolError("response declared normalized but rows do not sum to 1")
        return conf
