"""Dense video tensors, separable 3D Gaussian blur, and the RVX file format.

A video is a (t, h, w, c) float32 volume with every value in [0, 1]; 8-bit
sources are converted by dividing by 255.  All operations are pure: tensors
are frozen after construction and safe to share across workers.
"""

import math
import re
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import _kernels
from .errors import FormatError, ParameterError

RVX_MAGIC = b"RVX1"
RVX_DTYPE_F32 = 1
RVX_DTYPE_U32 = 2

_FRAME_PATTERN = re.compile(r"frame_(\d{5})\.png$")


@dataclass(frozen=True)
class VideoTensor:
    """A (t, h, w, c) float32 volume with values in [0, 1], c in {1, 3}."""

    data: np.ndarray

    def __post_init__(self):
        arr = np.ascontiguousarray(self.data, dtype=np.float32)
        if arr.ndim != 4:
            raise ParameterError(f"video must be 4-D (t,h,w,c), got shape {arr.shape}")
        t, h, w, c = arr.shape
        if t < 1 or h < 1 or w < 1:
            raise ParameterError(f"video dims must be >= 1, got {(t, h, w)}")
        if c not in (1, 3):
            raise ParameterError(f"channel count must be 1 or 3, got {c}")
        if not np.all(np.isfinite(arr)):
            raise ParameterError("video contains non-finite values")
        if arr.min() < 0.0 or arr.max() > 1.0:
            raise ParameterError("video values must lie in [0, 1]")
        arr.flags.writeable = False
        object.__setattr__(self, "data", arr)

    @property
    def t(self):
        return self.data.shape[0]

    @property
    def h(self):
        return self.data.shape[1]

    @property
    def w(self):
        return self.data.shape[2]

    @property
    def c(self):
        return self.data.shape[3]

    @property
    def shape(self):
        return self.data.shape

    @classmethod
    def from_array(cls, arr):
        """Build a tensor from any array; (t, h, w) input gets a unit channel."""
        arr = np.asarray(arr)
        if arr.ndim == 3:
            arr = arr[..., None]
        return cls(arr)


@dataclass(frozen=True)
class BlurParams:
    """Separable Gaussian parameters.

    sigma_space applies to both spatial axes, sigma_time to the frame axis
    (0 disables temporal blurring).  Kernel radius per axis is
    ceil(truncation * sigma) and every 1-D kernel is normalized to sum 1.
    """

    sigma_space: float = 10.0
    sigma_time: float = 2.0
    truncation: float = 2.0

    def __post_init__(self):
        for name in ("sigma_space", "sigma_time", "truncation"):
            v = getattr(self, name)
            if not math.isfinite(v):
                raise ParameterError(f"{name} must be finite, got {v}")
        if self.sigma_space <= 0:
            raise ParameterError(f"sigma_space must be > 0, got {self.sigma_space}")
        if self.sigma_time < 0:
            raise ParameterError(f"sigma_time must be >= 0, got {self.sigma_time}")
        if self.truncation <= 0:
            raise ParameterError(f"truncation must be > 0, got {self.truncation}")

    def scaled(self, factor):
        """A copy with both sigmas multiplied by `factor` (same truncation)."""
        return BlurParams(self.sigma_space * factor, self.sigma_time * factor,
                          self.truncation)


def gaussian_kernel_1d(sigma, truncation):
    """Normalized 1-D Gaussian taps with radius ceil(truncation * sigma)."""
    radius = int(math.ceil(truncation * sigma))
    x = np.arange(-radius, radius + 1, dtype=np.float64)
    k = np.exp(-0.5 * (x / sigma) ** 2)
    return k / k.sum()


def blur_volume(arr, params):
    """Separable Gaussian blur of a (t, h, w) or (t, h, w, c) float volume.

    Channels are filtered independently; no range clipping is applied, so the
    operation is exactly linear (the [0, 1] clamp lives in gaussian_blur_3d).
    """
    arr = np.asarray(arr, dtype=np.float32)
    if arr.ndim not in (3, 4):
        raise ParameterError(f"expected 3-D or 4-D volume, got shape {arr.shape}")
    out = arr
    if params.sigma_time > 0:
        out = _kernels.correlate1d(out, gaussian_kernel_1d(params.sigma_time,
                                                           params.truncation), 0)
    k_space = gaussian_kernel_1d(params.sigma_space, params.truncation)
    out = _kernels.correlate1d(out, k_space, 1)
    out = _kernels.correlate1d(out, k_space, 2)
    return out


def gaussian_blur_3d(video, params):
    """Blur a video with edge-replicate padding; output dims match the input."""
    if not isinstance(video, VideoTensor):
        raise ParameterError("gaussian_blur_3d expects a VideoTensor")
    out = np.clip(blur_volume(video.data, params), 0.0, 1.0)
    return VideoTensor(out)


def _write_rvx(path, dims, dtype_code, array):
    t, h, w, c = dims
    header = RVX_MAGIC + np.asarray([t, h, w, c, dtype_code],
                                    dtype="<u4").tobytes()
    Path(path).write_bytes(header + array.tobytes(order="C"))


def _read_rvx(path):
    raw = Path(path).read_bytes()
    if len(raw) < 24:
        raise FormatError(f"{path}: file shorter than the RVX header")
    if raw[:4] != RVX_MAGIC:
        raise FormatError(f"{path}: bad magic {raw[:4]!r}, expected {RVX_MAGIC!r}")
    t, h, w, c, code = np.frombuffer(raw[4:24], dtype="<u4")
    count = int(t) * int(h) * int(w) * int(c)
    if count == 0:
        raise FormatError(f"{path}: zero-sized dims {(t, h, w, c)}")
    if code == RVX_DTYPE_F32:
        np_dtype = np.dtype("<f4")
    elif code == RVX_DTYPE_U32:
        np_dtype = np.dtype("<u4")
    else:
        raise FormatError(f"{path}: unknown dtype code {code}")
    payload = raw[24:]
    if len(payload) != count * 4:
        raise FormatError(
            f"{path}: payload holds {len(payload)} bytes, header implies {count * 4}")
    arr = np.frombuffer(payload, dtype=np_dtype).reshape(int(t), int(h), int(w), int(c))
    return (int(t), int(h), int(w), int(c)), int(code), arr


def write_tensor(video, path):
    """Persist a video losslessly (RVX, little-endian float32)."""
    _write_rvx(path, video.shape, RVX_DTYPE_F32, video.data.astype("<f4"))


def read_tensor(path):
    """Load an RVX float tensor written by write_tensor."""
    dims, code, arr = _read_rvx(path)
    if code != RVX_DTYPE_F32:
        raise FormatError(f"{path}: expected float tensor (dtype 1), got {code}")
    try:
        return VideoTensor(arr.astype(np.float32))
    except ParameterError as exc:
        raise FormatError(f"{path}: {exc}") from exc


def write_volume(arr, path):
    """Persist a raw (t, h, w) float volume (e.g. saliency, possibly signed)."""
    arr = np.ascontiguousarray(arr, dtype=np.float32)
    if arr.ndim != 3:
        raise ParameterError(f"expected (t,h,w) volume, got shape {arr.shape}")
    _write_rvx(path, arr.shape + (1,), RVX_DTYPE_F32, arr.astype("<f4"))


def read_volume(path):
    """Load a (t, h, w) float volume written by write_volume."""
    dims, code, arr = _read_rvx(path)
    if code != RVX_DTYPE_F32:
        raise FormatError(f"{path}: expected float volume (dtype 1), got {code}")
    if dims[3] != 1:
        raise FormatError(f"{path}: expected single-channel volume, got c={dims[3]}")
    return np.ascontiguousarray(arr[..., 0], dtype=np.float32)


def write_frames(video, directory):
    """Dump a video as an 8-bit PNG sequence (frame_%05d.png) for inspection."""
    from PIL import Image

    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    data = np.round(video.data * 255.0).astype(np.uint8)
    for i in range(video.t):
        frame = data[i, :, :, 0] if video.c == 1 else data[i]
        Image.fromarray(frame).save(directory / f"frame_{i:05d}.png")


def read_frames(directory):
    """Load a frame_%05d.png sequence back into a video (values / 255)."""
    from PIL import Image

    directory = Path(directory)
    paths = sorted(p for p in directory.iterdir() if _FRAME_PATTERN.search(p.name))
    if not paths:
        raise FormatError(f"{directory}: no frame_XXXXX.png files found")
    frames = []
    for p in paths:
        arr = np.asarray(Image.open(p))
        if arr.ndim == 2:
            arr = arr[..., None]
        elif arr.shape[2] == 4:
            arr = arr[..., :3]
        frames.append(arr)
    stack = np.stack(frames).astype(np.float32) / 255.0
    return VideoTensor(stack)
