"""Dense optical flow: variational brightness-constancy estimator and warping.

Coarse-to-fine scheme with incremental warping per pyramid level; smoothness
is the classic quadratic regularizer. Deterministic for fixed inputs and
config, accurate enough to align half-frame motion; not benchmark-grade.
Fields from an external tool can be substituted through the .flo file format.
"""

from __future__ import annotations

import os
import struct
from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .errors import SequenceIOError, StructuralError
from .image import LinearImage

# average-of-neighbors kernel for the smoothness term
_AVG_KERNEL = np.array(
    [[1 / 12, 1 / 6, 1 / 12],
     [1 / 6, 0.0, 1 / 6],
     [1 / 12, 1 / 6, 1 / 12]], dtype=np.float32)

_FLO_MAGIC = 202021.25  # sanity marker of the 2-band float flow format

LOW_TEXTURE_ENERGY = 1e-5  # mean squared gradient below this flags the field


@dataclass(frozen=True)
class FlowConfig:
    levels: int = 4
    iterations_per_level: int = 120
    smoothness: float = 0.08
    warps_per_level: int = 3

    def __post_init__(self):
        if self.levels < 1:
            raise StructuralError("flow config needs levels >= 1")
        if self.iterations_per_level < 1:
            raise StructuralError("flow config needs iterations_per_level >= 1")
        if self.smoothness < 0:
            raise StructuralError("flow smoothness must be >= 0")


@dataclass
class FlowField:
    """Per-pixel displacement in pixels from a source frame to a target frame."""

    u: np.ndarray
    v: np.ndarray
    source_index: int = 0
    target_index: int = 0
    low_texture: bool = False

    def __post_init__(self):
        self.u = np.asarray(self.u, dtype=np.float32)
        self.v = np.asarray(self.v, dtype=np.float32)
        if self.u.shape != self.v.shape or self.u.ndim != 2:
            raise StructuralError("flow components must be matching 2-D arrays")
        if not (np.isfinite(self.u).all() and np.isfinite(self.v).all()):
            raise StructuralError("flow field contains non-finite values")

    @property
    def shape(self) -> tuple[int, int]:
        return self.u.shape

    def scaled(self, factor: float) -> "FlowField":
        return FlowField(self.u * factor, self.v * factor,
                         self.source_index, self.target_index, self.low_texture)

    @classmethod
    def zero(cls, height: int, width: int) -> "FlowField":
        return cls(np.zeros((height, width), np.float32), np.zeros((height, width), np.float32))


def _gradients(img: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    gx = ndimage.correlate1d(img, np.array([-0.5, 0.0, 0.5], np.float32), axis=1, mode="nearest")
    gy = ndimage.correlate1d(img, np.array([-0.5, 0.0, 0.5], np.float32), axis=0, mode="nearest")
    return gx, gy


def _resize(img: np.ndarray, shape: tuple[int, int]) -> np.ndarray:
    zoom = (shape[0] / img.shape[0], shape[1] / img.shape[1])
    return ndimage.zoom(img, zoom, order=1, mode="nearest", grid_mode=True).astype(np.float32)


def _warp_array(img: np.ndarray, u: np.ndarray, v: np.ndarray) -> np.ndarray:
    h, w = img.shape
    yy, xx = np.mgrid[0:h, 0:w].astype(np.float32)
    return ndimage.map_coordinates(img, [yy + v, xx + u], order=1, mode="nearest").astype(np.float32)


def _solve_level(a: np.ndarray, b: np.ndarray, u: np.ndarray, v: np.ndarray,
                 cfg: FlowConfig) -> tuple[np.ndarray, np.ndarray]:
    alpha2 = np.float32(cfg.smoothness ** 2)
    iters = max(1, cfg.iterations_per_level)
    for _ in range(max(1, cfg.warps_per_level)):
        bw = _warp_array(b, u, v)
        ix_a, iy_a = _gradients(a)
        ix_b, iy_b = _gradients(bw)
        ix = 0.5 * (ix_a + ix_b)
        iy = 0.5 * (iy_a + iy_b)
        it = bw - a
        denom = alpha2 + ix * ix + iy * iy
        du = np.zeros_like(u)
        dv = np.zeros_like(v)
        for _ in range(iters):
            du_bar = ndimage.correlate(du, _AVG_KERNEL, mode="nearest")
            dv_bar = ndimage.correlate(dv, _AVG_KERNEL, mode="nearest")
            update = (ix * du_bar + iy * dv_bar + it) / denom
            du = du_bar - ix * update
            dv = dv_bar - iy * update
        u = u + du
        v = v + dv
        u = ndimage.median_filter(u, size=3, mode="nearest")
        v = ndimage.median_filter(v, size=3, mode="nearest")
    return u, v


def estimate_flow(a: LinearImage, b: LinearImage, cfg: FlowConfig | None = None) -> FlowField:
    """Dense flow from frame a to frame b, both single-channel."""
    cfg = cfg or FlowConfig()
    if a.channels != 1 or b.channels != 1:
        raise StructuralError("flow estimation takes single-channel images")
    if a.data.shape != b.data.shape:
        raise StructuralError("flow inputs must share dimensions")

    # pyramid, finest first; stop early on tiny levels
    pyr_a = [a.data.astype(np.float32)]
    pyr_b = [b.data.astype(np.float32)]
    for _ in range(1, cfg.levels):
        prev_a, prev_b = pyr_a[-1], pyr_b[-1]
        h, w = prev_a.shape
        if min(h, w) < 16:
            break
        shape = ((h + 1) // 2, (w + 1) // 2)
        blur_a = ndimage.gaussian_filter(prev_a, sigma=1.0, mode="nearest")
        blur_b = ndimage.gaussian_filter(prev_b, sigma=1.0, mode="nearest")
        pyr_a.append(_resize(blur_a, shape))
        pyr_b.append(_resize(blur_b, shape))

    u = np.zeros(pyr_a[-1].shape, np.float32)
    v = np.zeros_like(u)
    for level in range(len(pyr_a) - 1, -1, -1):
        la, lb = pyr_a[level], pyr_b[level]
        if u.shape != la.shape:
            scale_y = la.shape[0] / u.shape[0]
            scale_x = la.shape[1] / u.shape[1]
            u = _resize(u, la.shape) * np.float32(scale_x)
            v = _resize(v, la.shape) * np.float32(scale_y)
        u, v = _solve_level(la, lb, u, v, cfg)

    energy = float(np.mean(np.sum(np.square(np.stack(_gradients(pyr_a[0]))), axis=0)))
    return FlowField(u, v, low_texture=energy < LOW_TEXTURE_ENERGY)


def warp(img: LinearImage, flow: FlowField, scale: float = 1.0) -> LinearImage:
    """Sample img at x + scale * flow(x) with bilinear, edge-clamped lookups."""
    if img.data.shape[:2] != flow.shape:
        raise StructuralError("image and flow field sizes differ")
    if scale == 0.0:
        return img
    u = flow.u * np.float32(scale)
    v = flow.v * np.float32(scale)
    if img.channels == 1:
        return LinearImage(_warp_array(img.data, u, v))
    out = np.stack([_warp_array(img.data[:, :, c], u, v) for c in range(3)], axis=-1)
    return LinearImage(out)


def save_flow(flow: FlowField, path: str) -> None:
    """Write the 2-band float flow file format (magic, size, interleaved u,v)."""
    directory = os.path.dirname(path)
    if directory:
        os.makedirs(directory, exist_ok=True)
    h, w = flow.shape
    with open(path, "wb") as fh:
        fh.write(struct.pack("<fii", _FLO_MAGIC, w, h))
        interleaved = np.stack([flow.u, flow.v], axis=-1).astype("<f4")
        fh.write(interleaved.tobytes())


def load_flow(path: str) -> FlowField:
    with open(path, "rb") as fh:
        header = fh.read(12)
        if len(header) != 12:
            raise SequenceIOError(f"truncated flow file {path}")
        magic, w, h = struct.unpack("<fii", header)
        if abs(magic - _FLO_MAGIC) > 1e-3:
            raise SequenceIOError(f"{path} is not a flow file (bad magic {magic})")
        data = np.frombuffer(fh.read(w * h * 2 * 4), dtype="<f4")
    if data.size != w * h * 2:
        raise SequenceIOError(f"truncated flow file {path}")
    interleaved = data.reshape(h, w, 2)
    return FlowField(interleaved[:, :, 0].copy(), interleaved[:, :, 1].copy())
