"""Linear image buffers and frame-sequence I/O.

All pixel data in this package is scene-linear float32. Files on disk may be
float (PFM, lossless) or integer (PNG, display exports); decoding linearizes
at the boundary and encoding applies the requested transfer curve. Negative
values that arise from subtraction are kept in memory and clamped only when
encoding to an integer format.
"""

from __future__ import annotations

import os
import re
from dataclasses import dataclass, field

import cv2
import numpy as np

from .errors import SequenceIOError, StructuralError

FLOAT_EXTENSIONS = {".pfm"}
INTEGER_EXTENSIONS = {".png"}

_FRAME_FIELD = re.compile(r"%(0\d+)?d")


@dataclass(frozen=True)
class LinearImage:
    """Immutable H x W (single channel) or H x W x 3 buffer of linear values.

    Construction takes ownership of the array: it is converted to float32 if
    needed and marked read-only, so hold no writable references afterwards.
    """

    data: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.data)
        if arr.ndim not in (2, 3):
            raise StructuralError(f"image must be 2-D or 3-D, got shape {arr.shape}")
        if arr.ndim == 3 and arr.shape[2] != 3:
            raise StructuralError(f"3-D image must have 3 channels, got {arr.shape[2]}")
        if arr.size == 0:
            raise StructuralError("image must not be empty")
        if arr.dtype != np.float32:
            arr = arr.astype(np.float32)
        arr = np.ascontiguousarray(arr)
        arr.flags.writeable = False
        object.__setattr__(self, "data", arr)

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def channels(self) -> int:
        return 1 if self.data.ndim == 2 else 3

    def channel(self, index: int) -> "LinearImage":
        """Extract one channel as a single-channel image."""
        if self.channels == 1:
            if index != 0:
                raise StructuralError("single-channel image has only channel 0")
            return self
        return LinearImage(self.data[:, :, index])

    def same_shape(self, other: "LinearImage") -> bool:
        return self.data.shape == other.data.shape


def combine_channels(r: LinearImage, g: LinearImage, b: LinearImage) -> LinearImage:
    for img in (g, b):
        if img.data.shape != r.data.shape or img.channels != 1:
            raise StructuralError("channels to combine must be single-channel and same size")
    return LinearImage(np.stack([r.data, g.data, b.data], axis=-1))


def constant_image(height: int, width: int, value) -> LinearImage:
    value = np.asarray(value, dtype=np.float32)
    if value.ndim == 0:
        return LinearImage(np.full((height, width), float(value), dtype=np.float32))
    if value.shape != (3,):
        raise StructuralError("constant value must be a scalar or RGB triple")
    return LinearImage(np.broadcast_to(value, (height, width, 3)).copy())


def luminance(img: LinearImage) -> LinearImage:
    """Rec.709 luma of a 3-channel image; identity on single-channel input."""
    if img.channels == 1:
        return img
    d = img.data
    return LinearImage(0.2126 * d[:, :, 0] + 0.7152 * d[:, :, 1] + 0.0722 * d[:, :, 2])


def tonemap(img: LinearImage, g: float) -> LinearImage:
    """Apply v -> v**(1/g) per pixel; negatives clamp to 0 first."""
    if g <= 0:
        raise StructuralError("tonemap exponent must be > 0")
    return LinearImage(np.power(np.maximum(img.data, 0.0), 1.0 / g))


def inverse_tonemap(img: LinearImage, g: float) -> LinearImage:
    """Inverse of :func:`tonemap`: v -> v**g."""
    if g <= 0:
        raise StructuralError("tonemap exponent must be > 0")
    return LinearImage(np.power(np.maximum(img.data, 0.0), g))


@dataclass
class FrameSequence:
    """Ordered frames sharing dimensions, with a capture-modality label.

    ``timestamps`` defaults to frame index / frame_rate; demultiplexed
    sequences carry the timestamps of their source frames.
    """

    frames: list[LinearImage]
    frame_rate: float
    label: str = ""
    timestamps: list[float] | None = field(default=None)

    def __post_init__(self):
        if self.frame_rate <= 0:
            raise StructuralError("frame_rate must be > 0")
        if self.frames:
            first = self.frames[0]
            for i, f in enumerate(self.frames):
                if f.data.shape != first.data.shape:
                    raise StructuralError(
                        f"frame {i} shape {f.data.shape} differs from frame 0 {first.data.shape}"
                    )
        if self.timestamps is not None and len(self.timestamps) != len(self.frames):
            raise StructuralError("timestamps length must match frame count")

    def __len__(self) -> int:
        return len(self.frames)

    def timestamp(self, i: int) -> float:
        if self.timestamps is not None:
            return self.timestamps[i]
        return i / self.frame_rate


# -- transfer curves ---------------------------------------------------------

def parse_transfer(transfer: str) -> float:
    """Return the gamma exponent for a transfer spec ("linear" or "gamma(g)")."""
    t = transfer.strip().lower()
    if t == "linear":
        return 1.0
    m = re.fullmatch(r"gamma[(:]?\s*([0-9.]+)\s*\)?", t)
    if m is None:
        raise StructuralError(f"unknown transfer {transfer!r}; use 'linear' or 'gamma(2.2)'")
    g = float(m.group(1))
    if g <= 0:
        raise StructuralError("gamma exponent must be > 0")
    return g


def format_transfer(g: float) -> str:
    return "linear" if g == 1.0 else f"gamma({g:g})"


def _encode(data: np.ndarray, g: float) -> np.ndarray:
    if g == 1.0:
        return data
    return np.power(np.maximum(data, 0.0), 1.0 / g)


def _decode(data: np.ndarray, g: float) -> np.ndarray:
    if g == 1.0:
        return data
    return np.power(np.maximum(data, 0.0), g)


# -- single-image I/O --------------------------------------------------------

def save_image(img: LinearImage, path: str, transfer: str = "linear", bit_depth: int = 16) -> None:
    """Write one image; extension picks the codec (.pfm float, .png integer)."""
    g = parse_transfer(transfer)
    ext = os.path.splitext(path)[1].lower()
    directory = os.path.dirname(path)
    if directory:
        os.makedirs(directory, exist_ok=True)
    data = _encode(img.data, g)
    if ext in FLOAT_EXTENSIONS:
        out = data.astype(np.float32)
        if out.ndim == 3:
            out = out[:, :, ::-1]  # cv2 expects BGR
        ok = cv2.imwrite(path, np.ascontiguousarray(out))
    elif ext in INTEGER_EXTENSIONS:
        if bit_depth not in (8, 16):
            raise StructuralError("integer exports support bit_depth 8 or 16")
        maxcode = (1 << bit_depth) - 1
        codes = np.clip(np.rint(np.clip(data, 0.0, 1.0) * maxcode), 0, maxcode)
        out = codes.astype(np.uint8 if bit_depth == 8 else np.uint16)
        if out.ndim == 3:
            out = out[:, :, ::-1]
        ok = cv2.imwrite(path, np.ascontiguousarray(out))
    else:
        raise SequenceIOError(f"unsupported image extension {ext!r}")
    if not ok:
        raise SequenceIOError(f"failed to write {path}")


def load_image(path: str, transfer: str = "linear") -> LinearImage:
    g = parse_transfer(transfer)
    raw = cv2.imread(path, cv2.IMREAD_UNCHANGED)
    if raw is None:
        raise SequenceIOError(f"cannot read image {path}")
    if raw.ndim == 3:
        if raw.shape[2] == 4:
            raw = raw[:, :, :3]
        raw = raw[:, :, ::-1]  # BGR -> RGB
    if raw.dtype == np.uint8:
        data = raw.astype(np.float32) / 255.0
    elif raw.dtype == np.uint16:
        data = raw.astype(np.float32) / 65535.0
    else:
        data = raw.astype(np.float32)
    return LinearImage(_decode(data, g))


# -- sequence pattern handling ----------------------------------------------

def expand_pattern(pattern: str) -> list[tuple[int, str]]:
    """List existing (frame_index, path) pairs for a %d-style path pattern."""
    base = os.path.basename(pattern)
    m = _FRAME_FIELD.search(base)
    if m is None:
        if os.path.exists(pattern):
            return [(0, pattern)]
        raise SequenceIOError(f"no frame field in pattern and file missing: {pattern}")
    directory = os.path.dirname(pattern) or "."
    rx = re.compile(
        "^" + re.escape(base[: m.start()]) + r"(\d+)" + re.escape(base[m.end():]) + "$"
    )
    found = []
    if os.path.isdir(directory):
        for name in os.listdir(directory):
            hit = rx.match(name)
            if hit:
                found.append((int(hit.group(1)), os.path.join(directory, name)))
    found.sort()
    return found


def sidecar_path(pattern: str) -> str:
    """Metadata sidecar location for a sequence pattern."""
    directory = os.path.dirname(pattern) or "."
    base = os.path.basename(pattern)
    m = _FRAME_FIELD.search(base)
    prefix = base[: m.start()] if m else os.path.splitext(base)[0]
    prefix = prefix.rstrip("_-. ")
    name = f"{prefix}_meta.txt" if prefix else "sequence_meta.txt"
    return os.path.join(directory, name)


def write_sidecar(pattern: str, frame_rate: float, label: str, transfer: str,
                  extra: dict[str, str] | None = None) -> str:
    path = sidecar_path(pattern)
    directory = os.path.dirname(path)
    if directory:
        os.makedirs(directory, exist_ok=True)
    lines = [f"frame_rate={frame_rate:g}", f"label={label}", f"transfer={transfer}"]
    for key in sorted(extra or {}):
        lines.append(f"{key}={(extra or {})[key]}")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")
    return path


def read_sidecar(pattern: str) -> dict[str, str]:
    path = sidecar_path(pattern)
    meta: dict[str, str] = {}
    if not os.path.exists(path):
        return meta
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line or line.startswith("#") or "=" not in line:
                continue
            key, value = line.split("=", 1)
            meta[key.strip()] = value.strip()
    return meta


def load_sequence(pattern: str, transfer: str | None = None,
                  frame_rate: float | None = None, label: str | None = None) -> FrameSequence:
    """Load all frames matching a %d pattern, linearized.

    Transfer, frame rate, and label default to the sequence sidecar when one
    exists, else to linear / 24 fps / "".
    """
    meta = read_sidecar(pattern)
    if transfer is None:
        transfer = meta.get("transfer", "linear")
    if frame_rate is None:
        frame_rate = float(meta.get("frame_rate", 24.0))
    if label is None:
        label = meta.get("label", "")
    entries = expand_pattern(pattern)
    if not entries:
        raise SequenceIOError(f"pattern matched no files: {pattern}")
    frames = []
    for idx, path in entries:
        try:
            frames.append(load_image(path, transfer))
        except SequenceIOError as exc:
            raise SequenceIOError(f"frame {idx}: {exc}") from exc
    first = frames[0]
    for i, f in enumerate(frames):
        if f.data.shape != first.data.shape:
            raise StructuralError(
                f"frame {entries[i][0]} shape {f.data.shape} differs from {first.data.shape}"
            )
    return FrameSequence(frames=frames, frame_rate=frame_rate, label=label)


def save_sequence(seq: FrameSequence, pattern: str, transfer: str = "linear",
                  bit_depth: int = 16, extra_meta: dict[str, str] | None = None) -> list[str]:
    """Write every frame of a sequence plus its metadata sidecar."""
    if "%" not in os.path.basename(pattern) and len(seq) != 1:
        raise SequenceIOError("pattern needs a %d frame field for multi-frame sequences")
    paths = []
    for i, frame in enumerate(seq.frames):
        path = pattern % i if "%" in os.path.basename(pattern) else pattern
        save_image(frame, path, transfer=transfer, bit_depth=bit_depth)
        paths.append(path)
    write_sidecar(pattern, seq.frame_rate, seq.label, transfer, extra=extra_meta)
    return paths
