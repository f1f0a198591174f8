"""Training-manifest parsing, float image I/O, and patch sampling.

The manifest is the file contract with the capture pipeline: a plain-text
header (mode, target channel, tonemap exponent, seed, augmentation ranges)
followed by pair lines of tab-separated input and target paths. Images are
PFM floats, already tonemapped by the exporter.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field

import cv2
import numpy as np

CHANNEL_INDEX = {"R": 0, "G": 1, "B": 2}


class DataError(Exception):
    pass


def read_pfm(path: str) -> np.ndarray:
    img = cv2.imread(path, cv2.IMREAD_UNCHANGED)
    if img is None:
        raise DataError(f"cannot read image {path}")
    if img.ndim == 3:
        img = img[:, :, ::-1]  # BGR -> RGB
    return np.ascontiguousarray(img.astype(np.float32))


def write_pfm(path: str, data: np.ndarray) -> None:
    directory = os.path.dirname(path)
    if directory:
        os.makedirs(directory, exist_ok=True)
    out = data.astype(np.float32)
    if out.ndim == 3:
        out = out[:, :, ::-1]
    if not cv2.imwrite(path, np.ascontiguousarray(out)):
        raise DataError(f"cannot write image {path}")


@dataclass
class TrainingManifest:
    mode: str                      # "green" (restore a channel) or "matte"
    target_channel: str
    tonemap: float
    seed: int
    aug_luminance: tuple[float, float]
    aug_balance: tuple[float, float]
    entries: list[tuple[str, str | None, str]] = field(default_factory=list)
    path: str = ""

    @property
    def lit_indices(self) -> tuple[int, int]:
        """The two channels that are observed (and predicted, in matte mode)."""
        target = CHANNEL_INDEX[self.target_channel]
        a, b = (i for i in range(3) if i != target)
        return a, b


def load_manifest(path: str) -> TrainingManifest:
    if not os.path.exists(path):
        raise DataError(f"manifest not found: {path}")
    header: dict[str, str] = {}
    entries: list[tuple[str, str | None, str]] = []
    base = os.path.dirname(path)

    def resolve(token: str) -> str | None:
        if token == "-":
            return None
        return token if os.path.isabs(token) else os.path.normpath(os.path.join(base, token))

    with open(path, encoding="utf-8") as fh:
        for raw in fh:
            line = raw.rstrip("\n")
            if not line or line.startswith("#"):
                continue
            key, value = line.split("=", 1)
            if key == "pair":
                parts = value.split("\t")
                if len(parts) != 3:
                    raise DataError(f"malformed pair line: {line!r}")
                first, second, target = (resolve(p) for p in parts)
                entries.append((first, second, target))
            else:
                header[key] = value
    if not entries:
        raise DataError(f"manifest {path} lists no training pairs")

    def pair_of(key: str, default: str) -> tuple[float, float]:
        lo, hi = header.get(key, default).split(",")
        return float(lo), float(hi)

    return TrainingManifest(
        mode=header.get("mode", "green"),
        target_channel=header.get("target_channel", "G"),
        tonemap=float(header.get("tonemap", 2.2)),
        seed=int(header.get("seed", 0)),
        aug_luminance=pair_of("aug_luminance", "0.7,1.3"),
        aug_balance=pair_of("aug_balance", "0.9,1.1"),
        entries=entries,
        path=path,
    )


def load_example(manifest: TrainingManifest, index: int) -> tuple[np.ndarray, np.ndarray]:
    """One training example as (input H x W x Cin, target H x W x Cout)."""
    first, second, target_path = manifest.entries[index]
    target_img = read_pfm(target_path)
    a, b = manifest.lit_indices
    if manifest.mode == "green":
        rgb = read_pfm(first)
        if rgb.ndim != 3:
            raise DataError(f"{first}: expected a 3-channel input image")
        inputs = rgb[:, :, [a, b]]
        targets = target_img[..., None] if target_img.ndim == 2 else target_img
    elif manifest.mode == "matte":
        mono = read_pfm(first)
        if mono.ndim != 2:
            raise DataError(f"{first}: expected a single-channel matte")
        if second is None:
            raise DataError(f"matte entry {index} is missing its prior-frame image")
        prev = read_pfm(second)
        inputs = np.concatenate([mono[..., None], prev], axis=2)
        if target_img.ndim != 3:
            raise DataError(f"{target_path}: expected a 3-channel holdout target")
        targets = target_img[:, :, [a, b]]
    else:
        raise DataError(f"unknown manifest mode {manifest.mode!r}")
    if inputs.shape[:2] != targets.shape[:2]:
        raise DataError(f"entry {index}: input and target sizes differ")
    return inputs, targets


class PatchSampler:
    """Deterministic random crops with luminance/color-balance augmentation."""

    def __init__(self, manifest: TrainingManifest, crop: int, seed: int,
                 augment: bool = True):
        self.manifest = manifest
        self.crop = crop
        self.rng = np.random.default_rng(seed)
        self.augment = augment
        self.examples = [load_example(manifest, i) for i in range(len(manifest.entries))]
        for i, (inputs, _) in enumerate(self.examples):
            if crop > min(inputs.shape[:2]):
                raise DataError(
                    f"crop {crop} exceeds frame size {inputs.shape[1]}x{inputs.shape[0]}"
                    f" of entry {i}")

    def _augment(self, inputs: np.ndarray, targets: np.ndarray):
        lum = self.rng.uniform(*self.manifest.aug_luminance)
        balance = self.rng.uniform(*self.manifest.aug_balance, size=3)
        a, b = self.manifest.lit_indices
        target_idx = CHANNEL_INDEX[self.manifest.target_channel]
        inputs = inputs.copy()
        targets = targets.copy()
        if self.manifest.mode == "green":
            inputs[:, :, 0] *= lum * balance[a]
            inputs[:, :, 1] *= lum * balance[b]
            targets[:, :, 0] *= lum * balance[target_idx]
        else:
            # mattes are ratios: only the prior-frame RGB channels vary
            inputs[:, :, 1:4] *= lum * balance
        return np.clip(inputs, 0.0, 1.0), np.clip(targets, 0.0, 1.0)

    def batch(self, size: int) -> tuple[np.ndarray, np.ndarray]:
        ins = []
        outs = []
        for _ in range(size):
            inputs, targets = self.examples[int(self.rng.integers(len(self.examples)))]
            h, w = inputs.shape[:2]
            y = int(self.rng.integers(0, h - self.crop + 1))
            x = int(self.rng.integers(0, w - self.crop + 1))
            ci = inputs[y:y + self.crop, x:x + self.crop]
            ct = targets[y:y + self.crop, x:x + self.crop]
            if self.augment:
                ci, ct = self._augment(ci, ct)
            ins.append(ci)
            outs.append(ct)
        batch_in = np.stack(ins).transpose(0, 3, 1, 2)
        batch_out = np.stack(outs).transpose(0, 3, 1, 2)
        return batch_in, batch_out
