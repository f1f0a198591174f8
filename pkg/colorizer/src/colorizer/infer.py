"""Inference on full frames: pad to the network stride, predict, crop back.

Patch-trained weights apply directly at any resolution; a tiled path exists
for memory-bound frames and agrees with the full-frame result away from tile
seams when the overlap covers the network's receptive blur.
"""

from __future__ import annotations

import os

import numpy as np
import torch

from .data import CHANNEL_INDEX, DataError, read_pfm, write_pfm
from .model import ChannelRestorer
from .train import ColorizerSpec


def load_model(path: str, device: str = "cpu") -> tuple[ChannelRestorer, dict]:
    if not os.path.exists(path):
        raise DataError(f"model file not found: {path}")
    payload = torch.load(path, map_location=device, weights_only=False)
    spec = ColorizerSpec(**payload["spec"])
    model = ChannelRestorer(spec.in_channels, spec.out_channels,
                            spec.base_width, spec.depth).to(device)
    model.load_state_dict(payload["state_dict"])
    model.eval()
    meta = {"spec": spec, "mode": payload["mode"],
            "target_channel": payload["target_channel"],
            "iteration": payload.get("iteration", 0)}
    return model, meta


def _pad_to_stride(array: np.ndarray, stride: int) -> tuple[np.ndarray, tuple[int, int]]:
    h, w = array.shape[:2]
    ph = (-h) % stride
    pw = (-w) % stride
    if ph or pw:
        array = np.pad(array, ((0, ph), (0, pw), (0, 0)), mode="reflect")
    return array, (h, w)


def predict(model: ChannelRestorer, inputs: np.ndarray,
            device: str = "cpu") -> np.ndarray:
    """Run one H x W x Cin array through the network, handling padding."""
    if inputs.ndim != 3 or inputs.shape[2] != model.in_channels:
        raise DataError(
            f"model expects {model.in_channels} input channels, "
            f"got shape {inputs.shape}")
    stride = 2 ** model.depth
    padded, (h, w) = _pad_to_stride(inputs, stride)
    tensor = torch.from_numpy(padded.transpose(2, 0, 1)[None]).to(device)
    with torch.no_grad():
        out = model(tensor)[0].cpu().numpy().transpose(1, 2, 0)
    return out[:h, :w]


def predict_tiled(model: ChannelRestorer, inputs: np.ndarray, tile: int,
                  overlap: int = 32, device: str = "cpu") -> np.ndarray:
    """Tile-wise prediction; each stitched pixel keeps at least ``overlap``
    pixels of context inside its tile, so seams stay confined."""
    h, w = inputs.shape[:2]
    out = np.zeros((h, w, model.out_channels), np.float32)
    step = tile - 2 * overlap
    if step <= 0:
        raise DataError("tile must exceed twice the overlap")
    y = 0
    while y < h:
        x = 0
        y0 = min(y, max(h - tile, 0))
        while x < w:
            x0 = min(x, max(w - tile, 0))
            patch = inputs[y0:y0 + tile, x0:x0 + tile]
            pred = predict(model, patch, device)
            ys = y0 + overlap if y0 > 0 else 0
            xs = x0 + overlap if x0 > 0 else 0
            ye = h if y0 + tile >= h else y0 + tile - overlap
            xe = w if x0 + tile >= w else x0 + tile - overlap
            out[ys:ye, xs:xe] = pred[ys - y0:ye - y0, xs - x0:xe - x0]
            x += step
        y += step
    return out


def _green_mode_inputs(path: str, lit: tuple[int, int]) -> np.ndarray:
    rgb = read_pfm(path)
    if rgb.ndim != 3:
        raise DataError(f"{path}: expected a 3-channel input image")
    return rgb[:, :, list(lit)]


def infer(model_path: str, input_paths: list[str], out_dir: str,
          prev_paths: list[str] | None = None, tile: int = 0,
          device: str = "cpu") -> list[str]:
    """Predict the withheld channel(s) for each frame.

    Channel-restoration models take the exporter's red+blue images and write
    a single-channel prediction per frame; matte models take (matte, prior
    RGB) pairs and write a 3-channel holdout with the mono channel passed
    through. Output files keep the input basenames.
    """
    model, meta = load_model(model_path, device)
    lit = _lit_indices(meta["target_channel"])
    os.makedirs(out_dir, exist_ok=True)
    written = []
    for i, path in enumerate(input_paths):
        try:
            if meta["mode"] == "green":
                inputs = _green_mode_inputs(path, lit)
            else:
                if prev_paths is None or i >= len(prev_paths):
                    raise DataError("matte inference needs a prior-frame image per input")
                mono = read_pfm(path)
                if mono.ndim != 2:
                    raise DataError(f"{path}: expected a single-channel matte")
                inputs = np.concatenate([mono[..., None], read_pfm(prev_paths[i])], axis=2)
        except DataError as exc:
            raise DataError(f"frame {i} ({os.path.basename(path)}): {exc}") from exc
        pred = (predict_tiled(model, inputs, tile, device=device) if tile
                else predict(model, inputs, device))
        out_path = os.path.join(out_dir, os.path.basename(path))
        if meta["mode"] == "green":
            write_pfm(out_path, pred[:, :, 0])
        else:
            holdout = np.zeros((*pred.shape[:2], 3), np.float32)
            holdout[:, :, CHANNEL_INDEX[meta["target_channel"]]] = inputs[:, :, 0]
            holdout[:, :, lit[0]] = pred[:, :, 0]
            holdout[:, :, lit[1]] = pred[:, :, 1]
            write_pfm(out_path, holdout)
        written.append(out_path)
    return written


def _lit_indices(target_channel: str) -> tuple[int, int]:
    target = CHANNEL_INDEX[target_channel]
    a, b = (i for i in range(3) if i != target)
    return a, b
