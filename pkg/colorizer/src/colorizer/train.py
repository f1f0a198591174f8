"""Training loop: Adam on mean absolute error over augmented random crops."""

from __future__ import annotations

import os
from dataclasses import asdict, dataclass

import numpy as np
import torch

from .data import DataError, PatchSampler, TrainingManifest, load_manifest
from .model import ChannelRestorer


@dataclass
class ColorizerSpec:
    in_channels: int = 2
    out_channels: int = 1
    base_width: int = 32
    depth: int = 5
    crop: int = 512
    lr: float = 1e-4
    batch: int = 16
    iterations: int = 100_000
    seed: int = 0
    checkpoint_every: int = 0  # 0: five checkpoints over the run
    lr_decay: str = "none"  # "cosine" settles short desk-scale runs
    augment: bool = True
    loss: str = "l1"

    def __post_init__(self):
        for name in ("in_channels", "out_channels", "base_width", "depth",
                     "crop", "batch"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if self.lr <= 0:
            raise ValueError("lr must be positive")
        if self.iterations < 0:
            raise ValueError("iterations must be >= 0")
        if self.lr_decay not in ("none", "cosine"):
            raise ValueError("lr_decay must be 'none' or 'cosine'")
        if self.loss not in ("l1", "l2"):
            raise ValueError("loss must be 'l1' or 'l2'")


def expected_channels(manifest: TrainingManifest) -> tuple[int, int]:
    return (2, 1) if manifest.mode == "green" else (4, 2)


def save_model(model: ChannelRestorer, spec: ColorizerSpec, mode: str,
               target_channel: str, path: str, iteration: int) -> None:
    directory = os.path.dirname(path)
    if directory:
        os.makedirs(directory, exist_ok=True)
    torch.save({
        "state_dict": model.state_dict(),
        "spec": asdict(spec),
        "mode": mode,
        "target_channel": target_channel,
        "iteration": iteration,
    }, path)


def train(manifest: TrainingManifest | str, spec: ColorizerSpec,
          out_model_path: str, device: str = "cpu",
          log_every: int = 100) -> list[float]:
    """Train a restorer on the manifest's pairs; returns the loss history.

    Deterministic for a fixed seed on a fixed device. Checkpoints land next
    to the final model as <name>.ckpt<iteration>.
    """
    if isinstance(manifest, str):
        manifest = load_manifest(manifest)
    want_in, want_out = expected_channels(manifest)
    if (spec.in_channels, spec.out_channels) != (want_in, want_out):
        raise DataError(
            f"{manifest.mode} manifests need {want_in}->{want_out} channels, "
            f"spec has {spec.in_channels}->{spec.out_channels}")

    torch.manual_seed(spec.seed)
    model = ChannelRestorer(spec.in_channels, spec.out_channels,
                            spec.base_width, spec.depth).to(device)
    sampler = PatchSampler(manifest, spec.crop, seed=spec.seed, augment=spec.augment)
    optimizer = torch.optim.Adam(model.parameters(), lr=spec.lr)
    scheduler = None
    if spec.lr_decay == "cosine" and spec.iterations > 0:
        scheduler = torch.optim.lr_scheduler.CosineAnnealingLR(
            optimizer, T_max=spec.iterations)
    cadence = spec.checkpoint_every or max(1, spec.iterations // 5)

    losses: list[float] = []
    model.train()
    for step in range(spec.iterations):
        batch_in, batch_out = sampler.batch(spec.batch)
        inputs = torch.from_numpy(batch_in).to(device)
        targets = torch.from_numpy(batch_out).to(device)
        optimizer.zero_grad()
        residual = model(inputs) - targets
        loss = torch.mean(residual.abs() if spec.loss == "l1" else residual ** 2)
        loss.backward()
        optimizer.step()
        if scheduler is not None:
            scheduler.step()
        losses.append(float(loss.detach()))
        if log_every and (step + 1) % log_every == 0:
            window = np.mean(losses[-log_every:])
            print(f"iter {step + 1}/{spec.iterations} loss {window:.5f}")
        if (step + 1) % cadence == 0 and (step + 1) < spec.iterations:
            save_model(model, spec, manifest.mode, manifest.target_channel,
                       f"{out_model_path}.ckpt{step + 1}", step + 1)
    save_model(model, spec, manifest.mode, manifest.target_channel,
               out_model_path, spec.iterations)
    return losses


def train_matte_colorizer(manifest: TrainingManifest | str, spec: ColorizerSpec,
                          out_model_path: str, device: str = "cpu",
                          log_every: int = 100) -> list[float]:
    """Matte variant: monochrome holdout + prior RGB in, two holdout channels out."""
    if isinstance(manifest, str):
        manifest = load_manifest(manifest)
    if manifest.mode != "matte":
        raise DataError(f"matte training needs a matte manifest, got {manifest.mode!r}")
    return train(manifest, spec, out_model_path, device=device, log_every=log_every)
