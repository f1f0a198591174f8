"""Shared fixtures: datasets come from the capture pipeline's CLI, so these
tests exercise the real file interface (PFM frames + training manifest)."""

import subprocess

import numpy as np
import pytest

from colorizer.data import load_example, load_manifest
from colorizer.train import ColorizerSpec, train, train_matte_colorizer

# every reflectance satisfies g = (r + b) / 2
LINEAR_PALETTE = [
    dict(kind="disk", reflectance=(0.8, 0.55, 0.3), at=(0.31, 0.31), vel=(3, 1.5),
         radius=0.115),
    dict(kind="rect", reflectance=(0.2, 0.5, 0.8), at=(0.63, 0.57), vel=(-2, 1),
         size=(0.27, 0.19), edge=2),
    dict(kind="blob", reflectance=(0.9, 0.5, 0.1), at=(0.5, 0.73), vel=(1, -2.5),
         radius=0.06, edge=0.08),
    dict(kind="strand", reflectance=(0.55, 0.575, 0.6), at=(0.42, 0.21), vel=(2, 2),
         length=0.31, thickness=1.5, angle=30, edge=1),
]

# no single mixing weight maps (r, b) to g: two sprites share r = b but
# differ wildly in green
NONLINEAR_PALETTE = [
    dict(kind="disk", reflectance=(0.8, 0.75, 0.1), at=(0.29, 0.31), vel=(3, 1.5),
         radius=0.115),
    dict(kind="rect", reflectance=(0.1, 0.05, 0.8), at=(0.65, 0.57), vel=(-2, 1),
         size=(0.27, 0.19), edge=2),
    dict(kind="disk", reflectance=(0.5, 0.9, 0.5), at=(0.52, 0.75), vel=(1, -2.5),
         radius=0.08, edge=2),
    dict(kind="rect", reflectance=(0.3, 0.05, 0.3), at=(0.37, 0.19), vel=(2, 2),
         size=(0.23, 0.125), edge=1),
]

GLASS_PALETTE = [
    dict(kind="rect", reflectance=(0.3, 0.05, 0.05), opacity=(0.3, 0.9, 0.6),
         at=(0.5, 0.5), vel=(2, 1), size=(0.42, 0.35), edge=2),
]


def make_scene_text(palette, width=96, height=96, frames=10, supersample=4):
    lines = [
        "[scene]",
        f"width = {width}",
        f"height = {height}",
        f"frames = {frames}",
        f"supersample = {supersample}",
        "bounce_fraction = 0",
        "crosstalk_w = 1 0 0 0 1 0 0 0 1",
    ]
    scale = min(width, height)
    for i, layer in enumerate(palette):
        lines += [f"\n[layer.{i}]", f"kind = {layer['kind']}"]
        lines.append("reflectance = " + " ".join(str(v) for v in layer["reflectance"]))
        if "opacity" in layer:
            lines.append("opacity = " + " ".join(str(v) for v in layer["opacity"]))
        x, y = layer["at"]
        lines.append(f"position = {x * width:.1f} {y * height:.1f}")
        vx, vy = layer.get("vel", (0, 0))
        lines.append(f"velocity = {vx} {vy}")
        if "radius" in layer:
            lines.append(f"radius = {layer['radius'] * scale:.1f}")
        if "size" in layer:
            lines.append(f"width = {layer['size'][0] * width:.1f}")
            lines.append(f"height = {layer['size'][1] * height:.1f}")
        if "length" in layer:
            lines.append(f"length = {layer['length'] * width:.1f}")
        if "thickness" in layer:
            lines.append(f"thickness = {layer['thickness']}")
        if "angle" in layer:
            lines.append(f"angle = {layer['angle']}")
        if "edge" in layer:
            edge = layer["edge"]
            edge = edge * scale if edge < 1 else edge
            lines.append(f"edge = {edge:.1f}")
    return "\n".join(lines) + "\n"


def run_pipeline(*argv: str) -> None:
    subprocess.run(["spectramatte", *argv], check=True, capture_output=True, text=True)


def export_green_dataset(root, scene_text, seed=3):
    scene_path = root / "scene.txt"
    scene_path.write_text(scene_text)
    run_pipeline("synth", "--scene", str(scene_path), "--out", str(root / "stage"))
    run_pipeline("export-training", "--frames", str(root / "stage/white/frame_%04d.pfm"),
                 "--out-dir", str(root / "train"), "--seed", str(seed))
    return str(root / "train" / "training_manifest.txt")


def export_matte_dataset(root, scene_text, seed=3):
    scene_path = root / "scene.txt"
    scene_path.write_text(scene_text)
    run_pipeline("synth", "--scene", str(scene_path), "--out", str(root / "stage"),
                 "--extended")
    run_pipeline("export-training", "--mode", "matte",
                 "--frames", str(root / "stage/silhouette/frame_%04d.pfm"),
                 "--rgb", str(root / "stage/white/frame_%04d.pfm"),
                 "--background-level", "1,1,1",
                 "--out-dir", str(root / "train"), "--seed", str(seed))
    return str(root / "train" / "training_manifest.txt")


def split_holdout(manifest_path, held=2):
    """Manifest restricted to the leading entries, plus the held-out examples."""
    manifest = load_manifest(manifest_path)
    entries = list(manifest.entries)
    held_examples = [load_example(manifest, i)
                     for i in range(len(entries) - held, len(entries))]
    manifest.entries = entries[:len(entries) - held]
    return manifest, held_examples


def desk_spec(**overrides) -> ColorizerSpec:
    base = dict(in_channels=2, out_channels=1, base_width=8, depth=5, crop=64,
                lr=2e-3, batch=8, iterations=1000, seed=1, lr_decay="cosine")
    base.update(overrides)
    return ColorizerSpec(**base)


def mean_absolute_error(model_path, held_examples):
    from colorizer.infer import load_model, predict

    model, _ = load_model(model_path)
    errors = []
    for inputs, targets in held_examples:
        pred = predict(model, inputs)
        errors.append(float(np.abs(pred - targets).mean()))
    return float(np.mean(errors))


@pytest.fixture(scope="session")
def linear_dataset(tmp_path_factory):
    root = tmp_path_factory.mktemp("linear_rule")
    return export_green_dataset(root, make_scene_text(LINEAR_PALETTE))


@pytest.fixture(scope="session")
def linear_model(tmp_path_factory, linear_dataset):
    manifest, held = split_holdout(linear_dataset)
    path = str(tmp_path_factory.mktemp("models") / "linear.pt")
    # batch 16 averages enough augmentation noise to settle under the
    # acceptance tolerance within the 1000-iteration budget
    train(manifest, desk_spec(batch=16), path, log_every=0)
    return {"path": path, "held": held, "manifest": linear_dataset}


@pytest.fixture(scope="session")
def nonlinear_dataset(tmp_path_factory):
    root = tmp_path_factory.mktemp("nonlinear")
    return export_green_dataset(root, make_scene_text(NONLINEAR_PALETTE))


@pytest.fixture(scope="session")
def nonlinear_model(tmp_path_factory, nonlinear_dataset):
    manifest, held = split_holdout(nonlinear_dataset)
    path = str(tmp_path_factory.mktemp("models") / "nonlinear.pt")
    train(manifest, desk_spec(), path, log_every=0)
    return {"path": path, "held": held, "manifest": nonlinear_dataset}


@pytest.fixture(scope="session")
def neutral_matte_model(tmp_path_factory):
    root = tmp_path_factory.mktemp("neutral_matte")
    manifest_path = export_matte_dataset(root, make_scene_text(LINEAR_PALETTE))
    manifest, held = split_holdout(manifest_path)
    path = str(root / "matte.pt")
    train_matte_colorizer(manifest, desk_spec(in_channels=4, out_channels=2,
                                              iterations=600), path, log_every=0)
    return {"path": path, "held": held, "manifest": manifest_path, "root": root}


@pytest.fixture(scope="session")
def seam_frames(tmp_path_factory):
    """Full-resolution (r, b) inputs rendered at the two acceptance sizes."""
    from colorizer.data import read_pfm

    frames = {}
    for w, h, supersample in ((512, 512, 2), (1920, 1088, 1)):
        root = tmp_path_factory.mktemp(f"seam_{w}x{h}")
        scene = make_scene_text(LINEAR_PALETTE, width=w, height=h, frames=1,
                                supersample=supersample)
        (root / "scene.txt").write_text(scene)
        run_pipeline("synth", "--scene", str(root / "scene.txt"),
                     "--out", str(root / "stage"))
        run_pipeline("export-training", "--frames",
                     str(root / "stage/white/frame_%04d.pfm"),
                     "--out-dir", str(root / "train"))
        rgb = read_pfm(str(root / "train" / "input_0000.pfm"))
        frames[(w, h)] = rgb[:, :, [0, 2]]
    return frames


@pytest.fixture(scope="session")
def glass_matte_model(tmp_path_factory):
    root = tmp_path_factory.mktemp("glass_matte")
    manifest_path = export_matte_dataset(root, make_scene_text(GLASS_PALETTE))
    manifest, held = split_holdout(manifest_path)
    path = str(root / "matte.pt")
    train_matte_colorizer(manifest, desk_spec(in_channels=4, out_channels=2),
                          path, log_every=0)
    return {"path": path, "held": held, "manifest": manifest_path, "root": root}
