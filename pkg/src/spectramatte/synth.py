"""Virtual stage: render scenes with analytically known RGBA ground truth
under every capture modality.

Layers are parametric sprites whose coverage is known in closed form at any
subpixel position; captures composite them per lighting condition over the
condition's background emission, add a uniform bounce term on the background,
and push everything through the stage's crosstalk matrix. Rendering happens
on a supersampled grid that is box-filtered down once, so a capture and its
ground truth see exactly the same edge coverage.
"""

from __future__ import annotations

import configparser
import io
import os
from dataclasses import dataclass, field

import numpy as np

from .calibration import ChartRegion
from .compositing import ColorMatte
from .errors import StructuralError
from .image import FrameSequence, LinearImage, save_image, save_sequence
from .multiplex import LightingSchedule

MAGENTA_GREEN = "magenta-green"
GREEN_MAGENTA = "green-magenta"
YELLOW_BLUE = "yellow-blue"
WHITE_LIT_BLACK = "white-lit-black"
SILHOUETTE_WHITE = "silhouette-white"
BACKGROUND_GREEN = "background-green"
BACKGROUND_BLUE = "background-blue"
CLEAN_PLATE = "clean-plate"
BOUNCE_PLATE = "bounce-plate"

CONDITIONS = (
    MAGENTA_GREEN, GREEN_MAGENTA, YELLOW_BLUE, WHITE_LIT_BLACK,
    SILHOUETTE_WHITE, BACKGROUND_GREEN, BACKGROUND_BLUE, CLEAN_PLATE,
    BOUNCE_PLATE,
)

DEFAULT_LIGHTING = {
    MAGENTA_GREEN: (1.0, 0.0, 1.0),
    GREEN_MAGENTA: (0.0, 1.0, 0.0),
    YELLOW_BLUE: (1.0, 1.0, 0.0),
    WHITE_LIT_BLACK: (1.0, 1.0, 1.0),
    SILHOUETTE_WHITE: (0.0, 0.0, 0.0),
    BACKGROUND_GREEN: (1.0, 1.0, 1.0),
    BACKGROUND_BLUE: (1.0, 1.0, 1.0),
}

DEFAULT_BACKGROUND = {
    MAGENTA_GREEN: (0.0, 1.0, 0.0),
    GREEN_MAGENTA: (1.0, 0.0, 1.0),
    YELLOW_BLUE: (0.0, 0.0, 1.0),
    WHITE_LIT_BLACK: (0.0, 0.0, 0.0),
    SILHOUETTE_WHITE: (1.0, 1.0, 1.0),
    BACKGROUND_GREEN: (0.0, 1.0, 0.0),
    BACKGROUND_BLUE: (0.0, 0.0, 1.0),
}

CHART_SIZE = 64
CHART_REGION = ChartRegion(x=24, y=24, w=16, h=16)
CHART_SURROUND_REFLECTANCE = 0.25

SPRITE_KINDS = ("disk", "rect", "blob", "strand")


@dataclass(frozen=True)
class Sprite:
    """One layer: reflectance, closed-form coverage profile, rigid motion.

    ``opacity`` scales coverage per channel, modeling colored transparency;
    neutral layers keep (1, 1, 1). ``position`` is the shape center in pixels
    at frame 0 and ``velocity`` is pixels per frame.
    """

    kind: str
    reflectance: tuple[float, float, float]
    position: tuple[float, float]
    velocity: tuple[float, float] = (0.0, 0.0)
    opacity: tuple[float, float, float] = (1.0, 1.0, 1.0)
    radius: float = 8.0         # disk, blob core
    width: float = 16.0         # rect
    height: float = 10.0        # rect
    length: float = 24.0        # strand
    thickness: float = 1.5      # strand
    angle: float = 0.0          # strand orientation, degrees
    edge: float = 0.0           # soft-edge width (blob and strand need > 0)

    def __post_init__(self):
        if self.kind not in SPRITE_KINDS:
            raise StructuralError(f"unknown sprite kind {self.kind!r}")
        if self.kind in ("blob", "strand") and self.edge <= 0:
            object.__setattr__(self, "edge", 1.0 if self.kind == "strand" else 4.0)

    def center(self, t: float) -> tuple[float, float]:
        return (self.position[0] + self.velocity[0] * t,
                self.position[1] + self.velocity[1] * t)

    def coverage(self, xx: np.ndarray, yy: np.ndarray, t: float) -> np.ndarray:
        """Coverage in [0, 1] at the given sample coordinates, frame time t."""
        cx, cy = self.center(t)
        dx = xx - cx
        dy = yy - cy
        if self.kind == "disk":
            d = np.hypot(dx, dy)
            if self.edge <= 0:
                return (d <= self.radius).astype(np.float64)
            return np.clip((self.radius + self.edge / 2 - d) / self.edge, 0.0, 1.0)
        if self.kind == "rect":
            if self.edge <= 0:
                ax = (np.abs(dx) <= self.width / 2).astype(np.float64)
                ay = (np.abs(dy) <= self.height / 2).astype(np.float64)
            else:
                ax = np.clip((self.width / 2 + self.edge / 2 - np.abs(dx)) / self.edge, 0.0, 1.0)
                ay = np.clip((self.height / 2 + self.edge / 2 - np.abs(dy)) / self.edge, 0.0, 1.0)
            return ax * ay
        if self.kind == "blob":
            d = np.hypot(dx, dy)
            ramp = np.clip((d - self.radius) / self.edge, 0.0, 1.0)
            return 0.5 + 0.5 * np.cos(np.pi * ramp)
        # strand: soft-edged line segment
        rad = np.deg2rad(self.angle)
        cos_a, sin_a = np.cos(rad), np.sin(rad)
        along = dx * cos_a + dy * sin_a
        across = -dx * sin_a + dy * cos_a
        run = np.maximum(np.abs(along) - self.length / 2, 0.0)
        d = np.hypot(run, across)
        return np.clip((self.thickness / 2 + self.edge / 2 - d) / self.edge, 0.0, 1.0)


@dataclass
class StageScene:
    """Scene description: layers, per-condition lighting, crosstalk, bounce."""

    width: int
    height: int
    frames: int = 1
    camera_rate: float = 24.0
    layers: list[Sprite] = field(default_factory=list)
    lighting: dict[str, tuple[float, float, float]] = field(default_factory=dict)
    background_emission: dict[str, tuple[float, float, float]] = field(default_factory=dict)
    crosstalk_w: np.ndarray = field(default_factory=lambda: np.eye(3))
    bounce_fraction: float = 0.0
    noise_sigma: float = 0.0
    noise_seed: int = 0
    matte_condition: str = MAGENTA_GREEN
    supersample: int = 4
    chart_level: float = 1.0

    def __post_init__(self):
        if self.width <= 0 or self.height <= 0 or self.frames <= 0:
            raise StructuralError("scene dimensions and frame count must be positive")
        if self.supersample < 1:
            raise StructuralError("supersample factor must be >= 1")
        if self.bounce_fraction < 0:
            raise StructuralError("bounce fraction must be >= 0")
        self.crosstalk_w = np.asarray(self.crosstalk_w, dtype=np.float64)
        if self.crosstalk_w.shape != (3, 3):
            raise StructuralError("crosstalk matrix must be 3x3")
        if np.linalg.cond(self.crosstalk_w) > 1e3:
            raise StructuralError("crosstalk matrix is ill-conditioned")
        if self.matte_condition not in (MAGENTA_GREEN, YELLOW_BLUE, GREEN_MAGENTA):
            raise StructuralError(f"matte condition {self.matte_condition!r} not keyable")
        self.lighting = {**DEFAULT_LIGHTING, **self.lighting}
        self.background_emission = {**DEFAULT_BACKGROUND, **self.background_emission}

    def gains_for(self, condition: str) -> np.ndarray:
        return np.asarray(self.lighting[condition], dtype=np.float64)

    def background_for(self, condition: str) -> np.ndarray:
        return np.asarray(self.background_emission[condition], dtype=np.float64)


def _sample_grid(scene: StageScene) -> tuple[np.ndarray, np.ndarray]:
    s = scene.supersample
    xs = (np.arange(scene.width * s, dtype=np.float64) + 0.5) / s
    ys = (np.arange(scene.height * s, dtype=np.float64) + 0.5) / s
    return np.meshgrid(xs, ys)


def _downsample(arr: np.ndarray, s: int) -> np.ndarray:
    if s == 1:
        return arr
    h = arr.shape[0] // s
    w = arr.shape[1] // s
    shaped = arr.reshape(h, s, w, s, *arr.shape[2:])
    return shaped.mean(axis=(1, 3))


def _composite_layers(scene: StageScene, t: float, gains: np.ndarray
                      ) -> tuple[np.ndarray, np.ndarray]:
    """Supersampled premultiplied color and per-channel alpha, back to front."""
    xx, yy = _sample_grid(scene)
    premult = np.zeros((*xx.shape, 3), dtype=np.float64)
    alpha = np.zeros_like(premult)
    for layer in scene.layers:
        cov = layer.coverage(xx, yy, t)
        a_c = cov[..., None] * np.asarray(layer.opacity, dtype=np.float64)
        color = gains * np.asarray(layer.reflectance, dtype=np.float64)
        premult = a_c * color + (1.0 - a_c) * premult
        alpha = a_c + (1.0 - a_c) * alpha
    return premult, alpha


def render_truth(scene: StageScene, frame_idx: float
                 ) -> tuple[LinearImage, LinearImage, ColorMatte]:
    """Ground truth at one frame: unlit premultiplied reflectance, scalar
    alpha (the green-channel coverage), and the per-channel color matte."""
    _check_frame(scene, frame_idx)
    premult, alpha = _composite_layers(scene, frame_idx, np.ones(3))
    s = scene.supersample
    rgb = _downsample(premult, s)
    alpha_rgb = _downsample(alpha, s)
    return (LinearImage(rgb), LinearImage(alpha_rgb[:, :, 1]),
            ColorMatte(LinearImage(alpha_rgb)))


def _check_frame(scene: StageScene, frame_idx: float) -> None:
    if frame_idx < 0 or frame_idx >= scene.frames:
        raise StructuralError(f"frame {frame_idx} outside scene range [0, {scene.frames})")


def _bounce_level(premult: np.ndarray, fraction: float) -> np.ndarray:
    """Uniform bounce emission: fraction of the mean premultiplied flux."""
    return fraction * premult.reshape(-1, 3).mean(axis=0)


def render_capture(scene: StageScene, condition: str, frame_idx: float,
                   rng: np.random.Generator | None = None) -> LinearImage:
    """Simulate the camera frame for one lighting condition.

    Lit layers composite over the condition's background emission; bounce
    adds where the background shows through; the crosstalk matrix mixes the
    result into camera channels. Plate conditions render without the subject.
    """
    if condition not in CONDITIONS:
        raise StructuralError(f"unknown capture condition {condition!r}")
    _check_frame(scene, frame_idx)
    s = scene.supersample
    shape = (scene.height, scene.width, 3)

    if condition == CLEAN_PLATE:
        emission = scene.background_for(scene.matte_condition)
        out = np.broadcast_to(emission, shape).copy()
    elif condition == BOUNCE_PLATE:
        gains = scene.gains_for(scene.matte_condition)
        premult, _ = _composite_layers(scene, frame_idx, gains)
        bounce = _bounce_level(premult, scene.bounce_fraction)
        out = np.broadcast_to(bounce, shape).copy()
    else:
        gains = scene.gains_for(condition)
        emission = scene.background_for(condition)
        premult, alpha = _composite_layers(scene, frame_idx, gains)
        capture = premult + (1.0 - alpha) * emission
        if scene.bounce_fraction > 0 and gains.any():
            bounce = _bounce_level(premult, scene.bounce_fraction)
            capture = capture + (1.0 - alpha) * bounce
        out = _downsample(capture, s)

    out = out @ scene.crosstalk_w.T
    if scene.noise_sigma > 0:
        if rng is None:
            seed = (scene.noise_seed, CONDITIONS.index(condition), int(frame_idx * 1024))
            rng = np.random.default_rng(seed)
        out = out + rng.normal(0.0, scene.noise_sigma, out.shape)
    return LinearImage(out)


def render_chart(scene: StageScene, primary: str) -> LinearImage:
    """Chart capture under one LED primary: neutral surround, white square."""
    index = {"red": 0, "green": 1, "blue": 2}.get(primary)
    if index is None:
        raise StructuralError(f"chart primary must be red/green/blue, not {primary!r}")
    light = np.zeros(3)
    light[index] = scene.chart_level
    chart = np.full((CHART_SIZE, CHART_SIZE, 3), CHART_SURROUND_REFLECTANCE, dtype=np.float64)
    r = CHART_REGION
    chart[r.y:r.y + r.h, r.x:r.x + r.w, :] = 1.0
    return LinearImage((chart * light) @ scene.crosstalk_w.T)


def render_background_plate(scene: StageScene, condition: str) -> LinearImage:
    """The lit background of one condition without the subject, as captured."""
    if condition not in DEFAULT_BACKGROUND:
        raise StructuralError(f"condition {condition!r} has no background emission")
    emission = scene.background_for(condition)
    shape = (scene.height, scene.width, 3)
    return LinearImage(np.broadcast_to(emission, shape) @ scene.crosstalk_w.T)


def render_multiplexed(scene: StageScene, schedule: LightingSchedule) -> FrameSequence:
    """Interleaved capture cycling the schedule's conditions frame by frame.

    The camera may run at the scene rate or twice it (alternating-condition
    capture); motion is evaluated at each frame's exposure midpoint, which is
    the frame timestamp under the instantaneous-exposure model.
    """
    ratio = schedule.camera_rate / scene.camera_rate
    if abs(ratio - 1.0) > 1e-9 and abs(ratio - 2.0) > 1e-9:
        raise StructuralError(
            f"schedule camera rate {schedule.camera_rate:g} must be the scene rate "
            f"{scene.camera_rate:g} or twice it"
        )
    count = int(round(scene.frames * ratio))
    frames = [
        render_capture(scene, schedule.condition_for_frame(i), i / ratio)
        for i in range(count)
    ]
    return FrameSequence(frames=frames, frame_rate=schedule.camera_rate, label="multiplexed")


# -- scene construction ------------------------------------------------------

def default_scene(width: int = 160, height: int = 120, frames: int = 3,
                  bounce_fraction: float = 0.05, crosstalk: bool = True) -> StageScene:
    """A deterministic scene exercising hard, soft, and thin coverage."""
    w = np.array([[0.90, 0.10, 0.05],
                  [0.08, 0.85, 0.10],
                  [0.02, 0.10, 0.90]]) if crosstalk else np.eye(3)
    layers = [
        Sprite(kind="rect", reflectance=(0.35, 0.55, 0.25),
               position=(width * 0.62, height * 0.58), velocity=(-1.0, 0.0),
               width=width * 0.22, height=height * 0.3, edge=2.0),
        Sprite(kind="disk", reflectance=(0.8, 0.45, 0.3),
               position=(width * 0.35, height * 0.42), velocity=(2.0, 0.5),
               radius=min(width, height) * 0.18),
        Sprite(kind="blob", reflectance=(0.55, 0.6, 0.75),
               position=(width * 0.5, height * 0.72), velocity=(0.5, -1.0),
               radius=min(width, height) * 0.08, edge=min(width, height) * 0.1),
        Sprite(kind="strand", reflectance=(0.7, 0.65, 0.5),
               position=(width * 0.45, height * 0.3), velocity=(1.5, 0.0),
               length=width * 0.3, thickness=1.2, angle=25.0, edge=1.0),
    ]
    return StageScene(width=width, height=height, frames=frames, layers=layers,
                      crosstalk_w=w, bounce_fraction=bounce_fraction)


def random_scene(seed: int, width: int = 128, height: int = 96, frames: int = 2,
                 bounce_range: tuple[float, float] = (0.0, 0.1),
                 crosstalk: bool = True, moving: bool = True) -> StageScene:
    """Randomized neutral-opacity scene with a well-conditioned crosstalk matrix."""
    rng = np.random.default_rng(seed)
    n_layers = int(rng.integers(2, 5))
    layers = []
    for _ in range(n_layers):
        kind = SPRITE_KINDS[int(rng.integers(0, len(SPRITE_KINDS)))]
        velocity = tuple(rng.uniform(-2.0, 2.0, 2)) if moving else (0.0, 0.0)
        layers.append(Sprite(
            kind=kind,
            reflectance=tuple(rng.uniform(0.15, 0.9, 3)),
            position=(rng.uniform(0.25, 0.75) * width, rng.uniform(0.25, 0.75) * height),
            velocity=velocity,
            radius=rng.uniform(0.08, 0.2) * min(width, height),
            width=rng.uniform(0.1, 0.3) * width,
            height=rng.uniform(0.1, 0.3) * height,
            length=rng.uniform(0.15, 0.4) * width,
            thickness=rng.uniform(1.0, 2.5),
            angle=rng.uniform(0.0, 180.0),
            edge=float(rng.choice([0.0, 1.5, 3.0])),
        ))
    if crosstalk:
        w = np.eye(3) * rng.uniform(0.75, 0.95)
        w += rng.uniform(0.01, 0.12, (3, 3)) * (1 - np.eye(3))
    else:
        w = np.eye(3)
    return StageScene(width=width, height=height, frames=frames, layers=layers,
                      crosstalk_w=w,
                      bounce_fraction=float(rng.uniform(*bounce_range)))


# -- scene file I/O ----------------------------------------------------------

def _fmt_floats(values) -> str:
    return " ".join(f"{float(v):.10g}" for v in np.asarray(values).ravel())


def _parse_floats(text: str) -> list[float]:
    return [float(tok) for tok in text.replace(",", " ").split()]


def serialize_scene(scene: StageScene) -> str:
    cp = configparser.ConfigParser()
    cp["scene"] = {
        "width": str(scene.width),
        "height": str(scene.height),
        "frames": str(scene.frames),
        "camera_rate": f"{scene.camera_rate:g}",
        "supersample": str(scene.supersample),
        "bounce_fraction": f"{scene.bounce_fraction:.10g}",
        "noise_sigma": f"{scene.noise_sigma:.10g}",
        "noise_seed": str(scene.noise_seed),
        "matte_condition": scene.matte_condition,
        "chart_level": f"{scene.chart_level:.10g}",
        "crosstalk_w": _fmt_floats(scene.crosstalk_w),
    }
    for cond in CONDITIONS:
        if cond in scene.lighting and cond in DEFAULT_LIGHTING:
            if tuple(scene.lighting[cond]) != DEFAULT_LIGHTING[cond]:
                cp["scene"][f"lighting.{cond}"] = _fmt_floats(scene.lighting[cond])
        if cond in scene.background_emission and cond in DEFAULT_BACKGROUND:
            if tuple(scene.background_emission[cond]) != DEFAULT_BACKGROUND[cond]:
                cp["scene"][f"background.{cond}"] = _fmt_floats(scene.background_emission[cond])
    for i, layer in enumerate(scene.layers):
        cp[f"layer.{i}"] = {
            "kind": layer.kind,
            "reflectance": _fmt_floats(layer.reflectance),
            "opacity": _fmt_floats(layer.opacity),
            "position": _fmt_floats(layer.position),
            "velocity": _fmt_floats(layer.velocity),
            "radius": f"{layer.radius:.10g}",
            "width": f"{layer.width:.10g}",
            "height": f"{layer.height:.10g}",
            "length": f"{layer.length:.10g}",
            "thickness": f"{layer.thickness:.10g}",
            "angle": f"{layer.angle:.10g}",
            "edge": f"{layer.edge:.10g}",
        }
    buf = io.StringIO()
    cp.write(buf)
    return buf.getvalue()


def parse_scene(text: str) -> StageScene:
    cp = configparser.ConfigParser()
    cp.read_string(text)
    if "scene" not in cp:
        raise StructuralError("scene file needs a [scene] section")
    sc = cp["scene"]
    lighting = {}
    background = {}
    for key, value in sc.items():
        if key.startswith("lighting."):
            lighting[key[len("lighting."):]] = tuple(_parse_floats(value))
        elif key.startswith("background."):
            background[key[len("background."):]] = tuple(_parse_floats(value))
    layers = []
    for section in cp.sections():
        if not section.startswith("layer."):
            continue
        ls = cp[section]
        layers.append((int(section.split(".", 1)[1]), Sprite(
            kind=ls.get("kind", "disk"),
            reflectance=tuple(_parse_floats(ls.get("reflectance", "0.5 0.5 0.5"))),
            opacity=tuple(_parse_floats(ls.get("opacity", "1 1 1"))),
            position=tuple(_parse_floats(ls.get("position", "0 0"))),
            velocity=tuple(_parse_floats(ls.get("velocity", "0 0"))),
            radius=ls.getfloat("radius", 8.0),
            width=ls.getfloat("width", 16.0),
            height=ls.getfloat("height", 10.0),
            length=ls.getfloat("length", 24.0),
            thickness=ls.getfloat("thickness", 1.5),
            angle=ls.getfloat("angle", 0.0),
            edge=ls.getfloat("edge", 0.0),
        )))
    layers.sort(key=lambda pair: pair[0])
    w_values = _parse_floats(sc.get("crosstalk_w", "1 0 0 0 1 0 0 0 1"))
    return StageScene(
        width=sc.getint("width"),
        height=sc.getint("height"),
        frames=sc.getint("frames", 1),
        camera_rate=sc.getfloat("camera_rate", 24.0),
        layers=[sprite for _, sprite in layers],
        lighting=lighting,
        background_emission=background,
        crosstalk_w=np.array(w_values).reshape(3, 3),
        bounce_fraction=sc.getfloat("bounce_fraction", 0.0),
        noise_sigma=sc.getfloat("noise_sigma", 0.0),
        noise_seed=sc.getint("noise_seed", 0),
        matte_condition=sc.get("matte_condition", MAGENTA_GREEN),
        supersample=sc.getint("supersample", 4),
        chart_level=sc.getfloat("chart_level", 1.0),
    )


def load_scene(path: str) -> StageScene:
    with open(path, encoding="utf-8") as fh:
        return parse_scene(fh.read())


def save_scene(scene: StageScene, path: str) -> None:
    directory = os.path.dirname(path)
    if directory:
        os.makedirs(directory, exist_ok=True)
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(serialize_scene(scene))


# -- capture-set export ------------------------------------------------------

CONDITION_DIRS = {
    MAGENTA_GREEN: "mg",
    GREEN_MAGENTA: "gm",
    YELLOW_BLUE: "yb",
    WHITE_LIT_BLACK: "white",
    SILHOUETTE_WHITE: "silhouette",
    BACKGROUND_GREEN: "bgg",
    BACKGROUND_BLUE: "bgb",
}

BASIC_CONDITIONS = (MAGENTA_GREEN, GREEN_MAGENTA, WHITE_LIT_BLACK)


def write_capture_set(scene: StageScene, out_dir: str,
                      extended: bool = False) -> dict[str, str]:
    """Emit a full capture set: per-condition sequences, chart shots, plates,
    and ground truth, each with its metadata sidecar.

    Returns a map of logical names to the written file patterns.
    """
    os.makedirs(out_dir, exist_ok=True)
    save_scene(scene, os.path.join(out_dir, "scene.txt"))
    written: dict[str, str] = {"scene": os.path.join(out_dir, "scene.txt")}
    conditions = CONDITIONS[:7] if extended else BASIC_CONDITIONS

    def emit(name: str, frames: list[LinearImage], pattern: str, label: str) -> None:
        seq = FrameSequence(frames=frames, frame_rate=scene.camera_rate, label=label)
        save_sequence(seq, pattern, transfer="linear")
        written[name] = pattern

    for condition in conditions:
        sub = CONDITION_DIRS[condition]
        frames = [render_capture(scene, condition, i) for i in range(scene.frames)]
        emit(sub, frames, os.path.join(out_dir, sub, "frame_%04d.pfm"), condition)

    truths = [render_truth(scene, i) for i in range(scene.frames)]
    emit("truth_rgb", [t[0] for t in truths],
         os.path.join(out_dir, "truth", "rgb_%04d.pfm"), "truth-rgb")
    emit("truth_alpha", [t[1] for t in truths],
         os.path.join(out_dir, "truth", "alpha_%04d.pfm"), "truth-alpha")
    emit("truth_matte_rgb", [t[2].alpha_rgb for t in truths],
         os.path.join(out_dir, "truth", "matte_rgb_%04d.pfm"), "truth-color-matte")

    emit("clean", [render_capture(scene, CLEAN_PLATE, 0)],
         os.path.join(out_dir, "plates", "clean_%04d.pfm"), CLEAN_PLATE)
    emit("bounce", [render_capture(scene, BOUNCE_PLATE, i) for i in range(scene.frames)],
         os.path.join(out_dir, "plates", "bounce_%04d.pfm"), BOUNCE_PLATE)
    if extended:
        for condition in (BACKGROUND_GREEN, BACKGROUND_BLUE, SILHOUETTE_WHITE):
            sub = CONDITION_DIRS[condition]
            emit(f"plate_{sub}", [render_background_plate(scene, condition)],
                 os.path.join(out_dir, "plates", f"{sub}_%04d.pfm"),
                 condition + "-plate")

    chart_dir = os.path.join(out_dir, "chart")
    for primary in ("red", "green", "blue"):
        path = os.path.join(chart_dir, f"{primary}.pfm")
        save_image(render_chart(scene, primary), path)
        written[f"chart_{primary}"] = path
    with open(os.path.join(chart_dir, "chart_meta.txt"), "w", encoding="utf-8") as fh:
        r = CHART_REGION
        fh.write(f"region={r.x},{r.y},{r.w},{r.h}\nlevel={scene.chart_level:g}\n")
    written["chart_meta"] = os.path.join(chart_dir, "chart_meta.txt")
    return written
