"""Temporal machinery: lighting schedules, demultiplexing, and the
time-multiplexed matting variants.

A schedule cycles lighting conditions one per camera frame; the flash rate
only has to leave room for the shutter inside a single condition (a 144 Hz
condition rate with a 24 fps camera caps the shutter at 1/6 of a frame).
Frames of one condition are pulled out by demux; the reconstruction routines
combine adjacent differently-lit frames, optionally aligned by half the
optical flow between same-condition neighbors.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .compositing import ColorMatte
from .errors import CalibrationError, StructuralError
from .flow import FlowConfig, FlowField, estimate_flow, warp
from .image import FrameSequence, LinearImage
from .matting import (
    STATE_REFERENCE,
    CleanPlate,
    ForegroundElement,
    GREEN,
    MatteChannel,
    MatteFrame,
    solve_matte,
)

BACKGROUND_SEPARATION_FLOOR = 1e-6  # sum of squared plate differences per pixel


@dataclass(frozen=True)
class LightingSchedule:
    """Cyclic condition labels with camera/flash rates and shutter fraction."""

    conditions: tuple[str, ...]
    flash_rate: float
    camera_rate: float
    phase: int = 0
    shutter_fraction: float = 0.5

    def __post_init__(self):
        if not self.conditions:
            raise StructuralError("schedule needs at least one condition")
        if self.camera_rate <= 0 or self.flash_rate <= 0:
            raise StructuralError("schedule rates must be > 0")
        ratio = self.flash_rate / self.camera_rate
        if abs(ratio - round(ratio)) > 1e-9 or round(ratio) < 1:
            raise StructuralError(
                f"flash rate {self.flash_rate:g} must be an integer multiple of "
                f"camera rate {self.camera_rate:g}"
            )
        if not 0 < self.shutter_fraction <= 1:
            raise StructuralError("shutter_fraction must lie in (0, 1]")
        if self.shutter_fraction * ratio > 1 + 1e-9:
            raise StructuralError(
                f"shutter fraction {self.shutter_fraction:g} does not fit inside one "
                f"lighting condition (limit {1 / ratio:g} of a frame)"
            )

    def condition_for_frame(self, i: int) -> str:
        return self.conditions[(self.phase + i) % len(self.conditions)]


def demux(seq: FrameSequence, schedule: LightingSchedule) -> dict[str, FrameSequence]:
    """Split an interleaved capture into one sequence per condition.

    Every input frame lands in exactly one output sequence; original
    timestamps are preserved so the input can be reassembled by time.
    """
    if abs(seq.frame_rate - schedule.camera_rate) > 1e-9:
        raise StructuralError(
            f"sequence rate {seq.frame_rate:g} != schedule camera rate "
            f"{schedule.camera_rate:g}"
        )
    per_condition: dict[str, tuple[list[LinearImage], list[float]]] = {
        label: ([], []) for label in schedule.conditions
    }
    for i, frame in enumerate(seq.frames):
        frames, stamps = per_condition[schedule.condition_for_frame(i)]
        frames.append(frame)
        stamps.append(seq.timestamp(i))
    out_rate = schedule.camera_rate / len(schedule.conditions)
    return {
        label: FrameSequence(frames=frames, frame_rate=out_rate, label=label,
                             timestamps=stamps)
        for label, (frames, stamps) in per_condition.items()
    }


def reconstruct_tmmgs(mg_frame: LinearImage, gm_frame: LinearImage,
                      plate: CleanPlate, flow: FlowField | None = None,
                      mc: MatteChannel = GREEN) -> ForegroundElement:
    """Complete a keyed frame with the matte channel of its interposed partner.

    Alpha and the two lit channels come from ``mg_frame`` via the clean-plate
    solve; the missing channel is lifted from ``gm_frame`` (where it is the
    premultiplied foreground, the background there emitting none of it) and
    displaced by half the flow between consecutive same-condition frames.
    """
    if mg_frame.data.shape != gm_frame.data.shape:
        raise StructuralError("frame pair sizes differ")
    matte, elem = solve_matte(mg_frame, plate, mc=mc)
    partner_channel = gm_frame.channel(mc.index)
    if flow is not None:
        partner_channel = warp(partner_channel, flow, 0.5)
    rgb = np.array(elem.rgb.data, copy=True)
    rgb[:, :, mc.index] = partner_channel.data
    return ForegroundElement(rgb=LinearImage(rgb), alpha=matte.alpha,
                             colorization_state=STATE_REFERENCE, matte_channel=mc)


def classic_tmm(lit_frame: LinearImage, silhouette_frame: LinearImage,
                background_level, flow: FlowField | None = None
                ) -> tuple[ForegroundElement, ColorMatte]:
    """White-on-black foreground paired with a silhouette against a lit screen.

    The silhouette frame yields a full-color matte, alpha_c = 1 -
    silhouette_c / background_c, warped to the lit frame's time by half the
    flow when given. The lit frame is already the premultiplied element.
    ``background_level`` is the lit screen level: an RGB triple or a clean
    background image.
    """
    if lit_frame.channels != 3 or silhouette_frame.channels != 3:
        raise StructuralError("classic keying needs 3-channel frames")
    if lit_frame.data.shape != silhouette_frame.data.shape:
        raise StructuralError("frame pair sizes differ")
    if isinstance(background_level, LinearImage):
        level = background_level.data
    else:
        level = np.asarray(background_level, dtype=np.float32)
        if level.shape != (3,):
            raise StructuralError("background level must be an RGB triple or image")
        level = np.broadcast_to(level, lit_frame.data.shape)
    if np.any(np.asarray(level) <= 0):
        raise CalibrationError("silhouette background level must be > 0 everywhere")

    alpha_rgb = np.clip(1.0 - silhouette_frame.data / level, 0.0, 1.0)
    matte = ColorMatte(LinearImage(alpha_rgb))
    if flow is not None:
        matte = ColorMatte(warp(matte.alpha_rgb, flow, 0.5))
    scalar_alpha = LinearImage(matte.alpha_rgb.data.mean(axis=2))
    elem = ForegroundElement(rgb=lit_frame, alpha=scalar_alpha,
                             colorization_state=STATE_REFERENCE)
    return elem, matte


def triangulation_matte(frame1: LinearImage, b1: LinearImage,
                        frame2: LinearImage, b2: LinearImage
                        ) -> tuple[MatteFrame, ForegroundElement]:
    """Solve alpha from the same foreground over two known backgrounds.

    Least squares over the three channels per pixel:

        (1 - alpha) = sum_c (C1_c - C2_c)(B1_c - B2_c) / sum_c (B1_c - B2_c)^2

    Exact on noise-free data with no assumption on the foreground colors. The
    premultiplied color is averaged over both frames. Pixels whose
    backgrounds are too similar are flagged in the matte's ``invalid`` mask.
    """
    for img in (b1, frame2, b2):
        if img.data.shape != frame1.data.shape:
            raise StructuralError("triangulation inputs must share dimensions")
    if frame1.channels != 3:
        raise StructuralError("triangulation needs 3-channel frames")
    c1 = frame1.data.astype(np.float64)
    c2 = frame2.data.astype(np.float64)
    bg1 = b1.data.astype(np.float64)
    bg2 = b2.data.astype(np.float64)

    db = bg1 - bg2
    denom = np.sum(db * db, axis=2)
    valid = denom >= BACKGROUND_SEPARATION_FLOOR
    hold = np.divide(np.sum((c1 - c2) * db, axis=2), denom,
                     out=np.zeros_like(denom), where=valid)
    alpha = np.clip(1.0 - hold, 0.0, 1.0)

    premult = 0.5 * ((c1 - (1.0 - alpha)[..., None] * bg1)
                     + (c2 - (1.0 - alpha)[..., None] * bg2))
    matte = MatteFrame(
        alpha=LinearImage(alpha),
        matte_channel=None,
        background_level=LinearImage(np.sqrt(denom)),
        invalid=None if valid.all() else ~valid,
    )
    elem = ForegroundElement(rgb=LinearImage(premult), alpha=matte.alpha,
                             colorization_state=STATE_REFERENCE)
    return matte, elem


def triangulation_color_matte(frame1: LinearImage, b1: LinearImage,
                              frame2: LinearImage, b2: LinearImage
                              ) -> tuple[ColorMatte, np.ndarray]:
    """Per-channel triangulation: alpha_c where the backgrounds differ in c.

    Returns the color matte and a per-channel validity mask; invalid channels
    fall back to the cross-channel scalar solve. Captures wavelength-dependent
    transparency that any single-channel matte collapses.
    """
    scalar_matte, _ = triangulation_matte(frame1, b1, frame2, b2)
    c1 = frame1.data.astype(np.float64)
    c2 = frame2.data.astype(np.float64)
    db = b1.data.astype(np.float64) - b2.data.astype(np.float64)
    valid = np.abs(db) >= np.sqrt(BACKGROUND_SEPARATION_FLOOR)
    per_channel = np.divide(c1 - c2, db, out=np.zeros_like(db), where=valid)
    alpha = np.clip(1.0 - per_channel, 0.0, 1.0)
    alpha = np.where(valid, alpha, scalar_matte.alpha.data[..., None])
    return ColorMatte(LinearImage(alpha)), valid


def align_by_red(frame1: LinearImage, frame2: LinearImage,
                 flow_estimator=None) -> FlowField:
    """Flow between the red channels, which see the same red-lit subject
    against black in both triangulation frames."""
    if frame1.channels != 3 or frame2.channels != 3:
        raise StructuralError("red-channel alignment needs 3-channel frames")
    estimator = flow_estimator or (lambda a, b: estimate_flow(a, b, FlowConfig()))
    return estimator(frame1.channel(0), frame2.channel(0))


def simulate_motion_blur(frame: LinearImage, flow: FlowField,
                         shutter_fraction: float, min_samples: int = 3) -> LinearImage:
    """Box-shutter blur along the flow, centered on the sharp frame.

    Averages N samples along scale * flow with offsets spanning
    [-1/2, +1/2] of the blur path, N at least ``min_samples`` and at least
    the ceiling of the largest displacement.
    """
    if not 0 < shutter_fraction <= 1:
        raise StructuralError("shutter_fraction must lie in (0, 1]")
    if frame.data.shape[:2] != flow.shape:
        raise StructuralError("frame and flow field sizes differ")
    magnitude = float(np.max(np.hypot(flow.u, flow.v))) * shutter_fraction
    if magnitude < 1e-6:
        return frame
    n = max(min_samples, int(np.ceil(magnitude)))
    acc = np.zeros(frame.data.shape, dtype=np.float64)
    for k in range(n):
        offset = ((k + 0.5) / n - 0.5) * shutter_fraction
        acc += warp(frame, flow, offset).data
    return LinearImage(acc / n)
