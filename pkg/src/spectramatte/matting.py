"""Single-frame keying from a reserved matte channel.

The subject is lit with two primaries and silhouetted against a field of the
third, so the matte channel reads (1 - alpha) * B_mc directly. Solving

    alpha = (B_mc - C_mc) / B_mc
    F_c   = (C_c - (1 - alpha) * B_c) / alpha        (lit channels)

recovers the matte and the lit foreground. Premultiplied color
alpha * F_c = C_c - (1 - alpha) * B_c needs no division and is kept as the
canonical storage; unpremultiplied color is derived only where alpha clears
the guard. Bounce light reflected by the unlit background panels is measured
on its own plate and subtracted under the holdout matte.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .errors import ContractError, PlateCoverageError, StructuralError
from .image import LinearImage, constant_image

CHANNEL_NAMES = ("R", "G", "B")

STATE_MISSING = "missing-channel"
STATE_NAIVE = "naive"
STATE_ML = "ml"
STATE_REFERENCE = "reference"

DEFAULT_EPS_ALPHA = 1e-3
MAX_INVALID_FRACTION = 1e-3  # of pixels without plate signal before erroring


@dataclass(frozen=True)
class MatteChannel:
    """Designates which camera channel carries the background field."""

    channel: str

    def __post_init__(self):
        if self.channel not in CHANNEL_NAMES:
            raise StructuralError(f"matte channel must be one of {CHANNEL_NAMES}")

    @property
    def index(self) -> int:
        return CHANNEL_NAMES.index(self.channel)

    @property
    def lit_indices(self) -> tuple[int, int]:
        """The two foreground-lit channels, in wavelength (channel) order."""
        a, b = (i for i in range(3) if i != self.index)
        return a, b


RED = MatteChannel("R")
GREEN = MatteChannel("G")
BLUE = MatteChannel("B")


@dataclass
class MatteFrame:
    """Alpha in [0, 1] plus provenance: matte channel and background level.

    ``matte_channel`` is None for solves that use all channels (triangulation).
    ``raw_alpha`` holds the pre-clamp values when requested; ``invalid`` marks
    pixels where the solve was undefined.
    """

    alpha: LinearImage
    matte_channel: MatteChannel | None
    background_level: LinearImage | float
    raw_alpha: LinearImage | None = field(default=None)
    invalid: np.ndarray | None = field(default=None)

    def __post_init__(self):
        if self.alpha.channels != 1:
            raise StructuralError("matte alpha must be single-channel")


@dataclass
class ForegroundElement:
    """Premultiplied RGBA element; the matte channel stays 0 until colorized."""

    rgb: LinearImage
    alpha: LinearImage
    colorization_state: str = STATE_MISSING
    matte_channel: MatteChannel | None = None

    def __post_init__(self):
        if self.rgb.channels != 3:
            raise StructuralError("element color must have 3 channels")
        if self.alpha.channels != 1:
            raise StructuralError("element alpha must be single-channel")
        if self.rgb.data.shape[:2] != self.alpha.data.shape:
            raise StructuralError("element color and alpha sizes differ")


@dataclass
class CleanPlate:
    """Lit background without subject, plus the bounce plate (panels off)."""

    background: LinearImage
    bounce: LinearImage | None = None

    def __post_init__(self):
        if self.background.channels != 3:
            raise StructuralError("clean plate must have 3 channels")
        if self.bounce is not None and self.bounce.data.shape != self.background.data.shape:
            raise StructuralError("bounce plate size differs from background plate")

    @classmethod
    def uniform(cls, rgb, height: int, width: int,
                bounce=None) -> "CleanPlate":
        """Uniform-screen plate from scalar levels (no per-pixel measurement)."""
        background = constant_image(height, width, rgb)
        bounce_img = constant_image(height, width, bounce) if bounce is not None else None
        return cls(background=background, bounce=bounce_img)


def solve_matte(frame: LinearImage, plate: CleanPlate, mc: MatteChannel = GREEN,
                eps_alpha: float = DEFAULT_EPS_ALPHA,
                keep_raw_alpha: bool = False) -> tuple[MatteFrame, ForegroundElement]:
    """Key one calibrated frame against its clean plate.

    Returns the clamped matte and the premultiplied element. The element's
    matte channel is identically 0 (state "missing-channel"); unpremultiplied
    color can be derived with :func:`spectramatte.compositing.unpremultiply`
    using the same ``eps_alpha``.

    Pixels where the plate's matte channel is 0 are flagged in the matte's
    ``invalid`` mask and treated as opaque; if they exceed
    ``MAX_INVALID_FRACTION`` of the frame a :class:`PlateCoverageError` is
    raised.
    """
    if eps_alpha <= 0:
        raise StructuralError("eps_alpha must be > 0")
    if frame.channels != 3:
        raise StructuralError("keying needs a 3-channel frame")
    if frame.data.shape != plate.background.data.shape:
        raise StructuralError("frame and clean plate sizes differ")
    c = frame.data.astype(np.float64)
    b = plate.background.data.astype(np.float64)
    b_mc = b[:, :, mc.index]
    c_mc = c[:, :, mc.index]

    invalid = b_mc <= 0.0
    invalid_fraction = float(invalid.mean())
    if invalid_fraction > MAX_INVALID_FRACTION:
        raise PlateCoverageError(
            f"clean plate has no {mc.channel}-channel signal on "
            f"{invalid_fraction:.2%} of pixels (limit {MAX_INVALID_FRACTION:.2%})",
            invalid_fraction=invalid_fraction,
            invalid_mask=invalid,
        )

    raw = np.divide(b_mc - c_mc, b_mc, out=np.ones_like(b_mc), where=~invalid)
    alpha = np.clip(raw, 0.0, 1.0)

    premult = c - (1.0 - alpha)[..., None] * b
    premult[:, :, mc.index] = 0.0

    matte = MatteFrame(
        alpha=LinearImage(alpha),
        matte_channel=mc,
        background_level=LinearImage(b_mc),
        raw_alpha=LinearImage(raw) if keep_raw_alpha else None,
        invalid=invalid if invalid.any() else None,
    )
    elem = ForegroundElement(
        rgb=LinearImage(premult),
        alpha=matte.alpha,
        colorization_state=STATE_MISSING,
        matte_channel=mc,
    )
    return matte, elem


def holdout_of(matte: MatteFrame) -> LinearImage:
    """The holdout matte, 1 - alpha: bright where the background shows."""
    return LinearImage(1.0 - matte.alpha.data)


def subtract_bounce(frame: LinearImage, plate: CleanPlate, matte: MatteFrame) -> LinearImage:
    """Remove bounce light from the background only: frame - holdout * bounce.

    Foreground pixels (holdout 0) pass through unchanged; small negatives in
    the background are preserved for downstream clamping.
    """
    if plate.bounce is None:
        return frame
    if frame.data.shape != plate.bounce.data.shape:
        raise StructuralError("frame and bounce plate sizes differ")
    if matte.alpha.data.shape != frame.data.shape[:2]:
        raise StructuralError("matte size differs from frame")
    hold = (1.0 - matte.alpha.data)[..., None]
    return LinearImage(frame.data - hold * plate.bounce.data)


def key_frame(frame: LinearImage, plate: CleanPlate, mc: MatteChannel = GREEN,
              eps_alpha: float = DEFAULT_EPS_ALPHA, keep_raw_alpha: bool = False,
              bounce_order: str = "alpha-first") -> tuple[MatteFrame, ForegroundElement]:
    """Full keying of one calibrated frame: solve, then bounce-subtract.

    ``bounce_order`` "alpha-first" (default) keeps the alpha solved from the
    uncorrected frame, since the bounce carries no matte-channel light once
    calibrated; "bounce-first" re-solves alpha from the corrected frame.
    """
    if bounce_order not in ("alpha-first", "bounce-first"):
        raise StructuralError("bounce_order must be 'alpha-first' or 'bounce-first'")
    matte, elem = solve_matte(frame, plate, mc, eps_alpha, keep_raw_alpha)
    if plate.bounce is None:
        return matte, elem
    corrected = subtract_bounce(frame, plate, matte)
    if bounce_order == "bounce-first":
        return solve_matte(corrected, plate, mc, eps_alpha, keep_raw_alpha)
    b = plate.background.data.astype(np.float64)
    premult = corrected.data - (1.0 - matte.alpha.data)[..., None] * b
    premult[:, :, mc.index] = 0.0
    return matte, replace(elem, rgb=LinearImage(premult))


def naive_colorize(elem: ForegroundElement, rho: float) -> ForegroundElement:
    """Fill the missing channel with rho * first-lit + (1 - rho) * second-lit.

    For a green matte channel this is the classic g = rho*r + (1-rho)*b; the
    lit channels are taken in channel (wavelength) order for other variants.
    """
    if not 0.0 <= rho <= 1.0:
        raise StructuralError("rho must lie in [0, 1]")
    if elem.colorization_state != STATE_MISSING:
        raise ContractError(
            f"element already colorized (state {elem.colorization_state!r})"
        )
    if elem.matte_channel is None:
        raise ContractError("element does not record its matte channel")
    first, second = elem.matte_channel.lit_indices
    data = np.array(elem.rgb.data, copy=True)
    data[:, :, elem.matte_channel.index] = rho * data[:, :, first] + (1.0 - rho) * data[:, :, second]
    return replace(elem, rgb=LinearImage(data), colorization_state=STATE_NAIVE)
