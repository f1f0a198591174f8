"""Forward compositing: the over operator with scalar or per-channel alpha.

Elements are stored premultiplied throughout the pipeline; unpremultiplied
views are derived on demand and undefined below the alpha guard.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import StructuralError
from .image import LinearImage


@dataclass(frozen=True)
class ColorMatte:
    """Per-channel transparency in [0, 1]; equal channels reduce to a scalar matte."""

    alpha_rgb: LinearImage

    def __post_init__(self):
        if self.alpha_rgb.channels != 3:
            raise StructuralError("color matte needs 3 channels")

    @property
    def width(self) -> int:
        return self.alpha_rgb.width

    @property
    def height(self) -> int:
        return self.alpha_rgb.height


def _check_same_shape(a: LinearImage, b: LinearImage, what: str) -> None:
    if a.data.shape[:2] != b.data.shape[:2]:
        raise StructuralError(
            f"{what}: size mismatch {a.data.shape[:2]} vs {b.data.shape[:2]}"
        )


def premultiply(rgb: LinearImage, alpha: LinearImage) -> LinearImage:
    if alpha.channels != 1:
        raise StructuralError("alpha must be single-channel")
    _check_same_shape(rgb, alpha, "premultiply")
    return LinearImage(rgb.data * alpha.data[..., None])


def unpremultiply(premult: LinearImage, alpha: LinearImage, eps: float = 1e-3) -> LinearImage:
    """Divide out alpha; returns 0 where alpha < eps (color is undefined there)."""
    if eps <= 0:
        raise StructuralError("unpremultiply eps must be > 0")
    if alpha.channels != 1:
        raise StructuralError("alpha must be single-channel")
    _check_same_shape(premult, alpha, "unpremultiply")
    a = alpha.data[..., None]
    covered = a >= eps
    out = np.divide(premult.data, a, out=np.zeros_like(premult.data), where=covered)
    return LinearImage(out)


def over_premultiplied(premult: LinearImage, alpha: LinearImage,
                       background: LinearImage) -> LinearImage:
    """C = premult + (1 - alpha) * B per channel, scalar alpha."""
    if alpha.channels != 1:
        raise StructuralError("alpha must be single-channel")
    if premult.channels != background.channels:
        raise StructuralError("element and background channel counts differ")
    _check_same_shape(premult, background, "over")
    _check_same_shape(premult, alpha, "over")
    hold = 1.0 - alpha.data
    if premult.channels == 3:
        hold = hold[..., None]
    return LinearImage(premult.data + hold * background.data)


def over(elem, background: LinearImage) -> LinearImage:
    """Composite a premultiplied foreground element over a background plate."""
    return over_premultiplied(elem.rgb, elem.alpha, background)


def over_color_matte(premult_rgb: LinearImage, matte: ColorMatte,
                     background: LinearImage) -> LinearImage:
    """C_c = premult_c + (1 - alpha_c) * B_c with channel-specific alpha."""
    if premult_rgb.channels != 3 or background.channels != 3:
        raise StructuralError("color-matte compositing needs 3-channel images")
    _check_same_shape(premult_rgb, background, "over_color_matte")
    _check_same_shape(premult_rgb, matte.alpha_rgb, "over_color_matte")
    return LinearImage(premult_rgb.data + (1.0 - matte.alpha_rgb.data) * background.data)
