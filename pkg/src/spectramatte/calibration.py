"""Crosstalk removal from color-chart captures under single LED primaries.

Camera color filters overlap, so each LED primary registers on several
channels. Measuring the chart's white square under pure red, green, and blue
light gives the columns of a mixing matrix W; applying M = W^-1 to all
captures returns them to clean per-primary channels. Columns keep their
measured brightness so calibrated frames stay directly comparable to
clean-plate levels.
"""

from __future__ import annotations

import os
from dataclasses import dataclass

import numpy as np

from .errors import CalibrationError, StructuralError
from .image import LinearImage

DEFAULT_MAX_CONDITION = 50.0


@dataclass(frozen=True)
class ChartRegion:
    """Pixel rectangle locating the chart's white square."""

    x: int
    y: int
    w: int
    h: int

    def __post_init__(self):
        if self.w <= 0 or self.h <= 0:
            raise StructuralError("chart region must have positive size")
        if self.w * self.h < 16:
            raise StructuralError("chart region must cover at least 16 pixels")

    def validate_within(self, img: LinearImage) -> None:
        if self.x < 0 or self.y < 0 or self.x + self.w > img.width or self.y + self.h > img.height:
            raise StructuralError(
                f"chart region {self} exceeds image bounds {img.width}x{img.height}"
            )


@dataclass(frozen=True)
class CalibrationMatrix:
    """Measured mixing matrix W and its inverse M, with W's condition number."""

    W: np.ndarray
    M: np.ndarray
    condition_number: float

    @classmethod
    def from_measurement(cls, W: np.ndarray,
                         max_condition: float = DEFAULT_MAX_CONDITION) -> "CalibrationMatrix":
        W = np.asarray(W, dtype=np.float64)
        if W.shape != (3, 3):
            raise StructuralError("measurement matrix must be 3x3")
        cond = float(np.linalg.cond(W))
        if not np.isfinite(cond) or cond > max_condition:
            raise CalibrationError(
                f"measurement matrix condition number {cond:.3g} exceeds limit {max_condition:g}"
            )
        M = np.linalg.inv(W)
        return cls(W=W, M=M, condition_number=cond)

    def save(self, path: str) -> None:
        directory = os.path.dirname(path)
        if directory:
            os.makedirs(directory, exist_ok=True)
        with open(path, "w", encoding="utf-8") as fh:
            for row in self.W:
                fh.write(" ".join(f"{v:.17g}" for v in row) + "\n")
            for row in self.M:
                fh.write(" ".join(f"{v:.17g}" for v in row) + "\n")
            fh.write(f"{self.condition_number:.17g}\n")

    @classmethod
    def load(cls, path: str) -> "CalibrationMatrix":
        with open(path, encoding="utf-8") as fh:
            values = [float(tok) for tok in fh.read().split()]
        if len(values) != 19:
            raise CalibrationError(f"calibration sidecar {path} must hold 19 numbers")
        W = np.array(values[:9], dtype=np.float64).reshape(3, 3)
        M = np.array(values[9:18], dtype=np.float64).reshape(3, 3)
        if np.max(np.abs(M @ W - np.eye(3))) > 1e-6:
            raise CalibrationError(f"calibration sidecar {path} is inconsistent (M*W != I)")
        return cls(W=W, M=M, condition_number=values[18])


def measure_response(capture: LinearImage, region: ChartRegion) -> np.ndarray:
    """Mean RGB of the chart region in one single-primary capture."""
    if capture.channels != 3:
        raise StructuralError("chart captures must have 3 channels")
    region.validate_within(capture)
    patch = capture.data[region.y:region.y + region.h, region.x:region.x + region.w, :]
    return patch.reshape(-1, 3).mean(axis=0).astype(np.float64)


def build_calibration(red_shot: LinearImage, green_shot: LinearImage, blue_shot: LinearImage,
                      region: ChartRegion,
                      max_condition: float = DEFAULT_MAX_CONDITION) -> CalibrationMatrix:
    """Assemble W from per-primary chart responses and invert it."""
    columns = [measure_response(shot, region) for shot in (red_shot, green_shot, blue_shot)]
    W = np.stack(columns, axis=1)
    return CalibrationMatrix.from_measurement(W, max_condition=max_condition)


def apply_matrix(img: LinearImage, matrix: np.ndarray) -> LinearImage:
    """Apply a 3x3 matrix to every pixel."""
    if img.channels != 3:
        raise StructuralError("matrix transforms need a 3-channel image")
    matrix = np.asarray(matrix, dtype=np.float32)
    return LinearImage(img.data @ matrix.T)


def apply_calibration(img: LinearImage, cal: CalibrationMatrix) -> LinearImage:
    """Remove crosstalk: every pixel p becomes M . p."""
    return apply_matrix(img, cal.M)
