"""Spectrally multiplexed screen matting and compositing toolkit."""

from .calibration import (
    CalibrationMatrix,
    ChartRegion,
    apply_calibration,
    build_calibration,
    measure_response,
)
from .compositing import ColorMatte, over, over_color_matte, premultiply, unpremultiply
from .errors import (
    CalibrationError,
    ConfigError,
    ContractError,
    PipelineError,
    PlateCoverageError,
    SequenceIOError,
    StructuralError,
)
from .flow import FlowConfig, FlowField, estimate_flow, load_flow, save_flow, warp
from .image import (
    FrameSequence,
    LinearImage,
    combine_channels,
    constant_image,
    inverse_tonemap,
    load_image,
    load_sequence,
    luminance,
    save_image,
    save_sequence,
    tonemap,
)
from .matting import (
    BLUE,
    GREEN,
    RED,
    CleanPlate,
    ForegroundElement,
    MatteChannel,
    MatteFrame,
    holdout_of,
    key_frame,
    naive_colorize,
    solve_matte,
    subtract_bounce,
)
from .multiplex import (
    LightingSchedule,
    align_by_red,
    classic_tmm,
    demux,
    reconstruct_tmmgs,
    simulate_motion_blur,
    triangulation_color_matte,
    triangulation_matte,
)

__version__ = "0.1.0"
