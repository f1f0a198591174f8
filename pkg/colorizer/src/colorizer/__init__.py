"""Channel restoration for spectrally keyed footage."""

from .data import TrainingManifest, load_manifest
from .infer import infer, load_model, predict, predict_tiled
from .model import ChannelRestorer
from .train import ColorizerSpec, train, train_matte_colorizer

__version__ = "0.1.0"
