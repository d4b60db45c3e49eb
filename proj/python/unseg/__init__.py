"""Unsupervised binary segmentation of ViT patch features with a modularity-trained GCN."""

from ._unseg import *  # noqa: F401,F403
from ._unseg import (  # noqa: F401
    Activation,
    DimensionMismatch,
    EmptyGraph,
    FormatError,
    RefineMode,
    TrainConfig,
    UnsegError,
)

__version__ = "0.1.0"
