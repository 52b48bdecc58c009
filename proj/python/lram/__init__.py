"""Differentiable key-value memory addressed by points of the 2E8 lattice."""

from ._core import *  # noqa: F401,F403
from ._core import ConfigError, TorusConfig, ValueTable, TrainingDiverged

__version__ = "0.1.0"
