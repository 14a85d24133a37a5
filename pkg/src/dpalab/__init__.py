"""Directed linear preferential attachment: simulation, limit laws and tail estimation."""

from dpalab.params import ModelParams, ParameterError

__version__ = "0.1.0"

__all__ = ["ModelParams", "ParameterError", "__version__"]
