"""Exact vertex functions of type-A flag quivers and their integrable-system checks."""

from .kernel import ExactScalar, ParamPoint, TruncatedSeries, curly_bracket, qpoch
from .quiver import FlagData, FixedPointChain, enumerate_fixed_points

__version__ = "0.1.0"

__all__ = [
    "ExactScalar",
    "ParamPoint",
    "TruncatedSeries",
    "curly_bracket",
    "qpoch",
    "FlagData",
    "FixedPointChain",
    "enumerate_fixed_points",
    "__version__",
]
