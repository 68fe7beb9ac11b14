from .system import ConditionedCoefficients, InitialDensity, SystemSpec
from .grid import DensityField, FilterState, FilterTrajectory, GridSpec
from .path import PathSample

__all__ = [
    "ConditionedCoefficients",
    "DensityField",
    "FilterState",
    "FilterTrajectory",
    "GridSpec",
    "InitialDensity",
    "PathSample",
    "SystemSpec",
]
