"""Beamforming for an AF relay link aided by a hybrid active/passive IRS."""

from .model import (
    ChannelSet,
    ElementPartition,
    Geometry,
    NetworkState,
    SystemConfig,
    achievable_rate,
    draw_channels,
    evaluate_snr,
    feasibility_report,
    is_feasible,
)
from .estimators import HpSdrFpOptimizer, WfGpiGrrOptimizer
from .benchmarks import SCHEMES

__all__ = [
    "ChannelSet",
    "ElementPartition",
    "Geometry",
    "NetworkState",
    "SystemConfig",
    "achievable_rate",
    "draw_channels",
    "evaluate_snr",
    "feasibility_report",
    "is_feasible",
    "HpSdrFpOptimizer",
    "WfGpiGrrOptimizer",
    "SCHEMES",
]

__version__ = "0.1.0"
