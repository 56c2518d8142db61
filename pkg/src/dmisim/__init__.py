"""Dynamic mining interval simulator."""
from .numerics import Target
from .propagation import NetworkParams
from .dmi import DmiConfig
from .dts import DtsConfig
from .workload import FeeDist
from .engine import Scenario, WorkloadConfig, run, calibrate_network

__version__ = "0.1.0"

__all__ = ["Target", "NetworkParams", "DmiConfig", "DtsConfig", "FeeDist", "Scenario",
           "WorkloadConfig", "run", "calibrate_network", "__version__"]
