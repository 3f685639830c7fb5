"""Secure AODV-style routing for mobile ad-hoc networks, as a discrete-event simulator."""

from .engine import ConfigError, ScenarioConfig, run
from .metrics import MetricsReport

__all__ = ["ConfigError", "MetricsReport", "ScenarioConfig", "run"]
__version__ = "0.1.0"
