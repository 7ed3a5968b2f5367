"""Local delay and energy efficiency of hybrid full/half-duplex K-tier cellular networks.

``analysis`` evaluates the stochastic-geometry expressions numerically,
``montecarlo`` simulates the same network, and ``cli`` ties both to config
files, sweeps and figure presets.
"""
from .model import (DuplexMode, NetworkConfig, TierParams, UserParams, ValidationError,
                    db_to_linear, dbm_to_watts, validate)

__all__ = ["DuplexMode", "NetworkConfig", "TierParams", "UserParams", "ValidationError",
           "db_to_linear", "dbm_to_watts", "validate"]
__version__ = "0.1.0"
