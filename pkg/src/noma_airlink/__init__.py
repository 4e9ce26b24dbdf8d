"""Outage and sum-rate analysis of user ordering for mmWave NOMA air-to-ground links."""

from .channel import GainModel, NomaPower, RadioConfig, fejer_kernel, path_loss
from .geometry import UserRegion, mean_count
from .ordering import ALL_STRATEGIES, NomaPair, OrderingStrategy
from .outage import OutageReport, QosTargets, Role, Scenario, analyze

__all__ = [
    "ALL_STRATEGIES",
    "GainModel",
    "NomaPair",
    "NomaPower",
    "OrderingStrategy",
    "OutageReport",
    "QosTargets",
    "RadioConfig",
    "Role",
    "Scenario",
    "UserRegion",
    "analyze",
    "fejer_kernel",
    "mean_count",
    "path_loss",
]
