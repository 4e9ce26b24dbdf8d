"""User ranking under the four ordering strategies and NOMA pair selection."""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .channel import GainModel, RadioConfig, fejer_kernel, gain_values
from .errors import DomainError
from .geometry import UserSample


class OrderingStrategy(str, enum.Enum):
    DISTANCE = "distance"
    ABS_ANGLE = "angle"
    FEJER = "fejer"
    FULL_CSI = "fullcsi"

    @property
    def regime_joint(self) -> bool:
        """True when the analysis conditions on count ranges rather than exact counts."""
        return self in (OrderingStrategy.DISTANCE, OrderingStrategy.ABS_ANGLE)


ALL_STRATEGIES = tuple(OrderingStrategy)


@dataclass(frozen=True)
class NomaPair:
    j: int = 20
    i: int = 25

    def __post_init__(self):
        if not 1 <= self.j < self.i:
            raise DomainError(f"need 1 <= j < i, got j={self.j}, i={self.i}")


@dataclass(frozen=True)
class NoTransmission:
    pass


@dataclass(frozen=True)
class SingleUser:
    user: int


@dataclass(frozen=True)
class PairedUsers:
    strong: int
    weak: int


def sort_keys(distance, angle, fading, strategy: OrderingStrategy, cfg: RadioConfig,
              gain_model: GainModel = GainModel.APPROX) -> np.ndarray:
    """Ascending sort keys: the best user under ``strategy`` has the smallest key."""
    strategy = OrderingStrategy(strategy)
    if strategy is OrderingStrategy.DISTANCE:
        return np.asarray(distance, dtype=float)
    if strategy is OrderingStrategy.ABS_ANGLE:
        return np.abs(angle)
    if strategy is OrderingStrategy.FEJER:
        offset = np.sin(angle) if GainModel(gain_model) is GainModel.EXACT else angle
        return -fejer_kernel(cfg.m, offset)
    return -gain_values(distance, angle, fading, cfg, gain_model)


def rank_users(users: Sequence[UserSample], strategy: OrderingStrategy, cfg: RadioConfig,
               gain_model: GainModel = GainModel.APPROX) -> list[int]:
    """Indices of ``users`` from best to worst; ties keep the original order."""
    if not users:
        raise DomainError("cannot rank an empty population")
    d = np.array([u.distance for u in users])
    a = np.array([u.angle for u in users])
    f = np.array([u.fading_power for u in users])
    keys = sort_keys(d, a, f, strategy, cfg, gain_model)
    return [int(x) for x in np.argsort(keys, kind="stable")]


def select_pair(perm: Sequence[int], pair: NomaPair, count: int):
    """Serving decision for a ranked population of ``count`` users.

    Returns user indices (taken from ``perm``), not ranks.
    """
    if count < pair.j:
        return NoTransmission()
    if count < pair.i:
        return SingleUser(perm[pair.j - 1])
    return PairedUsers(perm[pair.j - 1], perm[pair.i - 1])
