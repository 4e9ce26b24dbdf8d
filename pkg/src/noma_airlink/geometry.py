"""Annular-sector user region, Poisson user counts and uniform placement."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DomainError


@dataclass(frozen=True)
class UserRegion:
    """Annular sector ``[l1, l2] x [-delta/2, delta/2]`` with HPPP density ``lam``.

    ``delta`` is in radians.
    """

    l1: float = 85.0
    l2: float = 100.0
    delta: float = math.radians(5.0)
    lam: float = 1.0

    def __post_init__(self):
        if not 0 < self.l1 < self.l2:
            raise DomainError(f"need 0 < l1 < l2, got l1={self.l1}, l2={self.l2}")
        if not 0 < self.delta <= math.pi:
            raise DomainError(f"need 0 < delta <= pi, got {self.delta}")
        if not self.lam > 0:
            raise DomainError(f"need lambda > 0, got {self.lam}")

    @property
    def ring(self) -> float:
        """``l2**2 - l1**2``."""
        return self.l2 * self.l2 - self.l1 * self.l1

    @property
    def half_angle(self) -> float:
        return 0.5 * self.delta

    @property
    def area(self) -> float:
        return self.half_angle * self.ring

    @property
    def angular_density(self) -> float:
        """Users per radian of absolute angle, ``(l2^2 - l1^2) * lambda``."""
        return self.ring * self.lam


@dataclass(frozen=True)
class UserSample:
    distance: float
    angle: float
    fading_power: float


def mean_count(region: UserRegion) -> float:
    return region.ring * region.half_angle * region.lam


def sample_count(region: UserRegion, rng: np.random.Generator) -> int:
    return int(rng.poisson(mean_count(region)))


def distance_cdf(r, region: UserRegion):
    """CDF of an unordered user distance, ``(r^2 - l1^2) / (l2^2 - l1^2)`` clipped to [0, 1]."""
    r = np.asarray(r, dtype=float)
    out = np.clip((r * r - region.l1**2) / region.ring, 0.0, 1.0)
    return float(out) if out.ndim == 0 else out


def sample_positions(region: UserRegion, rng: np.random.Generator, n: int):
    """Draw ``n`` users: arrays of distance, signed angle and fading power.

    Distances use the inverse of :func:`distance_cdf`; fading power is
    unit-mean exponential (squared magnitude of a CN(0, 1) gain).
    """
    u = rng.random(n)
    distance = np.sqrt(u * region.ring + region.l1**2)
    angle = rng.uniform(-region.half_angle, region.half_angle, n)
    fading = rng.exponential(1.0, n)
    return distance, angle, fading


def sample_user(region: UserRegion, rng: np.random.Generator) -> UserSample:
    d, a, f = sample_positions(region, rng, 1)
    return UserSample(float(d[0]), float(a[0]), float(f[0]))


def sample_population(region: UserRegion, rng: np.random.Generator) -> list[UserSample]:
    """One HPPP realisation: a Poisson count of uniformly placed users."""
    k = sample_count(region, rng)
    d, a, f = sample_positions(region, rng, k)
    return [UserSample(float(x), float(y), float(z)) for x, y, z in zip(d, a, f)]
