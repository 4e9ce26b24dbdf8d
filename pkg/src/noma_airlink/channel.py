"""LoS mmWave link quantities: Fejer kernel beam gain, path loss, effective gain, SINR."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from .errors import DomainError, RankError
from .geometry import UserSample

_SIN_FLOOR = 1e-12


def dbm_to_watt(p_dbm: float) -> float:
    return 10.0 ** ((p_dbm - 30.0) / 10.0)


def watt_to_dbm(p_w: float) -> float:
    return 10.0 * math.log10(p_w) + 30.0


class GainModel(str, enum.Enum):
    EXACT = "exact"
    APPROX = "approx"


@dataclass(frozen=True)
class RadioConfig:
    m: int = 100
    altitude: float = 50.0
    p_tx: float = dbm_to_watt(20.0)
    n0: float = dbm_to_watt(-35.0)
    gamma: float = 2.0

    def __post_init__(self):
        if int(self.m) != self.m or self.m < 1:
            raise DomainError(f"array size must be a positive integer, got {self.m}")
        if not self.altitude > 0:
            raise DomainError(f"altitude must be positive, got {self.altitude}")
        if not (self.p_tx > 0 and self.n0 > 0):
            raise DomainError("transmit and noise powers must be positive")
        if not self.gamma >= 1:
            raise DomainError(f"path-loss exponent must be >= 1, got {self.gamma}")

    @property
    def rho(self) -> float:
        """Transmit SNR ``P_Tx / N0``."""
        return self.p_tx / self.n0


@dataclass(frozen=True)
class NomaPower:
    beta_j_sq: float = 0.25
    beta_i_sq: float = 0.75

    def __post_init__(self):
        if not 0 < self.beta_j_sq <= self.beta_i_sq:
            raise DomainError("need 0 < beta_j^2 <= beta_i^2 (weak user gets more power)")
        if not math.isclose(self.beta_j_sq + self.beta_i_sq, 1.0, abs_tol=1e-12):
            raise DomainError("power fractions must sum to 1")


def fejer_kernel(m: int, offset):
    """``|sin(pi*m*x/2) / sin(pi*x/2)|^2 / m``; equals ``m`` where the denominator vanishes."""
    x = np.asarray(offset, dtype=float)
    half = 0.5 * math.pi * x
    den = np.sin(half)
    num = np.sin(m * half)
    small = np.abs(den) < _SIN_FLOOR
    safe = np.where(small, 1.0, den)
    val = (num / safe) ** 2 / m
    # removable singularity at x = 2k; the limit of |sin(m t)/sin t|^2 there is m^2
    val = np.where(small, float(m), val)
    return float(val) if val.ndim == 0 else val


def fejer_kernel_derivative(m: int, offset):
    """Derivative of :func:`fejer_kernel` with respect to the offset."""
    x = np.asarray(offset, dtype=float)
    half = 0.5 * math.pi * x
    s, c = np.sin(half), np.cos(half)
    sm, cm = np.sin(m * half), np.cos(m * half)
    small = np.abs(s) < _SIN_FLOOR
    safe = np.where(small, 1.0, s)
    ratio = sm / safe
    dratio = 0.5 * math.pi * (m * cm * safe - sm * c) / (safe * safe)
    val = np.where(small, 0.0, 2.0 * ratio * dratio / m)
    return float(val) if val.ndim == 0 else val


def path_loss(distance, altitude: float, gamma: float):
    d = np.asarray(distance, dtype=float)
    val = 1.0 + np.power(d * d + altitude * altitude, 0.5 * gamma)
    return float(val) if val.ndim == 0 else val


def gain_values(distance, angle, fading, cfg: RadioConfig, model: GainModel = GainModel.APPROX):
    """Vectorised effective channel gain for arrays of user draws (beam axis at 0)."""
    angle = np.asarray(angle, dtype=float)
    offset = np.sin(angle) if GainModel(model) is GainModel.EXACT else angle
    return np.asarray(fading) * fejer_kernel(cfg.m, offset) / path_loss(distance, cfg.altitude, cfg.gamma)


def effective_gain(user: UserSample, cfg: RadioConfig, model: GainModel = GainModel.APPROX) -> float:
    return float(gain_values(user.distance, user.angle, user.fading_power, cfg, model))


def sinr(
    gain_k: float,
    decode_rank_m: int,
    own_rank_k: int,
    powers: NomaPower,
    cfg: RadioConfig,
    weak_rank_i: int | None = None,
) -> float:
    """SINR at rank-``k`` user while decoding the rank-``m`` message of a two-user pair.

    Decoding the weak user's message (``m`` is the weaker rank) sees the
    strong user's share as interference; the strong user decoding its own
    message after SIC sees noise only. ``weak_rank_i`` disambiguates which
    rank is the weak one when ``m == k``; by default ``m > k`` or an
    explicit ``weak_rank_i == m`` marks the weak message.
    """
    if decode_rank_m < own_rank_k:
        raise RankError(f"rank {own_rank_k} cannot decode the stronger user {decode_rank_m}")
    snr = cfg.rho * gain_k
    decoding_weak = decode_rank_m > own_rank_k or (weak_rank_i is not None and decode_rank_m == weak_rank_i)
    if decoding_weak:
        return snr * powers.beta_i_sq / (snr * powers.beta_j_sq + 1.0)
    return snr * powers.beta_j_sq
