"""Analytic distributions of unordered and ordered user statistics.

Angles and distances of HPPP users are handled through one normalised
coordinate ``x`` in [0, 1]: ``x = |theta| / (delta/2)`` for angles and
``x = (r^2 - l1^2) / (l2^2 - l1^2)`` for distances. Given ``K = n`` users
the ``k``-th smallest ``x`` is Beta(k, n - k + 1); mixing over the Poisson
count restricted to a regime gives the closed forms evaluated here in the
log domain.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Literal, Union

import numpy as np
from scipy.special import betainc, gammaln, xlogy

from .channel import RadioConfig, fejer_kernel, fejer_kernel_derivative, path_loss
from .errors import DegeneratePartition, DomainError, RankError, RegimeError
from .geometry import UserRegion, mean_count
from .numerics import (
    Interval,
    find_critical_points,
    gauss_legendre_nodes,
    integrate,
    invert_monotone_array,
    log_poisson_pmf,
    log_poisson_range,
    poisson_truncation,
)
from .ordering import NomaPair

RankConvention = Literal["largest", "smallest"]


@dataclass(frozen=True)
class ExactK:
    """Exactly ``k`` users in the region."""

    k: int

    def __post_init__(self):
        if self.k < 1:
            raise DomainError("ExactK requires k >= 1")


class Regime(str, enum.Enum):
    BETWEEN = "between"  # j <= K < i: only the strong user is served
    AT_LEAST_I = "at_least_i"  # K >= i: NOMA pair active


CountRegime = Union[ExactK, Regime]


def regime_log_probability(regime: CountRegime, pair: NomaPair, mu: float) -> float:
    if isinstance(regime, ExactK):
        return log_poisson_pmf(regime.k, mu)
    if regime is Regime.BETWEEN:
        return log_poisson_range(pair.j, pair.i - 1, mu)
    return log_poisson_range(pair.i, math.inf, mu)


def regime_probability(regime: CountRegime, pair: NomaPair, mu: float) -> float:
    return math.exp(regime_log_probability(regime, pair, mu))


# ---------------------------------------------------------------- distance


def unordered_distance_pdf(r, region: UserRegion):
    r = np.asarray(r, dtype=float)
    inside = (r >= region.l1) & (r <= region.l2)
    out = np.where(inside, 2.0 * r / region.ring, 0.0)
    return float(out) if out.ndim == 0 else out


def unordered_distance_cdf(r, region: UserRegion):
    r = np.asarray(r, dtype=float)
    out = np.clip((r * r - region.l1**2) / region.ring, 0.0, 1.0)
    return float(out) if out.ndim == 0 else out


# ----------------------------------------------------- ordered HPPP statistic


def _regime_bounds(k: int, pair: NomaPair, regime: CountRegime) -> tuple[int, float]:
    """Range of total counts ``n`` (with ``n >= k``) that the regime admits."""
    if isinstance(regime, ExactK) or not isinstance(regime, Regime):
        raise RegimeError("ordered angle/distance laws are defined for the Between/AtLeastI regimes only")
    if not 1 <= k <= pair.i:
        raise RankError(f"rank {k} outside 1..{pair.i}")
    if regime is Regime.BETWEEN:
        if k >= pair.i:
            raise RankError(f"rank {k} never exists when fewer than {pair.i} users are present")
        return max(pair.j, k), pair.i - 1
    return pair.i, math.inf


def _ordered_logpdf_x(x, k: int, pair: NomaPair, regime: CountRegime, mu: float):
    """Log density of the ``k``-th smallest normalised coordinate given the regime.

    ``mu (mu x)^(k-1) / (k-1)! * exp(-mu x) * P{lo-k <= Pois(mu (1-x)) <= hi-k} / P{lo <= K <= hi}``
    """
    lo, hi = _regime_bounds(k, pair, regime)
    x = np.atleast_1d(np.asarray(x, dtype=float))
    out = np.full(x.shape, -np.inf)
    ok = (x >= 0.0) & (x <= 1.0)
    if not np.any(ok):
        return out
    xs = x[ok]
    log_norm = log_poisson_range(lo, hi, mu)
    rest = log_poisson_range(lo - k, hi - k, mu * (1.0 - xs))
    out[ok] = (
        math.log(mu) + xlogy(k - 1, mu * xs) - gammaln(k) - mu * xs + rest - log_norm
    )
    return out


def _ordered_cdf_x(x, k: int, pair: NomaPair, regime: CountRegime, mu: float, tail_tol: float = 1e-14):
    """CDF of the same statistic as a Poisson mixture of Beta(k, n-k+1) laws."""
    lo, hi = _regime_bounds(k, pair, regime)
    if math.isinf(hi):
        hi = max(lo, poisson_truncation(mu, tail_tol))
    ns = np.arange(lo, int(hi) + 1)
    logw = log_poisson_pmf(ns, mu) - log_poisson_range(lo, hi, mu)
    w = np.exp(logw)
    w /= w.sum()
    x = np.clip(np.atleast_1d(np.asarray(x, dtype=float)), 0.0, 1.0)
    return betainc(k, ns[None, :] - k + 1, x[:, None]) @ w


def _squeeze(val, like):
    return float(val[0]) if np.ndim(like) == 0 else val


def ordered_abs_angle_pdf(theta, k: int, pair: NomaPair, regime: CountRegime, region: UserRegion):
    """PDF of the ``k``-th smallest absolute angle given the count regime."""
    mu = mean_count(region)
    t = np.asarray(theta, dtype=float)
    with np.errstate(divide="ignore"):
        val = np.exp(_ordered_logpdf_x(t / region.half_angle, k, pair, regime, mu)) / region.half_angle
    return _squeeze(val, theta)


def ordered_abs_angle_cdf(theta, k: int, pair: NomaPair, regime: CountRegime, region: UserRegion):
    mu = mean_count(region)
    t = np.asarray(theta, dtype=float)
    return _squeeze(_ordered_cdf_x(np.atleast_1d(t) / region.half_angle, k, pair, regime, mu), theta)


def ordered_angle_pdf(theta, k: int, pair: NomaPair, regime: CountRegime, region: UserRegion):
    """PDF of the signed angle of the ``k``-th user under absolute-angle ordering."""
    t = np.abs(np.asarray(theta, dtype=float))
    val = 0.5 * np.atleast_1d(ordered_abs_angle_pdf(t, k, pair, regime, region))
    return _squeeze(val, theta)


def ordered_angle_cdf(theta, k: int, pair: NomaPair, regime: CountRegime, region: UserRegion):
    t = np.atleast_1d(np.asarray(theta, dtype=float))
    inner = ordered_abs_angle_cdf(np.abs(t), k, pair, regime, region)
    return _squeeze(0.5 * (1.0 + np.sign(t) * inner), theta)


def ordered_distance_pdf(r, k: int, pair: NomaPair, regime: CountRegime, region: UserRegion):
    """PDF of the ``k``-th smallest distance given the count regime."""
    mu = mean_count(region)
    r = np.asarray(r, dtype=float)
    rr = np.atleast_1d(r)
    x = (rr * rr - region.l1**2) / region.ring
    with np.errstate(divide="ignore"):
        val = np.exp(_ordered_logpdf_x(x, k, pair, regime, mu)) * 2.0 * rr / region.ring
    return _squeeze(val, r)


def ordered_distance_cdf(r, k: int, pair: NomaPair, regime: CountRegime, region: UserRegion):
    mu = mean_count(region)
    rr = np.atleast_1d(np.asarray(r, dtype=float))
    x = (rr * rr - region.l1**2) / region.ring
    return _squeeze(_ordered_cdf_x(x, k, pair, regime, mu), r)


def ordered_mode_x(k: int, pair: NomaPair, regime: CountRegime, mu: float) -> float:
    """Rough location of the ordered statistic, used to seed adaptive quadrature."""
    lo, hi = _regime_bounds(k, pair, regime)
    n_typ = min(max(mu, lo), hi if math.isfinite(hi) else max(mu, lo))
    return min(1.0, max(0.0, k / (n_typ + 1.0)))


# ------------------------------------------------------------- Fejer kernel


@dataclass(frozen=True)
class FejerPartition:
    """Monotone pieces of the Fejer kernel on ``[0, delta/2]``.

    ``breakpoints`` holds the right ends of the pieces (the last one is
    ``delta/2``); piece ``p`` spans ``[breakpoints[p-1], breakpoints[p]]``
    with ``breakpoints[-1] := 0``.
    """

    m: int
    delta: float
    breakpoints: tuple[float, ...]
    piece_values: tuple[float, ...]

    @property
    def half_angle(self) -> float:
        return 0.5 * self.delta

    @property
    def edges(self) -> tuple[float, ...]:
        return (0.0,) + self.breakpoints

    def pieces(self):
        """Yield ``(lo, hi, decreasing)`` for every monotone piece."""
        e = self.edges
        for a, b in zip(e[:-1], e[1:]):
            yield a, b, fejer_kernel(self.m, b) < fejer_kernel(self.m, a)

    def kernel(self, theta):
        return fejer_kernel(self.m, theta)


@lru_cache(maxsize=64)
def build_fejer_partition(m: int, delta: float) -> FejerPartition:
    if m < 1 or not delta > 0:
        raise DomainError("need m >= 1 and delta > 0")
    half = 0.5 * delta
    if half >= 2.0:
        raise DomainError("delta/2 must stay below the kernel period")
    df = lambda t: fejer_kernel_derivative(m, t)  # noqa: E731
    grid_n = max(2000, int(math.ceil(1e4 * half)), 40 * m)
    crit = find_critical_points(lambda t: fejer_kernel(m, t), Interval(0.0, half), grid_n=grid_n, df=df)
    eps = 1e-12
    s_left, s_right = np.sign(df(half - eps)), np.sign(df(half + eps))
    if any(abs(c - half) < eps for c in crit) or s_left * s_right < 0 or s_left == 0:
        raise DegeneratePartition(f"delta/2 = {half!r} coincides with a stationary point of the kernel")
    crit = [c for c in crit if 0.0 < c < half]
    bps = tuple(crit) + (half,)
    vals = tuple(float(fejer_kernel(m, b)) for b in bps)
    return FejerPartition(m=m, delta=delta, breakpoints=bps, piece_values=vals)


def _piece_inverse(part: FejerPartition, lo: float, hi: float, u: np.ndarray) -> np.ndarray:
    m = part.m
    return invert_monotone_array(lambda t: fejer_kernel(m, t), lo, hi, u, iterations=56)


def unordered_fejer_cdf(u, part: FejerPartition):
    """``P{F_M(theta) <= u}`` for ``theta`` uniform on ``[0, delta/2]``.

    Computed as the measure of the sublevel set, summed over monotone pieces.
    """
    uu = np.atleast_1d(np.asarray(u, dtype=float))
    total = np.zeros(uu.shape)
    for a, b, decreasing in part.pieces():
        fa, fb = fejer_kernel(part.m, a), fejer_kernel(part.m, b)
        top, bottom = max(fa, fb), min(fa, fb)
        full = uu >= top
        partial = (uu > bottom) & ~full
        contrib = np.where(full, b - a, 0.0)
        if np.any(partial):
            t = _piece_inverse(part, a, b, uu[partial])
            contrib[partial] = (b - t) if decreasing else (t - a)
        total += contrib
    out = np.clip(total / part.half_angle, 0.0, 1.0)
    return _squeeze(out, u)


def unordered_fejer_pdf(u, part: FejerPartition):
    """Density of the kernel value: sum over preimages of ``1 / |F'(theta)|``, scaled by ``2/delta``."""
    uu = np.atleast_1d(np.asarray(u, dtype=float))
    total = np.zeros(uu.shape)
    for a, b, _ in part.pieces():
        fa, fb = fejer_kernel(part.m, a), fejer_kernel(part.m, b)
        inside = (uu > min(fa, fb)) & (uu < max(fa, fb))
        if np.any(inside):
            t = _piece_inverse(part, a, b, uu[inside])
            slope = np.abs(fejer_kernel_derivative(part.m, t))
            with np.errstate(divide="ignore"):
                total[inside] += np.where(slope > 0, 1.0 / slope, np.inf)
    return _squeeze(total / part.half_angle, u)


def unordered_fejer_cdf_inverse(q, part: FejerPartition, iterations: int = 56):
    """Kernel-value quantile: ``u`` with ``unordered_fejer_cdf(u) = q``."""
    qq = np.atleast_1d(np.asarray(q, dtype=float))
    if np.any((qq < 0) | (qq > 1)):
        raise DomainError("quantile level must lie in [0, 1]")
    a = np.zeros(qq.shape)
    b = np.full(qq.shape, float(part.m))
    for _ in range(iterations):
        mid = 0.5 * (a + b)
        below = np.atleast_1d(unordered_fejer_cdf(mid, part)) < qq
        a = np.where(below, mid, a)
        b = np.where(below, b, mid)
    out = 0.5 * (a + b)
    out = np.where(qq >= 1.0, float(part.m), np.where(qq <= 0.0, 0.0, out))
    return _squeeze(out, q)


def _order_stat_log_coeff(k: int, count: int) -> float:
    return gammaln(count + 1) - gammaln(k) - gammaln(count - k + 1)


def ordered_fejer_pdf(z, k: int, count: int, part: FejerPartition, rank_from: RankConvention = "largest"):
    """Density of the rank-``k`` kernel value among ``count`` users.

    ``rank_from="largest"`` makes rank 1 the largest kernel value (best beam
    gain first); ``"smallest"`` is the textbook k-th smallest form.
    """
    if not 1 <= k <= count:
        raise RankError(f"rank {k} outside 1..{count}")
    zz = np.atleast_1d(np.asarray(z, dtype=float))
    cdf = np.atleast_1d(unordered_fejer_cdf(zz, part))
    dens = np.atleast_1d(unordered_fejer_pdf(zz, part))
    below, above = (count - k, k - 1) if rank_from == "largest" else (k - 1, count - k)
    with np.errstate(divide="ignore", invalid="ignore"):
        logv = (
            _order_stat_log_coeff(k, count)
            + np.log(dens)
            + xlogy(below, cdf)
            + xlogy(above, 1.0 - cdf)
        )
    out = np.where(dens > 0, np.exp(logv), 0.0)
    return _squeeze(out, z)


def ordered_fejer_cdf(z, k: int, count: int, part: FejerPartition, rank_from: RankConvention = "largest"):
    if not 1 <= k <= count:
        raise RankError(f"rank {k} outside 1..{count}")
    q = np.atleast_1d(unordered_fejer_cdf(z, part))
    if rank_from == "largest":
        out = betainc(count - k + 1, k, q)
    else:
        out = betainc(k, count - k + 1, q)
    return _squeeze(out, z)


@lru_cache(maxsize=16)
def fejer_quantile_rule(m: int, delta: float, panels: int = 400, order: int = 8):
    """Composite Gauss-Legendre nodes on ``q`` in [0, 1] and the kernel quantile at each node.

    Panel edges include the quantile levels of the piece values so that
    kinks in the quantile function fall on panel boundaries.
    """
    part = build_fejer_partition(m, delta)
    levels = np.atleast_1d(unordered_fejer_cdf(np.array(part.piece_values), part))
    brk = sorted({0.0, 1.0, *[float(v) for v in levels if 0.0 < v < 1.0]})
    nodes, weights = [], []
    for a, b in zip(brk[:-1], brk[1:]):
        n_pan = max(4, int(math.ceil(panels * (b - a))))
        x, w = gauss_legendre_nodes([a, b], panels_per_piece=n_pan, order=order)
        nodes.append(x)
        weights.append(w)
    q = np.concatenate(nodes)
    w = np.concatenate(weights)
    u = np.atleast_1d(unordered_fejer_cdf_inverse(q, part))
    return q, w, u


# ------------------------------------------------------------ effective gain


@lru_cache(maxsize=64)
def _radial_rule(l1: float, l2: float, order: int = 64):
    x, w = gauss_legendre_nodes([l1, l2], panels_per_piece=1, order=order)
    return x, w


def radial_outage(y, u, region: UserRegion, cfg: RadioConfig, radial_weights=None):
    """``E_r[1 - exp(-y PL(r) / u)]`` with ``r`` from the unordered distance law.

    ``u`` (beam gain) may be an array; zero beam gain gives certain outage.
    ``radial_weights`` optionally replaces the unordered distance density
    (nodes are the 64-point Gauss-Legendre nodes on ``[l1, l2]``).
    """
    r, w = _radial_rule(region.l1, region.l2)
    dens = unordered_distance_pdf(r, region) if radial_weights is None else radial_weights
    pl = path_loss(r, cfg.altitude, cfg.gamma)
    uu = np.atleast_1d(np.asarray(u, dtype=float))
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(uu[:, None] > 0, float(y) * pl[None, :] / uu[:, None], np.inf)
    vals = -np.expm1(-ratio)
    out = vals @ (w * dens)
    return _squeeze(out, u)


def unordered_gain_cdf(y: float, region: UserRegion, cfg: RadioConfig) -> float:
    """CDF of the effective gain of a uniformly placed user (approximate kernel model)."""
    if y <= 0:
        return 0.0
    if math.isinf(y):
        return 1.0
    part = build_fejer_partition(cfg.m, region.delta)

    def inner(theta: float) -> float:
        return float(radial_outage(y, fejer_kernel(cfg.m, theta), region, cfg))

    val = integrate(inner, Interval(0.0, region.half_angle), points=part.breakpoints[:-1])
    return min(1.0, max(0.0, val / region.half_angle))


def ordered_gain_cdf(y: float, k: int, count: int, region: UserRegion, cfg: RadioConfig,
                     unordered: float | None = None) -> float:
    """``P{rank-k gain < y}`` among ``count`` users, rank 1 being the largest gain."""
    if not 1 <= k <= count:
        raise RankError(f"rank {k} outside 1..{count}")
    f = unordered_gain_cdf(y, region, cfg) if unordered is None else unordered
    return float(betainc(count - k + 1, k, f))
