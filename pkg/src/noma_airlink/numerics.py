"""Quadrature, root bracketing, monotone inversion and log-domain Poisson helpers."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, Sequence

import numpy as np
from scipy import integrate as _spi
from scipy.special import gammainc, gammaln, logsumexp, xlogy

from .errors import DomainError, NonConvergence, OutOfRange


@dataclass(frozen=True)
class Interval:
    lo: float
    hi: float

    def __post_init__(self):
        if not (math.isfinite(self.lo) and math.isfinite(self.hi)):
            raise DomainError(f"interval bounds must be finite, got [{self.lo}, {self.hi}]")
        if not self.lo < self.hi:
            raise DomainError(f"interval requires lo < hi, got [{self.lo}, {self.hi}]")

    @property
    def width(self) -> float:
        return self.hi - self.lo


@dataclass(frozen=True)
class QuadSpec:
    rel_tol: float = 1e-8
    abs_tol: float = 1e-12
    max_subdivisions: int = 2000

    def __post_init__(self):
        if self.rel_tol <= 0 or self.abs_tol <= 0:
            raise DomainError("quadrature tolerances must be positive")
        if self.max_subdivisions < 1:
            raise DomainError("max_subdivisions must be >= 1")


DEFAULT_QUAD = QuadSpec()


def integrate(
    f: Callable[[float], float],
    iv: Interval,
    spec: QuadSpec = DEFAULT_QUAD,
    points: Sequence[float] | None = None,
) -> float:
    """Adaptive Gauss-Kronrod integral of ``f`` over ``iv``.

    ``points`` are interior locations of known integrand features (kinks,
    sharp peaks); they seed the subdivision. Raises :class:`NonConvergence`
    when the error estimate stays above ``max(rel_tol*|I|, abs_tol)``.
    """
    pts = None
    if points is not None:
        pts = sorted({float(p) for p in points if iv.lo < p < iv.hi})
        pts = pts or None
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", _spi.IntegrationWarning)
        value, err = _spi.quad(
            f,
            iv.lo,
            iv.hi,
            epsabs=spec.abs_tol,
            epsrel=spec.rel_tol,
            limit=spec.max_subdivisions,
            points=pts,
        )
    if not math.isfinite(value) or err > max(spec.rel_tol * abs(value), spec.abs_tol):
        raise NonConvergence(
            f"quadrature on [{iv.lo:g}, {iv.hi:g}] stopped at error {err:.3g} "
            f"(value {value:.6g}, budget {spec.max_subdivisions} subdivisions)"
        )
    return value


@lru_cache(maxsize=32)
def _legendre(n: int) -> tuple[np.ndarray, np.ndarray]:
    x, w = np.polynomial.legendre.leggauss(n)
    return x, w


def gauss_legendre_nodes(
    breaks: Sequence[float], panels_per_piece: int = 8, order: int = 16
) -> tuple[np.ndarray, np.ndarray]:
    """Nodes and weights of a composite Gauss-Legendre rule.

    Each interval between consecutive ``breaks`` is split into
    ``panels_per_piece`` equal panels carrying an ``order``-point rule.
    """
    x, w = _legendre(order)
    b = np.asarray(breaks, dtype=float)
    edges = []
    for a, c in zip(b[:-1], b[1:]):
        edges.append(np.linspace(a, c, panels_per_piece + 1)[:-1])
    edges.append(b[-1:])
    e = np.concatenate(edges)
    lo, hi = e[:-1], e[1:]
    half = 0.5 * (hi - lo)
    mid = 0.5 * (hi + lo)
    nodes = (mid[:, None] + half[:, None] * x[None, :]).ravel()
    weights = (half[:, None] * w[None, :]).ravel()
    return nodes, weights


def _numerical_derivative(f: Callable[[float], float], x: float, step: float) -> float:
    return (f(x + step) - f(x - step)) / (2.0 * step)


def find_critical_points(
    f: Callable[[float], float],
    iv: Interval,
    grid_n: int | None = None,
    df: Callable[[float], float] | None = None,
    xtol: float = 1e-12,
) -> list[float]:
    """Interior points of ``iv`` where the derivative of ``f`` changes sign.

    The derivative (``df`` or a central difference) is scanned on ``grid_n``
    equally spaced points; each bracketed sign change is refined by bisection
    to a bracket narrower than ``xtol``.
    """
    if grid_n is None:
        grid_n = max(1000, int(math.ceil(1e4 * iv.width)))
    if grid_n < 3:
        raise DomainError("grid_n must be >= 3")
    step = max(iv.width * 1e-7, 1e-9)
    if df is None:
        def df(x: float) -> float:
            return _numerical_derivative(f, x, step)

    grid = np.linspace(iv.lo, iv.hi, grid_n)
    slopes = np.array([df(float(x)) for x in grid])
    signs = np.sign(slopes)
    found: list[float] = []
    for k in range(grid_n - 1):
        s0, s1 = signs[k], signs[k + 1]
        if s0 * s1 < 0:
            found.append(_bisect_sign(df, float(grid[k]), float(grid[k + 1]), s0, xtol))
        elif s1 == 0 and 0 < k + 1 < grid_n - 1 and s0 * signs[k + 2] < 0:
            found.append(float(grid[k + 1]))
    return found


def _bisect_sign(df, lo: float, hi: float, s_lo: float, xtol: float) -> float:
    while hi - lo > xtol:
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        s = np.sign(df(mid))
        if s == 0:
            return mid
        if s == s_lo:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def invert_monotone(g: Callable[[float], float], iv: Interval, target: float) -> float:
    """Solve ``g(x) = target`` for strictly monotone ``g`` on ``iv`` by bisection."""
    g_lo, g_hi = g(iv.lo), g(iv.hi)
    lo_val, hi_val = min(g_lo, g_hi), max(g_lo, g_hi)
    if not lo_val <= target <= hi_val:
        raise OutOfRange(f"target {target!r} outside [{lo_val!r}, {hi_val!r}]")
    if target == g_lo:
        return iv.lo
    if target == g_hi:
        return iv.hi
    increasing = g_hi > g_lo
    lo, hi = iv.lo, iv.hi
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        val = g(mid)
        if val == target:
            return mid
        if (val < target) == increasing:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def invert_monotone_array(
    g: Callable[[np.ndarray], np.ndarray],
    lo: float,
    hi: float,
    targets: np.ndarray,
    iterations: int = 64,
) -> np.ndarray:
    """Vectorised bisection for many targets of one monotone function.

    Targets outside the range of ``g`` are clipped to the matching endpoint.
    """
    targets = np.asarray(targets, dtype=float)
    increasing = float(g(np.array([hi]))[0]) > float(g(np.array([lo]))[0])
    a = np.full(targets.shape, lo, dtype=float)
    b = np.full(targets.shape, hi, dtype=float)
    for _ in range(iterations):
        mid = 0.5 * (a + b)
        below = g(mid) < targets
        go_right = below if increasing else ~below
        a = np.where(go_right, mid, a)
        b = np.where(go_right, b, mid)
    return 0.5 * (a + b)


def log_poisson_pmf(k, mu):
    """``log P{K = k}`` for ``K ~ Poisson(mu)``; accepts scalars or arrays."""
    k_arr = np.asarray(k)
    mu_arr = np.asarray(mu, dtype=float)
    if np.any(k_arr < 0):
        raise DomainError("Poisson count must be non-negative")
    if np.any(~(mu_arr > 0)) or np.any(~np.isfinite(mu_arr)):
        raise DomainError("Poisson mean must be finite and positive")
    out = xlogy(k_arr, mu_arr) - mu_arr - gammaln(k_arr + 1.0)
    return float(out) if out.ndim == 0 else out


def log_poisson_range(lo: int, hi: float, mu):
    """``log P{lo <= K <= hi}`` for ``K ~ Poisson(mu)``; ``hi`` may be ``inf``.

    ``mu`` may be an array (zero allowed). Finite ranges are summed with
    log-sum-exp; upper tails use the regularised incomplete gamma function.
    """
    mu_arr = np.atleast_1d(np.asarray(mu, dtype=float))
    lo = max(int(lo), 0)
    if hi < lo:
        out = np.full(mu_arr.shape, -np.inf)
    elif math.isinf(hi):
        if lo == 0:
            out = np.zeros(mu_arr.shape)
        else:
            with np.errstate(divide="ignore"):
                out = np.log(gammainc(lo, mu_arr))
            # gammainc underflows deep in the left tail; fall back to summing terms
            bad = ~np.isfinite(out) & (mu_arr > 0)
            if np.any(bad):
                ks = np.arange(lo, lo + 400)[:, None]
                out[bad] = logsumexp(
                    xlogy(ks, mu_arr[bad][None, :]) - mu_arr[bad][None, :] - gammaln(ks + 1.0),
                    axis=0,
                )
    else:
        ks = np.arange(lo, int(hi) + 1)[:, None]
        with np.errstate(divide="ignore"):
            terms = xlogy(ks, mu_arr[None, :]) - mu_arr[None, :] - gammaln(ks + 1.0)
        out = logsumexp(terms, axis=0)
    return float(out[0]) if np.ndim(mu) == 0 else out


def poisson_truncation(mu: float, tail_tol: float) -> int:
    """Smallest ``n`` with ``P{K > n} < tail_tol`` for ``K ~ Poisson(mu)``."""
    if not mu > 0:
        raise DomainError("Poisson mean must be positive")
    if not 0 < tail_tol < 1:
        raise DomainError("tail_tol must lie in (0, 1)")
    # P{K > n} = P(n + 1, mu), the regularised lower incomplete gamma
    n = max(0, int(mu - 10.0 * math.sqrt(mu)))
    while gammainc(n + 1, mu) >= tail_tol:
        n += 1
    while n > 0 and gammainc(n, mu) < tail_tol:
        n -= 1
    return n
