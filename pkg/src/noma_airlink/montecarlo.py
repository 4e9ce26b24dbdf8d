"""Trial-level simulation of deployment, ordering and SIC decoding.

Trials run in fixed-size blocks. Block ``b`` draws from its own stream
``SeedSequence([seed, b])`` and blocks are reduced in index order, so every
estimate depends on ``(seed, n_trials, scenario)`` only, never on the number
of worker threads. All strategies evaluated in one call share the same user
populations.
"""

from __future__ import annotations

import enum
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy import stats

from .channel import GainModel, fejer_kernel, gain_values, sinr
from .distributions import CountRegime, ExactK, Regime
from .errors import DomainError, RankError
from .geometry import sample_population
from .numerics import log_poisson_pmf, poisson_truncation
from .ordering import ALL_STRATEGIES, OrderingStrategy, PairedUsers, SingleUser, rank_users, select_pair, sort_keys
from .outage import Scenario

BLOCK_SIZE = 2048


class TrialRegime(str, enum.Enum):
    NO_TX = "notx"
    SINGLE = "single"
    NOMA = "noma"


@dataclass(frozen=True)
class TrialOutcome:
    regime: TrialRegime
    decoded_i: bool
    decoded_j: bool
    rate_contrib: float


@dataclass(frozen=True)
class McEstimate:
    """Monte Carlo estimates with standard errors (sample std over sqrt(n)).

    ``p_out_i`` is over NOMA-regime trials; ``p_out_j`` and the rates are
    over trials with at least ``j`` users. Undefined estimates are NaN.
    """

    strategy: OrderingStrategy
    p_out_i: float
    p_out_i_stderr: float
    p_out_j: float
    p_out_j_stderr: float
    noma_rate: float
    noma_rate_stderr: float
    oma_rate: float
    oma_rate_stderr: float
    oma_p_out_i: float
    oma_p_out_j: float
    n_trials: int
    n_transmit: int
    n_noma: int
    seed: int


# ------------------------------------------------------------------ decoding


def decode_noma(g_j, g_i, scn: Scenario):
    """SIC success flags ``(decoded_j, decoded_i)`` for a served NOMA pair."""
    rho, p, q = scn.radio.rho, scn.powers, scn.qos
    snr_j = rho * np.asarray(g_j, dtype=float)
    snr_i = rho * np.asarray(g_i, dtype=float)
    sinr_ij = snr_j * p.beta_i_sq / (snr_j * p.beta_j_sq + 1.0)
    sinr_ii = snr_i * p.beta_i_sq / (snr_i * p.beta_j_sq + 1.0)
    decoded_j = (sinr_ij > q.eps_i) & (snr_j * p.beta_j_sq > q.eps_j)
    decoded_i = sinr_ii > q.eps_i
    return decoded_j, decoded_i


def decode_single(g_j, scn: Scenario):
    """Full-power, full-resource service of the rank-``j`` user: ``log2(1 + rho g) >= R_j``."""
    return scn.radio.rho * np.asarray(g_j, dtype=float) >= scn.qos.eps_j


def decode_oma(g, rate: float, scn: Scenario, users_per_beam: int = 2):
    """Orthogonal service with a ``1/users_per_beam`` share of the degrees of freedom."""
    return scn.radio.rho * np.asarray(g, dtype=float) >= 2.0 ** (users_per_beam * rate) - 1.0


def run_trial(scn: Scenario, strategy: OrderingStrategy, rng: np.random.Generator,
              gain_model: GainModel = GainModel.APPROX) -> TrialOutcome:
    """One deployment: draw users, rank them, serve and decode (NOMA transmission)."""
    users = sample_population(scn.region, rng)
    if len(users) < scn.pair.j:
        return TrialOutcome(TrialRegime.NO_TX, False, False, 0.0)
    perm = rank_users(users, strategy, scn.radio, gain_model)
    choice = select_pair(perm, scn.pair, len(users))
    gains = gain_values(
        np.array([u.distance for u in users]),
        np.array([u.angle for u in users]),
        np.array([u.fading_power for u in users]),
        scn.radio,
        gain_model,
    )
    if isinstance(choice, SingleUser):
        ok = bool(decode_single(gains[choice.user], scn))
        return TrialOutcome(TrialRegime.SINGLE, False, ok, ok * scn.qos.rate_j)
    assert isinstance(choice, PairedUsers)
    g_j, g_i = gains[choice.strong], gains[choice.weak]
    ok_j = sinr(g_j, scn.pair.i, scn.pair.j, scn.powers, scn.radio) > scn.qos.eps_i and (
        sinr(g_j, scn.pair.j, scn.pair.j, scn.powers, scn.radio) > scn.qos.eps_j
    )
    ok_i = sinr(g_i, scn.pair.i, scn.pair.i, scn.powers, scn.radio, weak_rank_i=scn.pair.i) > scn.qos.eps_i
    return TrialOutcome(TrialRegime.NOMA, bool(ok_i), bool(ok_j), ok_i * scn.qos.rate_i + ok_j * scn.qos.rate_j)


# ------------------------------------------------------------- block engine


def _draw_block(scn: Scenario, rng: np.random.Generator, size: int, width_min: int):
    """Padded user arrays ``(size, width)`` plus the per-trial counts."""
    counts = rng.poisson(scn.mu, size)
    width = max(int(counts.max()) if size else 0, width_min)
    u = rng.random((size, width))
    angle = rng.uniform(-scn.region.half_angle, scn.region.half_angle, (size, width))
    fading = rng.exponential(1.0, (size, width))
    distance = np.sqrt(u * scn.region.ring + scn.region.l1**2)
    valid = np.arange(width)[None, :] < counts[:, None]
    return counts, distance, angle, fading, valid


def _ranked_columns(keys, valid, ranks: Sequence[int]):
    keys = np.where(valid, keys, np.inf)
    perm = np.argsort(keys, axis=1, kind="stable")
    return [perm[:, r - 1] for r in ranks]


def _block_tallies(scn: Scenario, strategies, gain_model, seed: int, block: int, size: int) -> np.ndarray:
    """Per-strategy sums for one block, one row per strategy.

    Columns: n_tx, n_noma, fail_i, fail_j, rate, rate^2, oma fail_i, oma fail_j, oma rate, oma rate^2.
    """
    rng = np.random.default_rng(np.random.SeedSequence([seed, block]))
    pair, qos = scn.pair, scn.qos
    counts, d, a, f, valid = _draw_block(scn, rng, size, pair.i)
    gains = gain_values(d, a, f, scn.radio, gain_model)
    tx = counts >= pair.j
    noma = counts >= pair.i
    single = tx & ~noma
    rows = np.zeros((len(strategies), 10))
    for s, strategy in enumerate(strategies):
        keys = sort_keys(d, a, f, strategy, scn.radio, gain_model)
        col_j, col_i = _ranked_columns(keys, valid, (pair.j, pair.i))
        g_j = np.take_along_axis(gains, col_j[:, None], axis=1)[:, 0]
        g_i = np.take_along_axis(gains, col_i[:, None], axis=1)[:, 0]
        nj, ni = decode_noma(g_j, g_i, scn)
        ok_j = np.where(noma, nj, single & decode_single(g_j, scn))
        ok_i = noma & ni
        rate = np.where(tx, ok_i * qos.rate_i + ok_j * qos.rate_j, 0.0)
        oj = np.where(noma, decode_oma(g_j, qos.rate_j, scn), single & decode_single(g_j, scn))
        oi = noma & decode_oma(g_i, qos.rate_i, scn)
        orate = np.where(tx, oi * qos.rate_i + oj * qos.rate_j, 0.0)
        rows[s] = (
            tx.sum(),
            noma.sum(),
            (noma & ~ok_i).sum(),
            (tx & ~ok_j).sum(),
            rate.sum(),
            (rate * rate).sum(),
            (noma & ~oi).sum(),
            (tx & ~oj).sum(),
            orate.sum(),
            (orate * orate).sum(),
        )
    return rows


def resolve_threads(threads: int | None) -> int:
    """Explicit value, else ``NOMA_AIRLINK_THREADS``, else the CPU count."""
    if threads is None:
        env = os.environ.get("NOMA_AIRLINK_THREADS")
        threads = int(env) if env else (os.cpu_count() or 1)
    if threads < 1:
        raise DomainError(f"thread count must be >= 1, got {threads}")
    return threads


def _proportion(fails: float, n: float):
    if n == 0:
        return math.nan, math.nan
    p = float(fails / n)
    se = math.sqrt(p * (1.0 - p) / (n - 1)) if n > 1 else math.nan
    return p, se


def _mean(total: float, sq: float, n: float):
    if n == 0:
        return math.nan, math.nan
    m = float(total / n)
    if n < 2:
        return m, math.nan
    var = max(sq - total * total / n, 0.0) / (n - 1)
    return m, math.sqrt(var / n)


def estimate_all(n_trials: int, scn: Scenario, strategies: Sequence[OrderingStrategy] = ALL_STRATEGIES,
                 seed: int = 0, gain_model: GainModel = GainModel.APPROX, threads: int | None = None,
                 block_size: int = BLOCK_SIZE) -> dict[OrderingStrategy, McEstimate]:
    """Estimates for several strategies on common user populations."""
    if n_trials < 1:
        raise DomainError("n_trials must be >= 1")
    strategies = [OrderingStrategy(s) for s in strategies]
    sizes = [block_size] * (n_trials // block_size)
    if n_trials % block_size:
        sizes.append(n_trials % block_size)
    jobs = list(enumerate(sizes))

    def work(job):
        b, size = job
        return _block_tallies(scn, strategies, gain_model, seed, b, size)

    workers = min(resolve_threads(threads), len(jobs))
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(work, jobs))
    else:
        parts = [work(job) for job in jobs]
    total = np.zeros_like(parts[0])
    for part in parts:  # fixed-order reduction
        total += part
    out = {}
    for s, strategy in enumerate(strategies):
        n_tx, n_noma, f_i, f_j, r, r2, of_i, of_j, orr, orr2 = total[s]
        p_i, se_i = _proportion(f_i, n_noma)
        p_j, se_j = _proportion(f_j, n_tx)
        rate, se_rate = _mean(r, r2, n_tx)
        orate, se_orate = _mean(orr, orr2, n_tx)
        out[strategy] = McEstimate(
            strategy=strategy,
            p_out_i=p_i,
            p_out_i_stderr=se_i,
            p_out_j=p_j,
            p_out_j_stderr=se_j,
            noma_rate=rate,
            noma_rate_stderr=se_rate,
            oma_rate=orate,
            oma_rate_stderr=se_orate,
            oma_p_out_i=_proportion(of_i, n_noma)[0],
            oma_p_out_j=_proportion(of_j, n_tx)[0],
            n_trials=n_trials,
            n_transmit=int(n_tx),
            n_noma=int(n_noma),
            seed=seed,
        )
    return out


def estimate(n_trials: int, scn: Scenario, strategy: OrderingStrategy, seed: int = 0,
             gain_model: GainModel = GainModel.APPROX, threads: int | None = None,
             block_size: int = BLOCK_SIZE) -> McEstimate:
    return estimate_all(n_trials, scn, [strategy], seed, gain_model, threads, block_size)[OrderingStrategy(strategy)]


# ----------------------------------------------------- empirical distributions


class Statistic(str, enum.Enum):
    DISTANCE = "distance"
    ABS_ANGLE = "angle"
    FEJER = "fejer"
    GAIN = "gain"


@dataclass(frozen=True)
class EmpiricalDistribution:
    statistic: Statistic
    k: int
    samples: np.ndarray

    def histogram(self, bins: int = 100, range_=None):
        """Density-normalised histogram ``(density, edges)``."""
        return np.histogram(self.samples, bins=bins, range=range_, density=True)

    def ks_distance(self, cdf) -> float:
        """Kolmogorov-Smirnov distance to a reference CDF callable."""
        return float(stats.kstest(self.samples, cdf).statistic)


def sample_counts(regime: CountRegime, scn: Scenario, rng: np.random.Generator, size: int) -> np.ndarray:
    """User counts drawn from the Poisson law conditioned on ``regime``."""
    if isinstance(regime, ExactK):
        return np.full(size, regime.k)
    pair, mu = scn.pair, scn.mu
    if Regime(regime) is Regime.BETWEEN:
        lo, hi = pair.j, pair.i - 1
    else:
        lo, hi = pair.i, max(pair.i, poisson_truncation(mu, 1e-15))
    ns = np.arange(lo, hi + 1)
    logp = log_poisson_pmf(ns, mu)
    p = np.exp(logp - logp.max())
    return rng.choice(ns, size=size, p=p / p.sum())


def empirical_distribution(statistic: Statistic, k: int, regime: CountRegime, strategy: OrderingStrategy,
                           n_trials: int, scn: Scenario, seed: int = 0,
                           gain_model: GainModel = GainModel.APPROX,
                           block_size: int = BLOCK_SIZE) -> EmpiricalDistribution:
    """Samples of ``statistic`` for the rank-``k`` user under ``strategy`` ordering.

    Every trial satisfies the count regime (counts are drawn from the
    conditioned Poisson law, which is equivalent to rejection).
    """
    statistic = Statistic(statistic)
    if k < 1:
        raise RankError("rank must be >= 1")
    if isinstance(regime, ExactK) and regime.k < k:
        raise RankError(f"rank {k} needs at least {k} users")
    if not isinstance(regime, ExactK) and Regime(regime) is Regime.BETWEEN and k >= scn.pair.i:
        raise RankError(f"rank {k} is never present when fewer than i = {scn.pair.i} users exist")
    out = []
    remaining, block = n_trials, 0
    while remaining > 0:
        size = min(block_size, remaining)
        rng = np.random.default_rng(np.random.SeedSequence([seed, block]))
        counts = sample_counts(regime, scn, rng, size)
        width = int(counts.max())
        u = rng.random((size, width))
        a = rng.uniform(-scn.region.half_angle, scn.region.half_angle, (size, width))
        f = rng.exponential(1.0, (size, width))
        d = np.sqrt(u * scn.region.ring + scn.region.l1**2)
        valid = np.arange(width)[None, :] < counts[:, None]
        keys = sort_keys(d, a, f, strategy, scn.radio, gain_model)
        (col,) = _ranked_columns(keys, valid, (k,))
        pick = lambda arr: np.take_along_axis(arr, col[:, None], axis=1)[:, 0]  # noqa: E731
        if statistic is Statistic.DISTANCE:
            vals = pick(d)
        elif statistic is Statistic.ABS_ANGLE:
            vals = np.abs(pick(a))
        elif statistic is Statistic.FEJER:
            offset = np.sin(pick(a)) if GainModel(gain_model) is GainModel.EXACT else pick(a)
            vals = fejer_kernel(scn.radio.m, offset)
        else:
            vals = pick(gain_values(d, a, f, scn.radio, gain_model))
        out.append(np.atleast_1d(vals))
        remaining -= size
        block += 1
    return EmpiricalDistribution(statistic, k, np.concatenate(out))
