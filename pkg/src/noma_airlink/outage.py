"""SIC thresholds, conditional and unconditional outage, NOMA/OMA outage sum rates."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy.special import betainc, gammaln, xlogy

from .channel import NomaPower, RadioConfig, fejer_kernel, path_loss
from .distributions import (
    CountRegime,
    ExactK,
    Regime,
    build_fejer_partition,
    fejer_quantile_rule,
    ordered_abs_angle_pdf,
    ordered_distance_pdf,
    ordered_mode_x,
    radial_outage,
    unordered_gain_cdf,
)
from .errors import DomainError, InfeasiblePowerSplit, RankError, RegimeError
from .geometry import UserRegion, mean_count
from .numerics import (
    Interval,
    QuadSpec,
    gauss_legendre_nodes,
    integrate,
    log_poisson_pmf,
    log_poisson_range,
    poisson_truncation,
)
from .ordering import NomaPair, OrderingStrategy

TAIL_TOL = 1e-12
_QUAD = QuadSpec(rel_tol=1e-9, abs_tol=1e-13, max_subdivisions=2000)


@dataclass(frozen=True)
class QosTargets:
    rate_j: float = 6.0
    rate_i: float = 0.5

    def __post_init__(self):
        if not (self.rate_j > 0 and self.rate_i > 0):
            raise DomainError("target rates must be positive")

    @property
    def eps_j(self) -> float:
        return 2.0**self.rate_j - 1.0

    @property
    def eps_i(self) -> float:
        return 2.0**self.rate_i - 1.0

    @property
    def total(self) -> float:
        return self.rate_i + self.rate_j


class Role(str, enum.Enum):
    WEAK_I = "i"
    STRONG_J = "j"


@dataclass(frozen=True)
class Scenario:
    """Everything an outage or rate evaluation depends on."""

    region: UserRegion = field(default_factory=UserRegion)
    radio: RadioConfig = field(default_factory=RadioConfig)
    powers: NomaPower = field(default_factory=NomaPower)
    qos: QosTargets = field(default_factory=QosTargets)
    pair: NomaPair = field(default_factory=NomaPair)
    # use eps_i / rho for the weak user instead of the SIC-consistent threshold
    interference_free_eta_i: bool = False

    @property
    def mu(self) -> float:
        return mean_count(self.region)

    def rank(self, role: Role) -> int:
        return self.pair.i if Role(role) is Role.WEAK_I else self.pair.j


@dataclass(frozen=True)
class OutageReport:
    strategy: OrderingStrategy
    p_out_i: float
    p_out_j: float
    noma_rate: float
    oma_rate: float
    # outage given the user is scheduled: K >= i for the weak user, K >= j for the strong one
    p_out_i_given_present: float = math.nan
    p_out_j_given_present: float = math.nan
    oma_p_out_i: float = math.nan
    oma_p_out_j: float = math.nan


# ------------------------------------------------------------------ thresholds


def _is_noma(regime: CountRegime, pair: NomaPair | None) -> bool:
    if isinstance(regime, ExactK):
        if pair is None:
            raise DomainError("an ExactK regime needs the NOMA pair to tell single-user from NOMA service")
        if regime.k < pair.j:
            raise RegimeError(f"no transmission with {regime.k} < j = {pair.j} users")
        return regime.k >= pair.i
    return Regime(regime) is Regime.AT_LEAST_I


def eta_threshold(role: Role, regime: CountRegime, qos: QosTargets, powers: NomaPower,
                  cfg: RadioConfig, pair: NomaPair | None = None, interference_free_eta_i: bool = False) -> float:
    """Effective-gain level below which the user of ``role`` is in outage."""
    role = Role(role)
    rho = cfg.rho
    noma = _is_noma(regime, pair)
    if not noma:
        if role is Role.WEAK_I:
            raise RegimeError("the weak user is not served when fewer than i users are present")
        return qos.eps_j / rho
    margin = powers.beta_i_sq - powers.beta_j_sq * qos.eps_i
    if role is Role.WEAK_I and interference_free_eta_i:
        return qos.eps_i / rho
    if margin <= 0:
        raise InfeasiblePowerSplit(
            f"beta_i^2 - beta_j^2 * eps_i = {margin:.4g} <= 0: weak-user message undecodable at any SNR"
        )
    weak = qos.eps_i / (rho * margin)
    if role is Role.WEAK_I:
        return weak
    return max(weak, qos.eps_j / (rho * powers.beta_j_sq))


def oma_threshold(role: Role, regime: CountRegime, qos: QosTargets, cfg: RadioConfig,
                  pair: NomaPair | None = None, users_per_beam: int = 2) -> float:
    """Gain threshold of the orthogonal baseline: ``(2^(K_N R) - 1) / rho``.

    In the single-user regime the scheduled user gets all resources (``K_N = 1``).
    """
    role = Role(role)
    noma = _is_noma(regime, pair)
    if not noma:
        if role is Role.WEAK_I:
            raise RegimeError("the weak user is not served when fewer than i users are present")
        return qos.eps_j / cfg.rho
    rate = qos.rate_i if role is Role.WEAK_I else qos.rate_j
    return (2.0 ** (users_per_beam * rate) - 1.0) / cfg.rho


# -------------------------------------------------------- conditional outage


@lru_cache(maxsize=64)
def _angle_rule(m: int, delta: float):
    part = build_fejer_partition(m, delta)
    theta, w = gauss_legendre_nodes(part.edges, panels_per_piece=16, order=16)
    return theta, w / part.half_angle, fejer_kernel(m, theta)


def angle_averaged_outage(c, region: UserRegion, cfg: RadioConfig):
    """``E_theta[1 - exp(-c / F_M(theta))]`` for ``theta`` uniform on ``[0, delta/2]``."""
    _, w, kern = _angle_rule(cfg.m, region.delta)
    cc = np.atleast_1d(np.asarray(c, dtype=float))
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(kern[None, :] > 0, cc[:, None] / kern[None, :], np.inf)
    out = -np.expm1(-ratio) @ w
    return float(out[0]) if np.ndim(c) == 0 else out


def _beta_weights(q, k: int, ns: np.ndarray) -> np.ndarray:
    """Density of the rank-``k``-largest uniform order statistic, one row per count in ``ns``."""
    a = ns[:, None] - k + 1.0
    b = float(k)
    logc = gammaln(ns[:, None] + 1.0) - gammaln(a) - gammaln(b)
    with np.errstate(divide="ignore"):
        logv = logc + xlogy(a - 1.0, q[None, :]) + xlogy(b - 1.0, 1.0 - q[None, :])
    return np.exp(logv)


def fejer_outage_given_counts(eta: float, k: int, ns, scn: Scenario) -> np.ndarray:
    """Outage of the rank-``k`` user under kernel ordering for each exact count in ``ns``.

    Integrates the radial outage at the kernel quantile against the Beta law
    of the rank-``k``-largest uniform order statistic.
    """
    ns = np.atleast_1d(np.asarray(ns))
    if np.any(ns < k):
        raise RankError(f"rank {k} needs at least {k} users")
    if eta <= 0:
        return np.zeros(ns.shape)
    if math.isinf(eta):
        return np.ones(ns.shape)
    q, w, u = fejer_quantile_rule(scn.radio.m, scn.region.delta)
    h = radial_outage(eta, u, scn.region, scn.radio)
    out = _beta_weights(q, k, ns) @ (w * h)
    return np.clip(out, 0.0, 1.0)


def fullcsi_outage_given_counts(eta: float, k: int, ns, scn: Scenario, unordered: float | None = None) -> np.ndarray:
    ns = np.atleast_1d(np.asarray(ns))
    if np.any(ns < k):
        raise RankError(f"rank {k} needs at least {k} users")
    f = unordered_gain_cdf(eta, scn.region, scn.radio) if unordered is None else unordered
    return betainc(ns - k + 1.0, float(k), f)


def _angle_outage(eta: float, k: int, regime: Regime, scn: Scenario) -> float:
    region, cfg, pair = scn.region, scn.radio, scn.pair
    part = build_fejer_partition(cfg.m, region.delta)
    mode = ordered_mode_x(k, pair, regime, scn.mu) * region.half_angle

    def f(theta: float) -> float:
        dens = ordered_abs_angle_pdf(theta, k, pair, regime, region)
        if dens == 0.0:
            return 0.0
        return dens * float(radial_outage(eta, fejer_kernel(cfg.m, theta), region, cfg))

    pts = list(part.breakpoints[:-1]) + [mode]
    return integrate(f, Interval(0.0, region.half_angle), _QUAD, points=pts)


def _distance_outage(eta: float, k: int, regime: Regime, scn: Scenario) -> float:
    region, cfg, pair = scn.region, scn.radio, scn.pair
    x_mode = ordered_mode_x(k, pair, regime, scn.mu)
    r_mode = math.sqrt(region.l1**2 + x_mode * region.ring)

    def f(r: float) -> float:
        dens = ordered_distance_pdf(r, k, pair, regime, region)
        if dens == 0.0:
            return 0.0
        return dens * angle_averaged_outage(eta * path_loss(r, cfg.altitude, cfg.gamma), region, cfg)

    return integrate(f, Interval(region.l1, region.l2), _QUAD, points=[r_mode])


def conditional_outage(strategy: OrderingStrategy, role: Role, regime: CountRegime, scn: Scenario,
                       threshold: float | None = None, oma: bool = False) -> float:
    """Outage of the ``role`` user given the count regime.

    Kernel and full-CSI ordering take an :class:`ExactK` regime; distance and
    angle ordering take ``Regime.BETWEEN`` or ``Regime.AT_LEAST_I``.
    ``threshold`` overrides the SIC gain threshold.
    """
    strategy = OrderingStrategy(strategy)
    role = Role(role)
    k = scn.rank(role)
    if threshold is None:
        if oma:
            threshold = oma_threshold(role, regime, scn.qos, scn.radio, scn.pair)
        else:
            threshold = eta_threshold(role, regime, scn.qos, scn.powers, scn.radio, scn.pair, scn.interference_free_eta_i)
    if threshold <= 0:
        return 0.0
    if math.isinf(threshold):
        return 1.0
    if strategy.regime_joint:
        if isinstance(regime, ExactK):
            raise RegimeError(f"{strategy.value} ordering is analysed over count ranges, not exact counts")
        regime = Regime(regime)
        if strategy is OrderingStrategy.ABS_ANGLE:
            val = _angle_outage(threshold, k, regime, scn)
        else:
            val = _distance_outage(threshold, k, regime, scn)
        return min(1.0, max(0.0, val))
    if not isinstance(regime, ExactK):
        raise RegimeError(f"{strategy.value} ordering is analysed per exact user count")
    if strategy is OrderingStrategy.FEJER:
        return float(fejer_outage_given_counts(threshold, k, [regime.k], scn)[0])
    return float(fullcsi_outage_given_counts(threshold, k, [regime.k], scn)[0])


# ------------------------------------------------------ unconditional + rates


@dataclass(frozen=True)
class _RegimeOutages:
    """Per-regime outages and weights normalised by ``P{K >= j}``."""

    log_norm: float
    w_single: np.ndarray
    w_noma: np.ndarray
    j_single: np.ndarray
    j_noma: np.ndarray
    i_noma: np.ndarray

    def conditional(self):
        w_i = self.w_noma.sum()
        p_i = float(self.w_noma @ self.i_noma / w_i) if w_i > 0 else math.nan
        p_j = float(self.w_single @ self.j_single + self.w_noma @ self.j_noma)
        return p_i, p_j

    def unconditional(self):
        norm = math.exp(self.log_norm)
        ok_i = float(self.w_noma @ (1.0 - self.i_noma))
        ok_j = float(self.w_single @ (1.0 - self.j_single) + self.w_noma @ (1.0 - self.j_noma))
        return 1.0 - norm * ok_i, 1.0 - norm * ok_j

    def rate(self, qos: QosTargets) -> float:
        ok_i = float(self.w_noma @ (1.0 - self.i_noma))
        ok_j = float(self.w_single @ (1.0 - self.j_single) + self.w_noma @ (1.0 - self.j_noma))
        return ok_i * qos.rate_i + ok_j * qos.rate_j


def _thresholds(scn: Scenario, oma: bool):
    """(single-user j, NOMA j, NOMA i) thresholds; NOMA ones are inf when infeasible."""
    pair = scn.pair
    if oma:
        t = lambda role, reg: oma_threshold(role, reg, scn.qos, scn.radio, pair)  # noqa: E731
    else:
        t = lambda role, reg: eta_threshold(role, reg, scn.qos, scn.powers, scn.radio, pair, scn.interference_free_eta_i)  # noqa: E731
    single = t(Role.STRONG_J, Regime.BETWEEN)
    try:
        noma_j = t(Role.STRONG_J, Regime.AT_LEAST_I)
    except InfeasiblePowerSplit:
        noma_j = math.inf
    try:
        noma_i = t(Role.WEAK_I, Regime.AT_LEAST_I)
    except InfeasiblePowerSplit:
        noma_i = math.inf
    return single, noma_j, noma_i


def _regime_outages(strategy: OrderingStrategy, scn: Scenario, oma: bool) -> _RegimeOutages:
    strategy = OrderingStrategy(strategy)
    pair, mu = scn.pair, scn.mu
    log_norm = log_poisson_range(pair.j, math.inf, mu)
    t_single, t_j, t_i = _thresholds(scn, oma)
    if strategy.regime_joint:
        w2 = math.exp(log_poisson_range(pair.j, pair.i - 1, mu) - log_norm)
        w3 = math.exp(log_poisson_range(pair.i, math.inf, mu) - log_norm)

        def cond(role, regime, thr):
            return conditional_outage(strategy, role, regime, scn, threshold=thr)

        return _RegimeOutages(
            log_norm,
            np.array([w2]),
            np.array([w3]),
            np.array([cond(Role.STRONG_J, Regime.BETWEEN, t_single)]),
            np.array([cond(Role.STRONG_J, Regime.AT_LEAST_I, t_j)]) if w3 > 0 else np.array([1.0]),
            np.array([cond(Role.WEAK_I, Regime.AT_LEAST_I, t_i)]) if w3 > 0 else np.array([1.0]),
        )
    n_max = max(pair.i, poisson_truncation(mu, TAIL_TOL))
    ns_single = np.arange(pair.j, pair.i)
    ns_noma = np.arange(pair.i, n_max + 1)
    w_single = np.exp(log_poisson_pmf(ns_single, mu) - log_norm)
    w_noma = np.exp(log_poisson_pmf(ns_noma, mu) - log_norm)
    if strategy is OrderingStrategy.FEJER:
        per = lambda thr, k, ns: fejer_outage_given_counts(thr, k, ns, scn)  # noqa: E731
    else:
        cache: dict[float, float] = {}

        def per(thr, k, ns):
            if thr not in cache:
                cache[thr] = unordered_gain_cdf(thr, scn.region, scn.radio)
            return fullcsi_outage_given_counts(thr, k, ns, scn, unordered=cache[thr])

    return _RegimeOutages(
        log_norm,
        w_single,
        w_noma,
        per(t_single, pair.j, ns_single),
        per(t_j, pair.j, ns_noma),
        per(t_i, pair.i, ns_noma),
    )


def unconditional_outage(strategy: OrderingStrategy, role: Role, scn: Scenario, oma: bool = False) -> float:
    """Outage counting absent users as failures: ``1 - sum_regimes P{S}(1 - P_{k|S})``."""
    p_i, p_j = _regime_outages(strategy, scn, oma).unconditional()
    return p_i if Role(role) is Role.WEAK_I else p_j


def noma_sum_rate(strategy: OrderingStrategy, scn: Scenario) -> float:
    """Outage sum rate normalised by the probability that transmission happens (``K >= j``)."""
    return _regime_outages(strategy, scn, oma=False).rate(scn.qos)


def oma_sum_rate(strategy: OrderingStrategy, scn: Scenario) -> float:
    return _regime_outages(strategy, scn, oma=True).rate(scn.qos)


def analyze(strategy: OrderingStrategy, scn: Scenario) -> OutageReport:
    """All outage and rate outputs of one strategy at one scenario point."""
    strategy = OrderingStrategy(strategy)
    noma = _regime_outages(strategy, scn, oma=False)
    oma = _regime_outages(strategy, scn, oma=True)
    p_i, p_j = noma.unconditional()
    c_i, c_j = noma.conditional()
    o_i, o_j = oma.conditional()
    return OutageReport(
        strategy=strategy,
        p_out_i=min(1.0, max(0.0, p_i)),
        p_out_j=min(1.0, max(0.0, p_j)),
        noma_rate=noma.rate(scn.qos),
        oma_rate=oma.rate(scn.qos),
        p_out_i_given_present=c_i,
        p_out_j_given_present=c_j,
        oma_p_out_i=o_i,
        oma_p_out_j=o_j,
    )
