import math
from dataclasses import replace

import numpy as np
import pytest
from scipy import integrate as spi
from scipy.special import betainc

from noma_airlink.channel import NomaPower, RadioConfig, dbm_to_watt, fejer_kernel, path_loss
from noma_airlink.distributions import (
    ExactK,
    Regime,
    build_fejer_partition,
    ordered_fejer_pdf,
    radial_outage,
    regime_probability,
    unordered_gain_cdf,
)
from noma_airlink.errors import InfeasiblePowerSplit, RegimeError
from noma_airlink.geometry import UserRegion, mean_count
from noma_airlink.ordering import ALL_STRATEGIES, NomaPair, OrderingStrategy
from noma_airlink.outage import (
    QosTargets,
    Role,
    Scenario,
    analyze,
    conditional_outage,
    eta_threshold,
    fejer_outage_given_counts,
    noma_sum_rate,
    oma_sum_rate,
    oma_threshold,
    unconditional_outage,
)

from oracles import poisson_mixture_order_pdf

SCN = Scenario()
RHO = 10**5.5
REGIME_OF = {
    OrderingStrategy.DISTANCE: Regime.AT_LEAST_I,
    OrderingStrategy.ABS_ANGLE: Regime.AT_LEAST_I,
    OrderingStrategy.FEJER: ExactK(121),
    OrderingStrategy.FULL_CSI: ExactK(121),
}


class TestThresholds:
    qos, powers, cfg, pair = QosTargets(), NomaPower(), RadioConfig(), NomaPair()

    def test_eps(self):
        assert self.qos.eps_j == 63
        assert self.qos.eps_i == pytest.approx(math.sqrt(2) - 1)

    def test_strong_single(self):
        t = eta_threshold(Role.STRONG_J, Regime.BETWEEN, self.qos, self.powers, self.cfg)
        assert t == pytest.approx(63 / RHO) and t == pytest.approx(1.9922e-4, rel=1e-4)

    def test_strong_noma(self):
        t = eta_threshold(Role.STRONG_J, Regime.AT_LEAST_I, self.qos, self.powers, self.cfg)
        assert t == pytest.approx(252 / RHO) and t == pytest.approx(7.9689e-4, rel=1e-4)

    def test_weak_noma(self):
        t = eta_threshold(Role.WEAK_I, Regime.AT_LEAST_I, self.qos, self.powers, self.cfg)
        assert t == pytest.approx(2.0263e-6, rel=1e-4)
        literal = eta_threshold(Role.WEAK_I, Regime.AT_LEAST_I, self.qos, self.powers, self.cfg, interference_free_eta_i=True)
        assert literal == pytest.approx(self.qos.eps_i / RHO)

    def test_threshold_is_sic_boundary(self):
        # just above the threshold both SIC stages succeed, just below one fails
        beta_j, beta_i = self.powers.beta_j_sq, self.powers.beta_i_sq
        eps_i, eps_j = self.qos.eps_i, self.qos.eps_j
        t_i = eta_threshold(Role.WEAK_I, Regime.AT_LEAST_I, self.qos, self.powers, self.cfg)
        t_j = eta_threshold(Role.STRONG_J, Regime.AT_LEAST_I, self.qos, self.powers, self.cfg)

        def weak_ok(g):
            s = RHO * g
            return s * beta_i / (s * beta_j + 1) > eps_i

        assert weak_ok(t_i * (1 + 1e-9)) and not weak_ok(t_i * (1 - 1e-9))
        strong_ok = lambda g: weak_ok(g) and RHO * g * beta_j > eps_j  # noqa: E731
        assert strong_ok(t_j * (1 + 1e-9)) and not strong_ok(t_j * (1 - 1e-9))

    def test_exact_k_regimes(self):
        assert eta_threshold(Role.STRONG_J, ExactK(22), self.qos, self.powers, self.cfg, self.pair) == pytest.approx(
            63 / RHO
        )
        assert eta_threshold(Role.STRONG_J, ExactK(30), self.qos, self.powers, self.cfg, self.pair) == pytest.approx(
            252 / RHO
        )
        with pytest.raises(RegimeError):
            eta_threshold(Role.WEAK_I, ExactK(22), self.qos, self.powers, self.cfg, self.pair)
        with pytest.raises(RegimeError):
            eta_threshold(Role.STRONG_J, ExactK(10), self.qos, self.powers, self.cfg, self.pair)

    def test_infeasible_split(self):
        qos = QosTargets(rate_j=6, rate_i=2.0)
        with pytest.raises(InfeasiblePowerSplit):
            eta_threshold(Role.WEAK_I, Regime.AT_LEAST_I, qos, NomaPower(0.4, 0.6), self.cfg)

    def test_oma(self):
        assert oma_threshold(Role.STRONG_J, Regime.AT_LEAST_I, self.qos, self.cfg) == pytest.approx((2**12 - 1) / RHO)
        assert oma_threshold(Role.WEAK_I, Regime.AT_LEAST_I, self.qos, self.cfg) == pytest.approx(1 / RHO)
        assert oma_threshold(Role.STRONG_J, Regime.BETWEEN, self.qos, self.cfg) == pytest.approx(63 / RHO)


class TestConditional:
    @pytest.mark.parametrize("strategy", ALL_STRATEGIES)
    def test_trivial_thresholds(self, strategy):
        reg = REGIME_OF[strategy]
        assert conditional_outage(strategy, Role.STRONG_J, reg, SCN, threshold=0.0) == 0.0
        assert conditional_outage(strategy, Role.STRONG_J, reg, SCN, threshold=math.inf) == 1.0

    def test_regime_mismatch(self):
        with pytest.raises(RegimeError):
            conditional_outage("angle", Role.STRONG_J, ExactK(30), SCN)
        with pytest.raises(RegimeError):
            conditional_outage("fejer", Role.STRONG_J, Regime.AT_LEAST_I, SCN)

    @pytest.mark.parametrize("strategy", ALL_STRATEGIES)
    def test_monotone_in_threshold(self, strategy):
        reg = REGIME_OF[strategy]
        vals = [conditional_outage(strategy, Role.STRONG_J, reg, SCN, threshold=t) for t in (1e-5, 1e-4, 1e-3, 1e-2)]
        assert all(b >= a - 1e-12 for a, b in zip(vals, vals[1:]))

    @pytest.mark.parametrize("strategy", ALL_STRATEGIES)
    def test_monotone_in_altitude_and_exponent(self, strategy):
        reg = REGIME_OF[strategy]

        def at(**kw):
            return conditional_outage(strategy, Role.STRONG_J, reg, replace(SCN, radio=RadioConfig(**kw)))

        hs = [at(altitude=h) for h in (10, 60, 110, 150)]
        assert all(b >= a - 1e-12 for a, b in zip(hs, hs[1:]))
        assert at(gamma=2.2) >= at(gamma=2.0) - 1e-12

    @pytest.mark.parametrize("strategy", ALL_STRATEGIES)
    def test_weak_rank_worse_at_equal_threshold(self, strategy):
        reg = REGIME_OF[strategy]
        t = 2e-4
        p_i = conditional_outage(strategy, Role.WEAK_I, reg, SCN, threshold=t)
        p_j = conditional_outage(strategy, Role.STRONG_J, reg, SCN, threshold=t)
        assert p_i >= p_j

    def test_full_csi_is_ordered_gain_cdf(self):
        t = 7.9689e-4
        F = unordered_gain_cdf(t, SCN.region, SCN.radio)
        got = conditional_outage("fullcsi", Role.STRONG_J, ExactK(121), SCN, threshold=t)
        assert got == pytest.approx(betainc(102, 20, F), rel=1e-12)

    @pytest.mark.parametrize("k,count", [(20, 30), (20, 121), (25, 140), (1, 1)])
    def test_fejer_fixed_rule_matches_adaptive(self, k, count):
        part = build_fejer_partition(100, SCN.region.delta)
        eta = 7.9689e-4
        edges = sorted({0.0, *part.piece_values, 1.0, 10.0, 30.0, 60.0, 90.0, 100.0})

        def f(u):
            return ordered_fejer_pdf(u, k, count, part) * radial_outage(eta, u, SCN.region, SCN.radio)

        ref = sum(spi.quad(f, a, b, limit=400, epsabs=1e-13)[0] for a, b in zip(edges[:-1], edges[1:]))
        got = fejer_outage_given_counts(eta, k, [count], SCN)[0]
        assert got == pytest.approx(ref, abs=1e-8)

    @pytest.mark.parametrize("regime", [Regime.BETWEEN, Regime.AT_LEAST_I])
    def test_angle_against_direct_double_integral(self, regime):
        region, cfg, pair = SCN.region, SCN.radio, SCN.pair
        mu, half = mean_count(region), region.half_angle
        lo, hi = (pair.j, pair.i - 1) if regime is Regime.BETWEEN else (pair.i, 400)
        eta = 63 / RHO

        def inner(theta):
            f = lambda r: (2 * r / region.ring) * -math.expm1(  # noqa: E731
                -eta * path_loss(r, cfg.altitude, 2) / max(fejer_kernel(100, theta), 1e-300)
            )
            return spi.quad(f, region.l1, region.l2, epsabs=1e-13)[0]

        def outer(theta):
            return poisson_mixture_order_pdf(theta / half, 20, lo, hi, mu)[0] / half * inner(theta)

        ref = spi.quad(outer, 0, half, points=[0.02, 0.0286, 0.04], limit=400, epsabs=1e-11)[0]
        got = conditional_outage("angle", Role.STRONG_J, regime, SCN, threshold=eta)
        assert got == pytest.approx(ref, abs=1e-7)

    def test_distance_against_direct_double_integral(self):
        region, cfg, pair = SCN.region, SCN.radio, SCN.pair
        mu, half = mean_count(region), region.half_angle
        eta = 252 / RHO

        def theta_avg(r):
            c = eta * path_loss(r, cfg.altitude, 2)
            g = lambda t: -math.expm1(-c / max(fejer_kernel(100, t), 1e-300))  # noqa: E731
            return spi.quad(g, 0, half, points=[0.02, 0.0286, 0.04], limit=400, epsabs=1e-13)[0] / half

        def outer(r):
            x = (r * r - region.l1**2) / region.ring
            dens = poisson_mixture_order_pdf(x, 20, pair.i, 400, mu)[0] * 2 * r / region.ring
            return dens * theta_avg(r)

        ref = spi.quad(outer, region.l1, region.l2, limit=200, epsabs=1e-11)[0]
        got = conditional_outage("distance", Role.STRONG_J, Regime.AT_LEAST_I, SCN, threshold=eta)
        assert got == pytest.approx(ref, abs=1e-7)


class TestUnconditional:
    @pytest.mark.parametrize("strategy", ["distance", "angle"])
    def test_regime_combination(self, strategy):
        mu = SCN.mu
        p2 = regime_probability(Regime.BETWEEN, SCN.pair, mu)
        p3 = regime_probability(Regime.AT_LEAST_I, SCN.pair, mu)
        c_i = conditional_outage(strategy, Role.WEAK_I, Regime.AT_LEAST_I, SCN)
        c_j2 = conditional_outage(strategy, Role.STRONG_J, Regime.BETWEEN, SCN)
        c_j3 = conditional_outage(strategy, Role.STRONG_J, Regime.AT_LEAST_I, SCN)
        assert unconditional_outage(strategy, Role.WEAK_I, SCN) == pytest.approx(1 - p3 * (1 - c_i), abs=1e-12)
        assert unconditional_outage(strategy, Role.STRONG_J, SCN) == pytest.approx(
            1 - p2 * (1 - c_j2) - p3 * (1 - c_j3), abs=1e-12
        )

    def test_large_population_limit(self):
        assert unconditional_outage("angle", Role.WEAK_I, SCN) == pytest.approx(
            conditional_outage("angle", Role.WEAK_I, Regime.AT_LEAST_I, SCN), abs=1e-12
        )

    @pytest.mark.parametrize("strategy", ALL_STRATEGIES)
    def test_empty_region_limit(self, strategy):
        tiny = replace(SCN, region=UserRegion(delta=1e-4))
        assert unconditional_outage(strategy, Role.WEAK_I, tiny) == pytest.approx(1.0, abs=1e-12)
        assert unconditional_outage(strategy, Role.STRONG_J, tiny) == pytest.approx(1.0, abs=1e-12)


class TestRates:
    @pytest.mark.parametrize("strategy", ALL_STRATEGIES)
    def test_bounds_and_report(self, strategy):
        rep = analyze(strategy, SCN)
        assert 0 <= rep.oma_rate <= rep.noma_rate <= SCN.qos.total
        assert 0 <= rep.p_out_i <= 1 and 0 <= rep.p_out_j <= 1
        assert rep.noma_rate == pytest.approx(noma_sum_rate(strategy, SCN))
        assert rep.oma_rate == pytest.approx(oma_sum_rate(strategy, SCN))

    @pytest.mark.parametrize("strategy", ALL_STRATEGIES)
    def test_no_outage_limit(self, strategy):
        loud = replace(SCN, radio=RadioConfig(p_tx=dbm_to_watt(150.0)))
        assert noma_sum_rate(strategy, loud) == pytest.approx(6.5, abs=1e-6)
        assert oma_sum_rate(strategy, loud) == pytest.approx(6.5, abs=1e-6)

    @pytest.mark.parametrize("strategy", ALL_STRATEGIES)
    def test_certain_outage_limit(self, strategy):
        quiet = replace(SCN, radio=RadioConfig(p_tx=dbm_to_watt(-150.0)))
        assert noma_sum_rate(strategy, quiet) == pytest.approx(0.0, abs=1e-9)

    def test_infeasible_split_zero_noma_rate(self):
        scn = replace(SCN, qos=QosTargets(rate_j=6, rate_i=2.0), powers=NomaPower(0.4, 0.6))
        rep = analyze("angle", scn)
        assert rep.p_out_i_given_present == 1.0
        assert rep.noma_rate == pytest.approx(0.0, abs=1e-9)

    def test_single_user_regime_dominates_small_population(self):
        scn = replace(SCN, region=UserRegion(delta=math.radians(0.8)))
        assert scn.mu < 20
        rep = analyze("distance", scn)
        assert rep.noma_rate <= SCN.qos.total
        assert rep.p_out_i > 0.5

    def test_angle_and_kernel_agree_on_main_lobe_ranks(self):
        a = noma_sum_rate("angle", SCN)
        f = noma_sum_rate("fejer", SCN)
        assert abs(a - f) / f < 1e-4
