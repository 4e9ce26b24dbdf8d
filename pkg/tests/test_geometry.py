import math

import numpy as np
import pytest
from scipy import stats

from noma_airlink.errors import DomainError
from noma_airlink.geometry import (
    UserRegion,
    distance_cdf,
    mean_count,
    sample_count,
    sample_population,
    sample_positions,
    sample_user,
)


def test_mean_count_defaults(region):
    # (L2^2 - L1^2) * (delta / 2) * lambda with delta = 5 degrees in radians
    assert mean_count(region) == pytest.approx(2775 * math.radians(5) / 2, rel=1e-14)
    assert mean_count(region) == pytest.approx(121.08, abs=5e-3)


def test_mean_count_linear_in_angle(region):
    wide = UserRegion(delta=2 * region.delta)
    assert mean_count(wide) == pytest.approx(2 * mean_count(region), rel=1e-14)


def test_mean_count_vanishes_with_area():
    assert mean_count(UserRegion(l1=100 - 1e-9, l2=100)) < 1e-6


@pytest.mark.parametrize("kw", [dict(l1=100, l2=85), dict(delta=0.0), dict(delta=4.0), dict(lam=0.0)])
def test_region_validation(kw):
    with pytest.raises(DomainError):
        UserRegion(**kw)


def test_sample_count_moments(region):
    rng = np.random.default_rng(3)
    mu = mean_count(region)
    draws = np.array([sample_count(region, rng) for _ in range(20000)])
    big = np.random.default_rng(4).poisson(mu, 10**6)
    assert abs(big.mean() - mu) < 3 * math.sqrt(mu / 1e6) + 1e-12
    assert big.var() == pytest.approx(mu, rel=0.05)
    assert abs(draws.mean() - mu) < 4 * math.sqrt(mu / draws.size)


def test_sample_count_reproducible(region):
    a = [sample_count(region, np.random.default_rng(9)) for _ in range(3)]
    b = [sample_count(region, np.random.default_rng(9)) for _ in range(3)]
    assert a == b


def test_distance_law_matches_cdf(region):
    d, a, f = sample_positions(region, np.random.default_rng(5), 10**5)
    ks = stats.kstest(d, lambda r: distance_cdf(r, region)).statistic
    assert ks < 0.005
    assert abs(a.mean()) < 3 * region.half_angle / math.sqrt(3 * a.size)
    assert np.all((d >= region.l1) & (d <= region.l2))
    assert np.all(np.abs(a) <= region.half_angle)
    assert f.mean() == pytest.approx(1.0, abs=0.02)


def test_distance_angle_independent(region):
    d, a, _ = sample_positions(region, np.random.default_rng(6), 10**6)
    assert abs(np.corrcoef(d, np.abs(a))[0, 1]) < 0.01
    # 2-D chi-square on a 5 x 5 grid of (distance quantile, |angle| quantile)
    qd = np.minimum((distance_cdf(d, region) * 5).astype(int), 4)
    qa = np.minimum((np.abs(a) / region.half_angle * 5).astype(int), 4)
    table = np.zeros((5, 5))
    np.add.at(table, (qd, qa), 1)
    p = stats.chi2_contingency(table)[1]
    assert p > 1e-3


def test_sample_user_and_population(region):
    u = sample_user(region, np.random.default_rng(1))
    assert region.l1 <= u.distance <= region.l2
    pop = sample_population(region, np.random.default_rng(2))
    assert len(pop) > 50
