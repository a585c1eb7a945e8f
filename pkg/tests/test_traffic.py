"""Traffic sampling distributions, determinism, and serialization."""

from __future__ import annotations

import math

import numpy as np
import pytest

from stochrwa.traffic import (
    DemandMatrix,
    ScenarioSample,
    TrafficParams,
    ceil_exponential_mean,
    make_rng,
    sample_batch,
    sample_holding,
    sample_requests,
    sample_scenarios,
)


def test_params_validation():
    with pytest.raises(ValueError):
        TrafficParams(0.0, 1.0)
    with pytest.raises(ValueError):
        TrafficParams(1.0, -2.0)
    assert TrafficParams(4.0, 0.25).mean_holding_stages == 4.0


def test_batch_mean_matches_arrival_rate():
    params = TrafficParams(arrival_rate=7.0, holding_rate=1.0)
    rng = make_rng(42)
    draws = 100_000
    totals = np.array([sample_batch(params, 6, rng).total for _ in range(draws)])
    # Poisson: sigma^2 = lambda; sample mean within 3 sigma of the rate.
    tol = 3.0 * math.sqrt(7.0 / draws)
    assert abs(totals.mean() - 7.0) < tol


def test_tiny_rate_gives_empty_matrix():
    params = TrafficParams(arrival_rate=1e-4, holding_rate=1.0)
    matrix = sample_batch(params, 5, make_rng(1))
    assert matrix.total == 0
    assert not matrix


def test_fixed_seed_reproduces_batches():
    params = TrafficParams(5.0, 0.5)
    a = sample_batch(params, 8, make_rng(7, 3))
    b = sample_batch(params, 8, make_rng(7, 3))
    assert a == b
    ra = sample_requests(params, 8, make_rng(9, 1))
    rb = sample_requests(params, 8, make_rng(9, 1))
    assert ra == rb


def test_pair_marginal_uniformity():
    """Each ordered pair's frequency within 5 sigma of 1/(n(n-1))."""
    n = 5
    params = TrafficParams(arrival_rate=10_000.0, holding_rate=1.0)
    rng = make_rng(11)
    counts: dict = {}
    total = 0
    for _ in range(100):
        for pair, c in sample_batch(params, n, rng).counts:
            counts[pair] = counts.get(pair, 0) + c
            total += c
    assert total > 900_000
    p = 1.0 / (n * (n - 1))
    sigma = math.sqrt(total * p * (1 - p))
    for s in range(n):
        for d in range(n):
            if s == d:
                continue
            assert abs(counts.get((s, d), 0) - total * p) < 5 * sigma


def test_holding_always_at_least_one_stage():
    params = TrafficParams(1.0, holding_rate=5.0)  # short holds
    rng = make_rng(3)
    draws = [sample_holding(params, rng) for _ in range(2000)]
    assert min(draws) >= 1


def test_holding_mean_matches_ceiled_exponential():
    rate = 1.0 / 26.0
    params = TrafficParams(1.0, rate)
    rng = make_rng(4)
    draws = np.array([sample_holding(params, rng) for _ in range(200_000)])
    expected = ceil_exponential_mean(rate)
    # Var(ceil(Exp)) <= Var(Exp) + 1; 4-sigma band on the sample mean.
    sigma = math.sqrt((1 / rate**2 + 1) / len(draws))
    assert abs(draws.mean() - expected) < 4 * sigma
    assert expected == pytest.approx(26.5, abs=0.52)  # rounding adds ~half a stage


def test_holding_deterministic():
    params = TrafficParams(1.0, 0.1)
    assert sample_holding(params, make_rng(5)) == sample_holding(params, make_rng(5))


def test_scenario_counts_and_independence():
    params = TrafficParams(6.0, 0.2)
    sample = sample_scenarios(params, 7, 50, make_rng(12), seed=12)
    assert len(sample) == 50
    other = sample_scenarios(params, 7, 50, make_rng(13), seed=13)
    assert sample.scenarios != other.scenarios  # overwhelming probability
    single = sample_scenarios(params, 7, 1, make_rng(12))
    assert len(single) == 1
    with pytest.raises(ValueError):
        sample_scenarios(params, 7, 0, make_rng(1))


def test_scenario_json_roundtrip():
    params = TrafficParams(4.0, 0.3)
    sample = sample_scenarios(params, 6, 9, make_rng(21), seed=21)
    text = sample.to_json()
    back = ScenarioSample.from_json(text)
    assert back == sample
    assert back.to_json() == text  # bit-exact on re-serialization


def test_demand_matrix_validation():
    with pytest.raises(ValueError):
        DemandMatrix.from_mapping({(1, 1): 2})
    with pytest.raises(ValueError):
        DemandMatrix.from_mapping({(0, 1): -1})
    m = DemandMatrix.from_mapping({(0, 1): 2, (1, 0): 0})
    assert m.pairs == ((0, 1),)
    assert m.count((0, 1)) == 2
    assert m.count((1, 0)) == 0
    assert m.total == 2


def test_requests_carry_holding_times():
    params = TrafficParams(20.0, 0.5)
    requests = sample_requests(params, 4, make_rng(31))
    assert all(hold >= 1 for _pair, hold in requests)
    assert all(s != d for (s, d), _ in requests)
