"""Newsvendor environment: fractile optimum, profit identity, sessions."""

from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import expected_profit_exact
from gameaudit.agents import ConstantActionAgent, DemandChasingAgent, OracleAgent, ReplayAgent
from gameaudit.errors import DomainError, ValidationError
from gameaudit.newsvendor import (
    DEFAULT_PRICE_COST_SCHEDULE,
    NewsvendorSessionConfig,
    optimal_quantity,
    resolve_newsvendor_round,
    run_newsvendor_session,
    sample_demand,
)


class TestOptimalQuantity:
    def test_half_margin(self):
        assert optimal_quantity(10, 5) == 150

    def test_high_margin(self):
        assert optimal_quantity(10, 2.5) == 225

    def test_vanishing_margin(self):
        assert optimal_quantity(10, 9.999) == 0

    def test_domain_errors(self):
        for p, c in ((10, 10), (10, 11), (0, -1), (-5, -6), (10, 0)):
            with pytest.raises(DomainError):
                optimal_quantity(p, c)

    def test_matches_exact_expected_profit_argmax(self):
        gen = np.random.default_rng(17)
        for _ in range(20):
            p = float(gen.uniform(2, 20))
            c = float(gen.uniform(0.1, 0.9)) * p
            exact = max(range(301), key=lambda q: expected_profit_exact(q, p, c))
            assert abs(exact - optimal_quantity(p, c)) <= 2


class TestResolveRound:
    def test_examples(self):
        assert resolve_newsvendor_round(0, 200, 10, 4) == 0
        assert resolve_newsvendor_round(100, 150, 10, 4) == 600
        assert resolve_newsvendor_round(100, 50, 10, 4) == 100

    def test_negative_profit_allowed(self):
        assert resolve_newsvendor_round(300, 0, 10, 4) == -1200

    def test_validation(self):
        with pytest.raises(ValidationError):
            resolve_newsvendor_round(301, 10, 10, 4)
        with pytest.raises(ValidationError):
            resolve_newsvendor_round(10, 301, 10, 4)
        with pytest.raises(DomainError):
            resolve_newsvendor_round(10, 10, 4, 10)

    def test_profit_identity_on_grid(self):
        # full identity check on a coarse lattice at several price points
        for p, c in ((10.0, 4.0), (6.0, 4.5), (15.0, 3.75)):
            for q in range(0, 301, 7):
                for d in range(0, 301, 11):
                    assert resolve_newsvendor_round(q, d, p, c) == p * min(q, d) - c * q


class TestDemand:
    def test_schedule_passthrough(self):
        cfg = NewsvendorSessionConfig(
            total_rounds=3,
            price_cost_schedule=[(10, 4)] * 3,
            demand_schedule=[100, 200, 150],
        )
        assert sample_demand(cfg, 3) == 150

    def test_moments_and_support(self):
        cfg = NewsvendorSessionConfig(
            total_rounds=100_000, price_cost_schedule=[(10, 4)] * 100_000, rng_seed=2
        )
        draws = np.array([sample_demand(cfg, t) for t in range(1, 100_001)])
        assert draws.min() >= 0 and draws.max() <= 300
        assert abs(draws.mean() - 150.0) < 1.5

    def test_round_keyed(self):
        cfg = NewsvendorSessionConfig(rng_seed=8)
        want = sample_demand(cfg, 21)
        sample_demand(cfg, 1)
        assert sample_demand(cfg, 21) == want

    def test_out_of_range(self):
        cfg = NewsvendorSessionConfig()
        with pytest.raises(DomainError):
            sample_demand(cfg, 0)


class TestDefaultSchedule:
    def test_shape_and_margins(self):
        assert len(DEFAULT_PRICE_COST_SCHEDULE) == 30
        fractiles = [(p - c) / p for p, c in DEFAULT_PRICE_COST_SCHEDULE]
        assert any(f < 0.5 for f in fractiles)
        assert any(f > 0.5 for f in fractiles)
        assert all(0 < c < p for p, c in DEFAULT_PRICE_COST_SCHEDULE)

    def test_fractile_matches_bruteforce_on_every_pair(self):
        for p, c in set(DEFAULT_PRICE_COST_SCHEDULE):
            exact = max(range(301), key=lambda q: expected_profit_exact(q, p, c))
            assert abs(exact - optimal_quantity(p, c)) <= 2, (p, c)


class TestRunSession:
    def test_oracle_has_zero_bias(self):
        cfg = NewsvendorSessionConfig(rng_seed=4)
        t = run_newsvendor_session(cfg, OracleAgent())
        assert t.complete and len(t.rounds) == 30
        assert all(r.bias == 0 for r in t.rounds)

    def test_overorder_negative_margin_expectation(self):
        # q=300 at p=10, c=9: E profit = 10*150 - 9*300 = -1200 per round
        n = 4000
        cfg = NewsvendorSessionConfig(
            total_rounds=n, price_cost_schedule=[(10.0, 9.0)] * n, rng_seed=6
        )
        t = run_newsvendor_session(cfg, ConstantActionAgent(300))
        mean_profit = float(np.mean(t.profits))
        # MC tolerance: sd of profit is ~10*sd(D)=866, se ~ 13.7
        assert abs(mean_profit - (-1200.0)) < 60

    def test_replay_identity(self):
        cfg = NewsvendorSessionConfig(rng_seed=5)
        trace = list(range(10, 310, 10))
        t = run_newsvendor_session(cfg, ReplayAgent(trace))
        assert t.actions == trace

    def test_demand_chasing(self):
        cfg = NewsvendorSessionConfig(rng_seed=9)
        t = run_newsvendor_session(cfg, DemandChasingAgent())
        p0, c0 = cfg.price_cost_schedule[0]
        assert t.rounds[0].order == optimal_quantity(p0, c0)
        for prev, cur in zip(t.rounds, t.rounds[1:]):
            assert cur.order == prev.demand

    def test_determinism(self):
        cfg = NewsvendorSessionConfig(rng_seed=12)
        a = run_newsvendor_session(cfg, DemandChasingAgent())
        b = run_newsvendor_session(cfg, DemandChasingAgent())
        assert a == b

    def test_schedule_validation(self):
        with pytest.raises(ValidationError):
            NewsvendorSessionConfig(total_rounds=2, price_cost_schedule=[(10, 4)])
        with pytest.raises(ValidationError):
            NewsvendorSessionConfig(total_rounds=1, price_cost_schedule=[(4, 10)])


@given(
    st.integers(min_value=0, max_value=300),
    st.integers(min_value=0, max_value=300),
)
@settings(max_examples=200)
def test_profit_identity_property(q, d):
    p, c = 12.0, 3.0
    assert resolve_newsvendor_round(q, d, p, c) == p * min(q, d) - c * q
