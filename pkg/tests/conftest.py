"""Shared fixtures and independent oracles used across the suite."""

from __future__ import annotations

import numpy as np
import pytest

from gameaudit.records import AgentProfile, AuctionRound, NewsvendorRound, SessionTranscript


def clock_auction(reserve: int, valuations) -> tuple[bool, int]:
    """Independent profit oracle: a literal ascending-clock auction.

    Buyers whose maximum is below the reserve never enter. The price starts
    at the reserve and climbs one unit at a time while at least two buyers
    are willing to go higher; the last price reached is what the winner pays.
    """
    entered = [v for v in valuations if v >= reserve]
    if not entered:
        return False, 0
    price = reserve
    while sum(1 for v in entered if v > price) > 1:
        price += 1
    return True, price


def expected_profit_exact(q: int, price: float, cost: float) -> float:
    """Exact expected newsvendor profit under uniform integer demand 0..300,
    by full enumeration of the 301 demand outcomes."""
    total = 0.0
    for d in range(301):
        total += price * min(q, d) - cost * q
    return total / 301.0


def make_auction_transcript(
    actions,
    schedule,
    agent_id="a00",
    profile_index=0,
    source="test",
    distribution="cube_root",
    first_round=1,
) -> SessionTranscript:
    """Hand-build a transcript from actions and an (n, valuations) schedule
    using only the closed-form profit rule (kept local to the tests)."""
    t = SessionTranscript(
        task="auction",
        agent_id=agent_id,
        seed=0,
        config_hash="test",
        profile_index=profile_index,
        source=source,
        distribution=distribution,
        first_round=first_round,
        complete=True,
    )
    for i, (action, (n, vals)) in enumerate(zip(actions, schedule)):
        b1 = vals[0]
        b2 = vals[1] if len(vals) > 1 else 0
        sale = b1 >= action
        profit = (b2 if b2 >= action else action) if sale else 0
        t.rounds.append(
            AuctionRound(
                round_index=first_round + i,
                num_bidders=n,
                valuations=list(vals),
                reserve=action,
                sale=sale,
                profit=profit,
            )
        )
    return t


def make_newsvendor_transcript(
    orders, demands, price_cost, agent_id="a00", profile_index=0, source="test", first_round=1
) -> SessionTranscript:
    t = SessionTranscript(
        task="newsvendor",
        agent_id=agent_id,
        seed=0,
        config_hash="test",
        profile_index=profile_index,
        source=source,
        first_round=first_round,
        complete=True,
    )
    for i, (q, d, (p, c)) in enumerate(zip(orders, demands, price_cost)):
        q_star = round(300 * (p - c) / p)
        t.rounds.append(
            NewsvendorRound(
                round_index=first_round + i,
                price=p,
                cost=c,
                order=q,
                demand=d,
                profit=p * min(q, d) - c * q,
                q_star=q_star,
                bias=q - q_star,
            )
        )
    return t


def golden_auction_trace() -> SessionTranscript:
    """Fixed 60-round participant trace used by the prompt golden files."""
    actions, schedule = [], []
    for t in range(1, 61):
        n = (1, 4, 7, 10)[(t - 1) % 4]
        vals = sorted(((7 * t + 13 * j) % 101 for j in range(n)), reverse=True)
        schedule.append((n, vals))
        actions.append((3 * t) % 101)
    return make_auction_transcript(actions, schedule, agent_id="human00", source="human")


def golden_newsvendor_trace() -> SessionTranscript:
    from gameaudit.newsvendor import DEFAULT_PRICE_COST_SCHEDULE

    orders = [(11 * t) % 301 for t in range(1, 31)]
    demands = [(37 * t) % 301 for t in range(1, 31)]
    return make_newsvendor_transcript(
        orders, demands, list(DEFAULT_PRICE_COST_SCHEDULE), agent_id="human00", source="human"
    )


@pytest.fixture
def profile() -> AgentProfile:
    return AgentProfile(age=23, gender="female", race="Asian", program="Economics")


@pytest.fixture
def small_schedule():
    """Four fixed auction rounds covering sale, reserve-bound sale, no sale,
    and a lone buyer."""
    return [
        (4, [67, 32, 16, 4]),
        (2, [60, 30]),
        (2, [55, 40]),
        (1, [50]),
    ]


def rng(seed=0):
    return np.random.default_rng(seed)
