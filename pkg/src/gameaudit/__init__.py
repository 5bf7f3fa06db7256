"""Behavioral-audit harness for repeated economic games.

Two seedable game environments (a 60-round seller auction with reserve
prices and a 30-round newsvendor ordering game), a set of agents (trace
replay, heuristics, remote chat models), three prompt-intervention levels,
and the fidelity metrics used to compare agent behavior against human
traces. A FastAPI service wraps the experiment orchestrator; the CLI is a
thin client for it.
"""

__version__ = "0.1.0"

from gameaudit.auction import (
    AuctionSessionConfig,
    ValuationDistribution,
    optimal_reserve,
    resolve_auction_round,
    run_auction_session,
    sample_valuation,
)
from gameaudit.newsvendor import (
    NewsvendorSessionConfig,
    optimal_quantity,
    resolve_newsvendor_round,
    run_newsvendor_session,
)
from gameaudit.records import AuctionRound, NewsvendorRound, SessionTranscript

__all__ = [
    "AuctionRound",
    "AuctionSessionConfig",
    "NewsvendorRound",
    "NewsvendorSessionConfig",
    "SessionTranscript",
    "ValuationDistribution",
    "optimal_quantity",
    "optimal_reserve",
    "resolve_auction_round",
    "resolve_newsvendor_round",
    "run_auction_session",
    "run_newsvendor_session",
    "sample_valuation",
]
