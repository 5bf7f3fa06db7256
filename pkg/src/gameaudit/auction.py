"""Second-price auction environment.

Sellers set a reserve price each round; simulated buyers hold integer
valuations in [0, 100] drawn from one of two skewed distributions. The
item sells when the highest valuation meets the reserve, and the seller
earns max(reserve, second-highest valuation) on a sale. All sampling is
keyed by (seed, round) so any round can be regenerated independently.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Protocol, Sequence

import numpy as np

from gameaudit import rng as rng_mod
from gameaudit.errors import AgentError, DomainError, ValidationError
from gameaudit.records import (
    AUCTION,
    RESERVE_RANGE,
    AuctionRound,
    Observation,
    SessionTranscript,
    clamp_action,
    hash_obj,
)

BIDDER_COUNTS = (1, 4, 7, 10)
DEFAULT_ROUNDS = 60


class ValuationDistribution(str, Enum):
    """Buyer-valuation law on integer support [0, 100].

    CUBE_ROOT: CDF (v/100)^(1/3), left-skewed, mean 25, SD 28.4.
    CUBE:      CDF (v/100)^3, right-skewed, mean 75, SD 19.4.
    """

    CUBE_ROOT = "cube_root"
    CUBE = "cube"

    def inverse_cdf(self, u: float) -> float:
        if self is ValuationDistribution.CUBE_ROOT:
            return 100.0 * u**3
        return 100.0 * u ** (1.0 / 3.0)


def sample_valuation(dist: ValuationDistribution, u: float) -> int:
    """Integer valuation for uniform draw u, rounded half-to-even."""
    if not 0.0 <= u <= 1.0:
        raise DomainError(f"u must be in [0, 1], got {u}")
    return int(round(dist.inverse_cdf(u)))


def _valuations_vectorized(dist: ValuationDistribution, u: np.ndarray) -> np.ndarray:
    if dist is ValuationDistribution.CUBE_ROOT:
        v = 100.0 * u**3
    else:
        v = 100.0 * np.cbrt(u)
    return np.round(v).astype(np.int64)


@dataclass
class AuctionSessionConfig:
    """Configuration for one seller session.

    When bidder_schedule is given it fully replaces sampling, which is how
    replays and matched-environment comparisons pin the same buyers on
    every agent.
    """

    total_rounds: int = DEFAULT_ROUNDS
    distribution: ValuationDistribution = ValuationDistribution.CUBE_ROOT
    rng_seed: int = 0
    bidder_schedule: list[tuple[int, list[int]]] | None = None
    first_round: int = 1  # >1 when resuming a window of a longer game

    def __post_init__(self) -> None:
        if isinstance(self.distribution, str):
            self.distribution = ValuationDistribution(self.distribution)
        if self.total_rounds < 1:
            raise ValidationError("total_rounds must be >= 1")
        if self.bidder_schedule is not None:
            if len(self.bidder_schedule) != self.total_rounds:
                raise ValidationError(
                    f"bidder_schedule has {len(self.bidder_schedule)} entries, expected {self.total_rounds}"
                )
            for i, (n, vals) in enumerate(self.bidder_schedule, start=1):
                if n != len(vals):
                    raise ValidationError(f"schedule round {i}: num_bidders != len(valuations)")
                _check_valuations(vals)


def _check_valuations(valuations: Sequence[int]) -> None:
    if len(valuations) == 0:
        raise ValidationError("valuations must be nonempty")
    if any(not (0 <= v <= 100) for v in valuations):
        raise ValidationError("valuations must lie in [0, 100]")
    if list(valuations) != sorted(valuations, reverse=True):
        raise ValidationError("valuations must be sorted descending")


def sample_round_environment(cfg: AuctionSessionConfig, t: int) -> tuple[int, list[int]]:
    """Buyer count and descending valuations for round t (1-based)."""
    if not 1 <= t <= cfg.total_rounds:
        raise DomainError(f"round {t} outside [1, {cfg.total_rounds}]")
    if cfg.bidder_schedule is not None:
        n, vals = cfg.bidder_schedule[t - 1]
        return n, list(vals)
    gen = rng_mod.stream(cfg.rng_seed, "auction-env", t)
    n = int(gen.choice(BIDDER_COUNTS))
    vals = sorted((sample_valuation(cfg.distribution, float(u)) for u in gen.random(n)), reverse=True)
    return n, vals


def resolve_auction_round(reserve: int, valuations: Sequence[int]) -> tuple[bool, int]:
    """Sale indicator and seller profit for one round.

    The second-highest valuation is taken as 0 when only one buyer showed
    up, which collapses to the profit-equals-reserve case.
    """
    if not RESERVE_RANGE[0] <= reserve <= RESERVE_RANGE[1]:
        raise ValidationError(f"reserve {reserve} outside [0, 100]")
    _check_valuations(valuations)
    b1 = valuations[0]
    b2 = valuations[1] if len(valuations) > 1 else 0
    if b1 < reserve:
        return False, 0
    return True, (b2 if b2 >= reserve else reserve)


def profit_curve_from_samples(
    b1: np.ndarray, b2: np.ndarray, grid: Sequence[int]
) -> list[tuple[int, float]]:
    """Mean per-round profit at each candidate reserve, common samples."""
    b1 = np.asarray(b1, dtype=np.float64)
    b2 = np.asarray(b2, dtype=np.float64)
    curve = []
    for r in grid:
        profit = np.where(b1 >= r, np.maximum(float(r), b2), 0.0)
        curve.append((int(r), float(profit.mean())))
    return curve


def sample_top_two(
    dist: ValuationDistribution,
    num_samples: int,
    seed: int = 0,
    bidder_counts: Sequence[int] = BIDDER_COUNTS,
) -> tuple[np.ndarray, np.ndarray]:
    """Highest and second-highest valuations for num_samples simulated
    rounds over the uniform bidder-count mix. Second is 0 for lone buyers."""
    gen = rng_mod.stream(seed, "reserve-oracle")
    counts = gen.choice(np.asarray(bidder_counts), size=num_samples)
    b1 = np.zeros(num_samples)
    b2 = np.zeros(num_samples)
    for c in sorted(set(int(x) for x in counts)):
        idx = np.flatnonzero(counts == c)
        vals = np.sort(_valuations_vectorized(dist, gen.random((idx.size, c))), axis=1)
        b1[idx] = vals[:, -1]
        if c > 1:
            b2[idx] = vals[:, -2]
    return b1, b2


def optimal_reserve(
    dist: ValuationDistribution,
    num_samples: int = 200_000,
    grid_step: int = 1,
    seed: int = 0,
    bidder_counts: Sequence[int] = BIDDER_COUNTS,
) -> tuple[int, list[tuple[int, float]]]:
    """Monte-Carlo expected-profit grid search over reserve candidates.

    Returns the argmax reserve (first of any ties) and the whole curve.
    """
    if num_samples < 10_000:
        raise DomainError("num_samples must be >= 10,000")
    if grid_step < 1:
        raise DomainError("grid_step must be >= 1")
    b1, b2 = sample_top_two(dist, num_samples, seed=seed, bidder_counts=bidder_counts)
    grid = list(range(RESERVE_RANGE[0], RESERVE_RANGE[1] + 1, grid_step))
    curve = profit_curve_from_samples(b1, b2, grid)
    r_star = curve[int(np.argmax([profit for _, profit in curve]))][0]
    return r_star, curve


class DecisionAgent(Protocol):
    def decide(self, obs: Observation) -> int: ...


def run_auction_session(
    cfg: AuctionSessionConfig,
    agent: DecisionAgent,
    agent_id: str = "agent",
    resume_from: SessionTranscript | None = None,
) -> SessionTranscript:
    """Play every round through the agent and return the transcript.

    Out-of-range decisions are clamped and flagged so sessions always
    finish; an agent that raises AgentError leaves a failed transcript
    with the completed prefix retained. resume_from re-plays nothing:
    its rounds become history and only the remainder is decided.
    """
    env_entries = [sample_round_environment(cfg, t) for t in range(1, cfg.total_rounds + 1)]
    transcript = SessionTranscript(
        task=AUCTION,
        agent_id=agent_id,
        seed=cfg.rng_seed,
        config_hash=hash_obj(
            {
                "task": AUCTION,
                "total_rounds": cfg.total_rounds,
                "distribution": cfg.distribution.value,
                "rng_seed": cfg.rng_seed,
                "scheduled": cfg.bidder_schedule is not None,
            }
        ),
        distribution=cfg.distribution.value,
        schedule_hash=hash_obj(env_entries),
        first_round=cfg.first_round,
    )
    start = 0
    if resume_from is not None:
        transcript.rounds = list(resume_from.rounds)
        start = len(transcript.rounds)
    for t in range(start + 1, cfg.total_rounds + 1):
        n, vals = env_entries[t - 1]
        obs = Observation(
            task=AUCTION,
            round_index=cfg.first_round + t - 1,
            total_rounds=cfg.first_round + cfg.total_rounds - 1,
            num_bidders=n,
            distribution=cfg.distribution.value,
            history=tuple(transcript.rounds),
        )
        try:
            raw = agent.decide(obs)
        except AgentError as exc:
            transcript.failed = True
            transcript.failure_reason = f"{type(exc).__name__}: {exc}"
            return transcript
        action, flags = clamp_action(raw, RESERVE_RANGE)
        flags = sorted(set(flags) | set(getattr(agent, "last_flags", ())))
        sale, profit = resolve_auction_round(action, vals)
        transcript.rounds.append(
            AuctionRound(
                round_index=cfg.first_round + t - 1,
                num_bidders=n,
                valuations=vals,
                reserve=action,
                sale=sale,
                profit=profit,
                flags=flags,
            )
        )
    transcript.complete = True
    return transcript
