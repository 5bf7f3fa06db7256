"""Newsvendor ordering environment.

The vendor picks an order quantity before demand is revealed; demand is
uniform on the integers 0..300 and unit price/cost change by round. The
critical-fractile rule gives the per-round optimum, and every round
record carries the signed gap between the chosen order and that optimum.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

from gameaudit import rng as rng_mod
from gameaudit.errors import AgentError, DomainError, ValidationError
from gameaudit.records import (
    NEWSVENDOR,
    ORDER_RANGE,
    NewsvendorRound,
    Observation,
    SessionTranscript,
    clamp_action,
    hash_obj,
)

DEFAULT_ROUNDS = 30
DEMAND_MAX = 300

# Shipped default price/cost schedule: five price points, each visited with
# a low (0.25), middle (0.5), and high (0.75) critical fractile, twice over
# the 30 rounds. Covers the over/under-ordering margin regimes.
_PRICES = (6.0, 8.0, 10.0, 12.0, 15.0)
_FRACTILES = (0.25, 0.5, 0.75)
DEFAULT_PRICE_COST_SCHEDULE: tuple[tuple[float, float], ...] = tuple(
    (p, round(p * (1.0 - f), 4)) for _ in range(2) for p in _PRICES for f in _FRACTILES
)


def optimal_quantity(price: float, cost: float) -> int:
    """Critical-fractile order for uniform demand on [0, 300]."""
    if not cost > 0 or not price > cost:
        raise DomainError(f"need 0 < cost < price, got price={price} cost={cost}")
    return int(round(DEMAND_MAX * (price - cost) / price))


def resolve_newsvendor_round(order: int, demand: int, price: float, cost: float) -> float:
    """Profit price*min(order, demand) - cost*order; may be negative."""
    if not ORDER_RANGE[0] <= order <= ORDER_RANGE[1]:
        raise ValidationError(f"order {order} outside [0, 300]")
    if not 0 <= demand <= DEMAND_MAX:
        raise ValidationError(f"demand {demand} outside [0, 300]")
    if not cost > 0 or not price > cost:
        raise DomainError(f"need 0 < cost < price, got price={price} cost={cost}")
    return price * min(order, demand) - cost * order


@dataclass
class NewsvendorSessionConfig:
    total_rounds: int = DEFAULT_ROUNDS
    price_cost_schedule: Sequence[tuple[float, float]] = DEFAULT_PRICE_COST_SCHEDULE
    rng_seed: int = 0
    demand_schedule: Sequence[int] | None = None
    first_round: int = 1

    def __post_init__(self) -> None:
        if self.total_rounds < 1:
            raise ValidationError("total_rounds must be >= 1")
        if len(self.price_cost_schedule) != self.total_rounds:
            raise ValidationError(
                f"price_cost_schedule has {len(self.price_cost_schedule)} entries, expected {self.total_rounds}"
            )
        for i, (p, c) in enumerate(self.price_cost_schedule, start=1):
            if not c > 0 or not p > c:
                raise ValidationError(f"schedule round {i}: need 0 < cost < price")
        if self.demand_schedule is not None:
            if len(self.demand_schedule) != self.total_rounds:
                raise ValidationError("demand_schedule length must equal total_rounds")
            if any(not (0 <= d <= DEMAND_MAX) for d in self.demand_schedule):
                raise ValidationError("demands must lie in [0, 300]")


def sample_demand(cfg: NewsvendorSessionConfig, t: int) -> int:
    """Demand for round t: schedule entry if present, else a keyed uniform
    integer draw on [0, 300]."""
    if not 1 <= t <= cfg.total_rounds:
        raise DomainError(f"round {t} outside [1, {cfg.total_rounds}]")
    if cfg.demand_schedule is not None:
        return int(cfg.demand_schedule[t - 1])
    gen = rng_mod.stream(cfg.rng_seed, "newsvendor-demand", t)
    return int(gen.integers(0, DEMAND_MAX + 1))


def run_newsvendor_session(
    cfg: NewsvendorSessionConfig,
    agent,
    agent_id: str = "agent",
    resume_from: SessionTranscript | None = None,
) -> SessionTranscript:
    """Round loop mirroring the auction session: decide, reveal demand,
    record profit plus the gap to the critical-fractile optimum."""
    demands = [sample_demand(cfg, t) for t in range(1, cfg.total_rounds + 1)]
    schedule = [
        {"price": p, "cost": c, "demand": d}
        for (p, c), d in zip(cfg.price_cost_schedule, demands)
    ]
    transcript = SessionTranscript(
        task=NEWSVENDOR,
        agent_id=agent_id,
        seed=cfg.rng_seed,
        config_hash=hash_obj(
            {
                "task": NEWSVENDOR,
                "total_rounds": cfg.total_rounds,
                "rng_seed": cfg.rng_seed,
                "price_cost_schedule": [list(pc) for pc in cfg.price_cost_schedule],
                "scheduled_demand": cfg.demand_schedule is not None,
            }
        ),
        schedule_hash=hash_obj(schedule),
        first_round=cfg.first_round,
    )
    start = 0
    if resume_from is not None:
        transcript.rounds = list(resume_from.rounds)
        start = len(transcript.rounds)
    for t in range(start + 1, cfg.total_rounds + 1):
        price, cost = cfg.price_cost_schedule[t - 1]
        obs = Observation(
            task=NEWSVENDOR,
            round_index=cfg.first_round + t - 1,
            total_rounds=cfg.first_round + cfg.total_rounds - 1,
            price=price,
            cost=cost,
            history=tuple(transcript.rounds),
        )
        try:
            raw = agent.decide(obs)
        except AgentError as exc:
            transcript.failed = True
            transcript.failure_reason = f"{type(exc).__name__}: {exc}"
            return transcript
        order, flags = clamp_action(raw, ORDER_RANGE)
        flags = sorted(set(flags) | set(getattr(agent, "last_flags", ())))
        demand = demands[t - 1]
        profit = resolve_newsvendor_round(order, demand, price, cost)
        q_star = optimal_quantity(price, cost)
        transcript.rounds.append(
            NewsvendorRound(
                round_index=cfg.first_round + t - 1,
                price=price,
                cost=cost,
                order=order,
                demand=demand,
                profit=profit,
                q_star=q_star,
                bias=order - q_star,
                flags=flags,
            )
        )
    transcript.complete = True
    return transcript
