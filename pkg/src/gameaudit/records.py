"""Data model and line-delimited persistence.

Transcripts, schedules, and traces are JSON-lines files: a single header
object (schema tag plus session metadata) followed by one object per
round. Writes are atomic (temp file + rename) and byte-deterministic:
keys are sorted and floats use repr, so identical sessions always produce
identical files.
"""

from __future__ import annotations

import hashlib
import json
import os
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any, Iterable, Sequence

from gameaudit.errors import ValidationError

TRANSCRIPT_SCHEMA = "gameaudit.transcript.v1"
SCHEDULE_SCHEMA = "gameaudit.schedule.v1"
PROFILE_SCHEMA = "gameaudit.profiles.v1"

AUCTION = "auction"
NEWSVENDOR = "newsvendor"

RESERVE_RANGE = (0, 100)
ORDER_RANGE = (0, 300)
DEMAND_RANGE = (0, 300)


@dataclass
class AuctionRound:
    """One resolved auction round."""

    round_index: int
    num_bidders: int
    valuations: list[int]  # descending
    reserve: int
    sale: bool
    profit: int
    flags: list[str] = field(default_factory=list)

    @property
    def action(self) -> int:
        return self.reserve

    def validate(self) -> None:
        if self.num_bidders != len(self.valuations):
            raise ValidationError("num_bidders does not match valuation count")
        if any(not (0 <= v <= 100) for v in self.valuations):
            raise ValidationError("valuation outside [0, 100]")
        if list(self.valuations) != sorted(self.valuations, reverse=True):
            raise ValidationError("valuations must be sorted descending")
        if not (RESERVE_RANGE[0] <= self.reserve <= RESERVE_RANGE[1]):
            raise ValidationError("reserve outside [0, 100]")
        if not self.sale and self.profit != 0:
            raise ValidationError("unsold round must have zero profit")


@dataclass
class NewsvendorRound:
    """One resolved newsvendor round."""

    round_index: int
    price: float
    cost: float
    order: int
    demand: int
    profit: float
    q_star: int
    bias: int
    flags: list[str] = field(default_factory=list)

    @property
    def action(self) -> int:
        return self.order

    def validate(self) -> None:
        if not (0 < self.cost < self.price):
            raise ValidationError("need 0 < cost < price")
        if not (ORDER_RANGE[0] <= self.order <= ORDER_RANGE[1]):
            raise ValidationError("order outside [0, 300]")
        if not (DEMAND_RANGE[0] <= self.demand <= DEMAND_RANGE[1]):
            raise ValidationError("demand outside [0, 300]")
        if self.bias != self.order - self.q_star:
            raise ValidationError("bias must equal order - q_star")


@dataclass
class SessionTranscript:
    """Ordered round records plus the identity of who produced them."""

    task: str  # AUCTION or NEWSVENDOR
    agent_id: str
    seed: int
    config_hash: str
    rounds: list[Any] = field(default_factory=list)
    profile_index: int | None = None
    source: str = ""  # agent/model label, e.g. "constant-20" or "human"
    intervention: str = "intrinsicality"
    replication: int = 1
    distribution: str | None = None  # auction only
    schedule_hash: str = ""
    first_round: int = 1
    complete: bool = False
    failed: bool = False
    failure_reason: str = ""
    metadata: dict[str, Any] = field(default_factory=dict)

    @property
    def actions(self) -> list[int]:
        return [r.action for r in self.rounds]

    @property
    def profits(self) -> list[float]:
        return [r.profit for r in self.rounds]

    def header(self) -> dict[str, Any]:
        h = {
            "schema": TRANSCRIPT_SCHEMA,
            "task": self.task,
            "agent_id": self.agent_id,
            "seed": self.seed,
            "config_hash": self.config_hash,
            "profile_index": self.profile_index,
            "source": self.source,
            "intervention": self.intervention,
            "replication": self.replication,
            "distribution": self.distribution,
            "schedule_hash": self.schedule_hash,
            "first_round": self.first_round,
            "complete": self.complete,
            "failed": self.failed,
            "failure_reason": self.failure_reason,
            "metadata": self.metadata,
        }
        return h


@dataclass
class AgentProfile:
    """Demographic fields injected into prompts."""

    age: int
    gender: str
    race: str
    program: str

    def validate(self) -> None:
        if self.age <= 0:
            raise ValidationError("profile age must be positive")
        for name in ("gender", "race", "program"):
            if not getattr(self, name):
                raise ValidationError(f"profile field {name!r} must be nonempty")


@dataclass
class Observation:
    """What an agent sees before deciding: current round parameters plus
    every completed round. Never contains unrevealed environment draws."""

    task: str
    round_index: int
    total_rounds: int
    num_bidders: int | None = None  # auction
    price: float | None = None  # newsvendor
    cost: float | None = None
    distribution: str | None = None
    history: tuple = ()


def legal_range(task: str) -> tuple[int, int]:
    return RESERVE_RANGE if task == AUCTION else ORDER_RANGE


def clamp_action(value: int, bounds: tuple[int, int]) -> tuple[int, list[str]]:
    """Force an action into its legal range, flagging when it moved."""
    lo, hi = bounds
    v = int(value)
    if v < lo:
        return lo, ["out_of_range"]
    if v > hi:
        return hi, ["out_of_range"]
    return v, []


def canonical_json(obj: Any) -> str:
    """Deterministic JSON encoding used for hashing and file bytes."""
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), allow_nan=False)


def sha256_hex(text: str) -> str:
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


def hash_obj(obj: Any) -> str:
    return sha256_hex(canonical_json(obj))


def atomic_write_text(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(text, encoding="utf-8")
    os.replace(tmp, path)


def _jsonl(lines: Iterable[dict[str, Any]]) -> str:
    return "".join(canonical_json(line) + "\n" for line in lines)


def write_transcript(path: Path, transcript: SessionTranscript) -> None:
    lines = [transcript.header()]
    for r in transcript.rounds:
        lines.append(asdict(r))
    atomic_write_text(path, _jsonl(lines))


def read_transcript(path: Path) -> SessionTranscript:
    raw = [json.loads(line) for line in path.read_text(encoding="utf-8").splitlines() if line.strip()]
    if not raw or raw[0].get("schema") != TRANSCRIPT_SCHEMA:
        raise ValidationError(f"{path}: not a transcript file")
    head = raw[0]
    t = SessionTranscript(
        task=head["task"],
        agent_id=head["agent_id"],
        seed=head["seed"],
        config_hash=head["config_hash"],
        profile_index=head.get("profile_index"),
        source=head.get("source", ""),
        intervention=head.get("intervention", "intrinsicality"),
        replication=head.get("replication", 1),
        distribution=head.get("distribution"),
        schedule_hash=head.get("schedule_hash", ""),
        first_round=head.get("first_round", 1),
        complete=head.get("complete", False),
        failed=head.get("failed", False),
        failure_reason=head.get("failure_reason", ""),
        metadata=head.get("metadata", {}),
    )
    cls = AuctionRound if t.task == AUCTION else NewsvendorRound
    for rec in raw[1:]:
        t.rounds.append(cls(**rec))
    return t


def write_auction_schedule(path: Path, entries: Sequence[tuple[int, list[int]]]) -> None:
    """entries[i] = (num_bidders, descending valuations) for round i+1."""
    lines: list[dict[str, Any]] = [{"schema": SCHEDULE_SCHEMA, "task": AUCTION}]
    for i, (n, vals) in enumerate(entries, start=1):
        lines.append({"round": i, "num_bidders": n, "valuations": list(vals)})
    atomic_write_text(path, _jsonl(lines))


def read_auction_schedule(path: Path) -> list[tuple[int, list[int]]]:
    rows = _read_schedule_rows(path, AUCTION)
    return [(row["num_bidders"], list(row["valuations"])) for row in rows]


def write_newsvendor_schedule(
    path: Path, price_cost: Sequence[tuple[float, float]], demands: Sequence[int] | None = None
) -> None:
    lines: list[dict[str, Any]] = [{"schema": SCHEDULE_SCHEMA, "task": NEWSVENDOR}]
    for i, (p, c) in enumerate(price_cost, start=1):
        row: dict[str, Any] = {"round": i, "price": p, "cost": c}
        if demands is not None:
            row["demand"] = demands[i - 1]
        lines.append(row)
    atomic_write_text(path, _jsonl(lines))


def read_newsvendor_schedule(path: Path) -> tuple[list[tuple[float, float]], list[int] | None]:
    rows = _read_schedule_rows(path, NEWSVENDOR)
    price_cost = [(row["price"], row["cost"]) for row in rows]
    demands = [row["demand"] for row in rows] if rows and "demand" in rows[0] else None
    return price_cost, demands


def write_profiles(path: Path, profiles: Sequence[AgentProfile]) -> None:
    lines: list[dict[str, Any]] = [{"schema": PROFILE_SCHEMA}]
    lines.extend(asdict(p) for p in profiles)
    atomic_write_text(path, _jsonl(lines))


def read_profiles(path: Path) -> list[AgentProfile]:
    raw = [json.loads(line) for line in path.read_text(encoding="utf-8").splitlines() if line.strip()]
    if not raw or raw[0].get("schema") != PROFILE_SCHEMA:
        raise ValidationError(f"{path}: not a profiles file")
    profiles = [AgentProfile(**row) for row in raw[1:]]
    for p in profiles:
        p.validate()
    return profiles


def _read_schedule_rows(path: Path, task: str) -> list[dict[str, Any]]:
    raw = [json.loads(line) for line in path.read_text(encoding="utf-8").splitlines() if line.strip()]
    if not raw or raw[0].get("schema") != SCHEDULE_SCHEMA or raw[0].get("task") != task:
        raise ValidationError(f"{path}: not a {task} schedule file")
    rows = raw[1:]
    for i, row in enumerate(rows, start=1):
        if row.get("round") != i:
            raise ValidationError(f"{path}: rounds must be contiguous from 1 (saw {row.get('round')} at line {i + 1})")
    return rows
