"""Prompt assembly for the three intervention levels, and the batch
response grammar used by the imitation level.

Templates live as text assets next to this module; rendering is strict
(a placeholder with no value raises, nothing is silently blank) and
byte-deterministic so prompt golden files stay stable. Levels:

  intrinsicality  - the plain experiment, one integer per round
  instruction     - intrinsicality plus a risk-framing sentence appended
                    to the system prompt
  imitation       - a human participant's early rounds as context; the
                    model answers one "round k: value" line per remaining
                    round in a single batch completion
"""

from __future__ import annotations

import re
import string
from dataclasses import dataclass, field
from importlib import resources
from typing import Any, Sequence

from gameaudit.errors import IncompleteResponseError, TemplateError, ValidationError
from gameaudit.parsing import FLAG_UNPARSEABLE, validate_action_text
from gameaudit.records import (
    AUCTION,
    NEWSVENDOR,
    AgentProfile,
    AuctionRound,
    NewsvendorRound,
    Observation,
    SessionTranscript,
    legal_range,
    sha256_hex,
)

INTRINSICALITY = "intrinsicality"
INSTRUCTION = "instruction"
IMITATION = "imitation"
LEVELS = (INTRINSICALITY, INSTRUCTION, IMITATION)

RISK_SEEKING = "seeking"
RISK_AVERSE = "averse"
RISKS = (RISK_SEEKING, RISK_AVERSE)

DIRECT = "direct"
CONTEXT_AWARE = "context_aware"
THEORY_GUIDED = "theory_guided"
VARIANTS = (DIRECT, CONTEXT_AWARE, THEORY_GUIDED)

SINGLE_INTEGER = "single_integer"
ROUND_LINES = "round_lines"

DEFAULT_CONTEXT_ROUNDS = {AUCTION: 30, NEWSVENDOR: 15}

# Placeholder sets each template must carry; lint_templates enforces this.
EXPECTED_PLACEHOLDERS: dict[str, set[str]] = {
    "auction_instructions": {"total_rounds", "drop_out_price_sample"},
    "auction_sample_block_cube_root": set(),
    "auction_sample_block_cube": set(),
    "auction_intrinsic_system": {"age", "gender", "race", "program", "experiment_instructions", "total_rounds"},
    "auction_intrinsic_user": {"last_round_info", "history", "current_round", "current_num_bidders"},
    "auction_risk_seeking": set(),
    "auction_risk_averse": set(),
    "auction_imitation_system": {"total_rounds", "experiment_instructions", "task", "first_target_round", "last_target_round"},
    "auction_imitation_user": {"context_rounds", "context_block", "first_target_round", "last_target_round", "future_block"},
    "auction_task_direct": {"context_rounds", "first_target_round", "last_target_round"},
    "auction_task_context_aware": {"context_rounds", "first_target_round", "last_target_round"},
    "auction_task_theory_guided": {"context_rounds", "first_target_round", "last_target_round"},
    "newsvendor_intrinsic_system": set(),
    "newsvendor_intrinsic_user": {"history", "current_round", "price", "cost"},
    "newsvendor_risk_seeking": set(),
    "newsvendor_risk_averse": set(),
    "newsvendor_imitation_system": {"total_rounds", "task", "first_target_round", "last_target_round"},
    "newsvendor_imitation_user": {"context_rounds", "context_block", "first_target_round", "last_target_round", "future_block"},
    "newsvendor_task_direct": {"context_rounds", "first_target_round", "last_target_round"},
    "newsvendor_task_context_aware": {"context_rounds", "first_target_round", "last_target_round"},
    "newsvendor_task_theory_guided": {"context_rounds", "first_target_round", "last_target_round"},
}

_template_cache: dict[str, str] = {}


def load_template(name: str) -> str:
    if name not in _template_cache:
        ref = resources.files("gameaudit").joinpath(f"templates/{name}.txt")
        try:
            text = ref.read_text(encoding="utf-8")
        except FileNotFoundError as exc:
            raise TemplateError(name, "<file>") from exc
        _template_cache[name] = text.rstrip("\n")
    return _template_cache[name]


def template_placeholders(name: str) -> set[str]:
    fields_found = set()
    for _, field_name, _, _ in string.Formatter().parse(load_template(name)):
        if field_name:
            fields_found.add(field_name)
    return fields_found


def render_template(name: str, values: dict[str, Any]) -> str:
    try:
        return load_template(name).format(**values)
    except (KeyError, IndexError) as exc:
        missing = exc.args[0] if exc.args else "?"
        raise TemplateError(name, str(missing)) from exc


def lint_templates() -> list[dict[str, Any]]:
    """Verify every template exists and carries exactly the expected
    placeholder set. Run at service startup and by the lint verb."""
    report = []
    for name, expected in sorted(EXPECTED_PLACEHOLDERS.items()):
        entry: dict[str, Any] = {"template": name}
        try:
            found = template_placeholders(name)
            entry["placeholders"] = sorted(found)
            entry["sha256"] = sha256_hex(load_template(name))
            if found != expected:
                entry["ok"] = False
                entry["error"] = (
                    f"placeholders {sorted(found)} != expected {sorted(expected)}"
                )
            else:
                entry["ok"] = True
        except TemplateError as exc:
            entry["ok"] = False
            entry["error"] = str(exc)
        report.append(entry)
    return report


def template_fingerprint() -> dict[str, str]:
    return {name: sha256_hex(load_template(name)) for name in sorted(EXPECTED_PLACEHOLDERS)}


@dataclass
class InterventionSpec:
    """Which intervention governs prompt assembly for a session."""

    level: str = INTRINSICALITY
    risk: str | None = None
    imitation_variant: str | None = None
    context_rounds: int | None = None  # imitation only; task default applies

    def __post_init__(self) -> None:
        if self.level not in LEVELS:
            raise ValidationError(f"unknown intervention level {self.level!r}")
        if (self.level == INSTRUCTION) != (self.risk is not None):
            raise ValidationError("risk must be set exactly when level is 'instruction'")
        if self.risk is not None and self.risk not in RISKS:
            raise ValidationError(f"unknown risk framing {self.risk!r}")
        if (self.level == IMITATION) != (self.imitation_variant is not None):
            raise ValidationError("imitation_variant must be set exactly when level is 'imitation'")
        if self.imitation_variant is not None and self.imitation_variant not in VARIANTS:
            raise ValidationError(f"unknown imitation variant {self.imitation_variant!r}")

    def label(self) -> str:
        if self.level == INSTRUCTION:
            return f"instruction-{self.risk}"
        if self.level == IMITATION:
            return f"imitation-{self.imitation_variant}"
        return self.level


@dataclass
class PromptBundle:
    system_text: str
    user_text: str
    expected_response_grammar: str  # SINGLE_INTEGER or ROUND_LINES
    target_first: int | None = None
    target_last: int | None = None


def _fmt_num(x: float) -> str:
    """Integers render bare; non-integral currency keeps its decimals."""
    xf = float(x)
    return str(int(xf)) if xf.is_integer() else f"{xf:g}"


def render_auction_feedback_line(r: AuctionRound) -> str:
    """Post-round feedback with ascending-auction information only: buyers
    below the reserve show as None, and the winner shows the price at which
    bidding stopped rather than their private maximum."""
    if r.sale:
        winning_bid = max(r.reserve, r.valuations[1] if len(r.valuations) > 1 else 0)
        shown: list[str] = []
        for i, v in enumerate(r.valuations):
            if i == 0:
                shown.append(str(winning_bid))
            elif v < r.reserve:
                shown.append("None")
            else:
                shown.append(str(v))
        winning = str(winning_bid)
    else:
        shown = ["None"] * len(r.valuations)
        winning = "None"
    drop_outs = "[" + ", ".join(shown) + "]"
    return (
        f"Period: {r.round_index} | Reserve Price: {r.reserve} | "
        f"Number of Buyers: {r.num_bidders} | Drop-Out Prices: {drop_outs} | "
        f"Winning Bid: {winning} | Profit: {r.profit}"
    )


def render_newsvendor_feedback_line(r: NewsvendorRound) -> str:
    return (
        f"Round: {r.round_index} | Price: {_fmt_num(r.price)} | Cost: {_fmt_num(r.cost)} | "
        f"Order: {r.order} | Demand: {r.demand} | Profit: {_fmt_num(r.profit)}"
    )


def render_history(task: str, rounds: Sequence[Any]) -> str:
    if task == AUCTION:
        return "\n".join(render_auction_feedback_line(r) for r in rounds)
    return "\n".join(render_newsvendor_feedback_line(r) for r in rounds)


def render_auction_context_line(r: AuctionRound) -> str:
    """Imitation context shows the participant's full round record,
    valuations included."""
    vals = "[" + ", ".join(str(v) for v in r.valuations) + "]"
    sold = "Yes" if r.sale else "No"
    return (
        f"Round: {r.round_index} | Reserve Price: {r.reserve} | "
        f"Number of Buyers: {r.num_bidders} | Bidder Valuations: {vals} | "
        f"Sold: {sold} | Profit: {r.profit}"
    )


@dataclass
class ImitationSplit:
    """Context rounds (played by the participant) and the environment
    descriptors of the rounds the model must complete."""

    context: list[Any]
    targets: list[dict[str, Any]]
    first_target: int
    last_target: int

    @property
    def target_rounds(self) -> list[int]:
        return [t["round"] for t in self.targets]


def split_trace_for_imitation(trace: SessionTranscript, context_rounds: int) -> ImitationSplit:
    """Cut a full trace into the shown prefix and the rounds to predict.

    Targets carry environment info that is known before deciding (bidder
    counts for the auction, price/cost for the newsvendor) and never the
    unrevealed draws for those rounds.
    """
    if context_rounds < 1:
        raise ValidationError("context_rounds must be >= 1")
    if len(trace.rounds) <= context_rounds:
        raise ValidationError(
            f"trace has {len(trace.rounds)} rounds; need more than context_rounds={context_rounds}"
        )
    context = list(trace.rounds[:context_rounds])
    targets = []
    for r in trace.rounds[context_rounds:]:
        if trace.task == AUCTION:
            targets.append({"round": r.round_index, "num_bidders": r.num_bidders})
        else:
            targets.append({"round": r.round_index, "price": r.price, "cost": r.cost})
    return ImitationSplit(
        context=context,
        targets=targets,
        first_target=targets[0]["round"],
        last_target=targets[-1]["round"],
    )


def render_future_block(task: str, targets: Sequence[dict[str, Any]]) -> str:
    lines = []
    for t in targets:
        if task == AUCTION:
            lines.append(f"Round: {t['round']} | Number of Buyers: {t['num_bidders']}")
        else:
            lines.append(
                f"Round: {t['round']} | Price: {_fmt_num(t['price'])} | Cost: {_fmt_num(t['cost'])}"
            )
    return "\n".join(lines)


def experiment_instructions(distribution: str, total_rounds: int) -> str:
    sample_block = load_template(f"auction_sample_block_{distribution}")
    return render_template(
        "auction_instructions",
        {"total_rounds": total_rounds, "drop_out_price_sample": sample_block},
    )


def build_prompts(
    spec: InterventionSpec,
    profile: AgentProfile | None,
    task: str,
    observation: Observation | None = None,
    trace: SessionTranscript | None = None,
) -> PromptBundle:
    """Render the full prompt pair for one decision.

    Intrinsicality/instruction need the live observation (and, for the
    auction, the agent profile). Imitation needs the human trace to split;
    the observation is not used there because one batch request covers all
    remaining rounds.
    """
    if task not in (AUCTION, NEWSVENDOR):
        raise ValidationError(f"unknown task {task!r}")
    if spec.level in (INTRINSICALITY, INSTRUCTION):
        if observation is None:
            raise ValidationError(f"{spec.level} prompts need an observation")
        bundle = _per_round_prompts(task, profile, observation)
        if spec.level == INSTRUCTION:
            modifier = load_template(f"{task}_risk_{spec.risk}")
            bundle.system_text = bundle.system_text + "\n\n" + modifier
        return bundle
    if trace is None:
        raise ValidationError("imitation prompts need a participant trace")
    return _imitation_prompts(spec, task, trace)


def _per_round_prompts(task: str, profile: AgentProfile | None, obs: Observation) -> PromptBundle:
    history = render_history(task, obs.history)
    last_round_info = (
        render_history(task, obs.history[-1:]) if obs.history else ""
    )
    if task == AUCTION:
        if profile is None:
            raise ValidationError("auction prompts need an agent profile")
        profile.validate()
        system_text = render_template(
            "auction_intrinsic_system",
            {
                "age": profile.age,
                "gender": profile.gender,
                "race": profile.race,
                "program": profile.program,
                "experiment_instructions": experiment_instructions(
                    obs.distribution or "cube_root", obs.total_rounds
                ),
                "total_rounds": obs.total_rounds,
            },
        )
        user_text = render_template(
            "auction_intrinsic_user",
            {
                "last_round_info": last_round_info,
                "history": history,
                "current_round": obs.round_index,
                "current_num_bidders": obs.num_bidders,
            },
        )
    else:
        system_text = load_template("newsvendor_intrinsic_system")
        user_text = render_template(
            "newsvendor_intrinsic_user",
            {
                "history": history,
                "current_round": obs.round_index,
                "price": _fmt_num(obs.price),
                "cost": _fmt_num(obs.cost),
            },
        )
    return PromptBundle(system_text, user_text, SINGLE_INTEGER)


def _imitation_prompts(spec: InterventionSpec, task: str, trace: SessionTranscript) -> PromptBundle:
    context_rounds = spec.context_rounds or DEFAULT_CONTEXT_ROUNDS[task]
    split = split_trace_for_imitation(trace, context_rounds)
    numbers = {
        "context_rounds": context_rounds,
        "first_target_round": split.first_target,
        "last_target_round": split.last_target,
    }
    task_text = render_template(f"{task}_task_{spec.imitation_variant}", numbers)
    total_rounds = len(trace.rounds)
    if task == AUCTION:
        system_text = render_template(
            "auction_imitation_system",
            {
                "total_rounds": total_rounds,
                "experiment_instructions": experiment_instructions(
                    trace.distribution or "cube_root", total_rounds
                ),
                "task": task_text,
                **numbers,
            },
        )
        context_block = "\n".join(render_auction_context_line(r) for r in split.context)
        user_name = "auction_imitation_user"
    else:
        system_text = render_template(
            "newsvendor_imitation_system",
            {"total_rounds": total_rounds, "task": task_text, **numbers},
        )
        context_block = "\n".join(render_newsvendor_feedback_line(r) for r in split.context)
        user_name = "newsvendor_imitation_user"
    user_text = render_template(
        user_name,
        {
            "context_block": context_block,
            "future_block": render_future_block(task, split.targets),
            **numbers,
        },
    )
    return PromptBundle(
        system_text,
        user_text,
        ROUND_LINES,
        target_first=split.first_target,
        target_last=split.last_target,
    )


_ROUND_LINE = re.compile(r"^\s*round\s+(\d+)\s*:\s*(.*?)\s*$", re.IGNORECASE)

FLAG_DUPLICATE = "duplicate_round"
FLAG_UNEXPECTED = "unexpected_round"


@dataclass
class ParsedRoundLines:
    actions: dict[int, int]
    flags: dict[int, list[str]] = field(default_factory=dict)
    unexpected: list[int] = field(default_factory=list)


def parse_round_lines(
    text: str, expected_rounds: Sequence[int], legal: tuple[int, int]
) -> ParsedRoundLines:
    """Parse a batch of "round k: value" lines.

    Blank and junk lines are skipped; duplicate rounds keep the last
    occurrence with a flag; values follow the single-action salvage rules
    (a line whose value holds no integer at all supplies nothing). A gap in
    expected_rounds raises IncompleteResponseError naming every missing
    round so the caller can re-prompt once.
    """
    expected = list(expected_rounds)
    if not expected:
        raise ValidationError("expected_rounds must be nonempty")
    if expected != list(range(expected[0], expected[-1] + 1)):
        raise ValidationError("expected_rounds must be contiguous")
    result = ParsedRoundLines(actions={})
    for line in text.splitlines():
        if not line.strip():
            continue
        m = _ROUND_LINE.match(line)
        if not m:
            continue
        k = int(m.group(1))
        value_text = m.group(2).strip()
        if value_text.startswith("[") and value_text.endswith("]"):
            value_text = value_text[1:-1].strip()
        parsed = validate_action_text(value_text, legal)
        if FLAG_UNPARSEABLE in parsed.flags:
            continue  # no integer on this line; it supplies nothing
        if k not in expected:
            result.unexpected.append(k)
            continue
        flags = list(parsed.flags)
        if k in result.actions:
            flags.append(FLAG_DUPLICATE)
        result.actions[k] = parsed.value
        result.flags.pop(k, None)
        if flags:
            result.flags[k] = sorted(set(flags))
    missing = [k for k in expected if k not in result.actions]
    if missing:
        raise IncompleteResponseError(missing)
    return result


def render_round_lines(actions: dict[int, int]) -> str:
    """Inverse of parse_round_lines for well-formed maps (tests, stubs)."""
    return "\n".join(f"round {k}: {actions[k]}" for k in sorted(actions))
