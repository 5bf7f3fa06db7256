"""Decision agents behind a single interface: decide(observation) -> int.

Local agents (trace replay, constants, theory oracles, demand chasing,
synthetic humans) are deterministic given their seed. The remote agent
speaks an OpenAI-style chat-completion protocol over HTTPS with retry,
backoff, a process-wide rate/budget governor, and a one-re-prompt-then-
clamp policy for malformed answers. Whatever happens, the value an agent
hands back is always inside the task's legal range by the time it lands
in a transcript.
"""

from __future__ import annotations

import os
import threading
import time
from dataclasses import dataclass
from functools import lru_cache
from typing import Sequence

import httpx

from gameaudit import interventions, rng as rng_mod
from gameaudit.auction import ValuationDistribution, optimal_reserve
from gameaudit.errors import (
    AgentError,
    ConfigError,
    IncompleteResponseError,
    ProtocolError,
    RequestBudgetExceeded,
    TransportError,
    ValidationError,
)
from gameaudit.newsvendor import optimal_quantity
from gameaudit.parsing import ParsedAction, validate_action_text  # noqa: F401  (re-export)
from gameaudit.records import AUCTION, AgentProfile, Observation, SessionTranscript, legal_range

_GENDERS = ("female", "male", "non-binary")
_RACES = ("Asian", "Black", "Hispanic", "White", "Middle Eastern", "Multiracial")
_PROGRAMS = (
    "Economics",
    "Computer Science",
    "Psychology",
    "Mechanical Engineering",
    "Political Science",
    "Biology",
    "Business Administration",
    "Mathematics",
    "Sociology",
    "Nursing",
)


def generate_profiles(seed: int, n: int) -> list[AgentProfile]:
    """Deterministic synthetic demographic profiles. Stand-ins only: real
    participant profiles load from a profiles file instead."""
    if n < 1:
        raise ValidationError("n must be >= 1")
    gen = rng_mod.stream(seed, "profiles")
    profiles = []
    for _ in range(n):
        profiles.append(
            AgentProfile(
                age=int(gen.integers(18, 31)),
                gender=str(gen.choice(_GENDERS)),
                race=str(gen.choice(_RACES)),
                program=str(gen.choice(_PROGRAMS)),
            )
        )
    return profiles


class ConstantActionAgent:
    def __init__(self, value: int):
        self.value = int(value)

    def decide(self, obs: Observation) -> int:
        return self.value


class ReplayAgent:
    """Replays a stored action sequence by round index, bit-exact."""

    def __init__(self, actions: Sequence[int], first_round: int = 1):
        self.actions = [int(a) for a in actions]
        self.first_round = first_round

    def decide(self, obs: Observation) -> int:
        idx = obs.round_index - self.first_round
        if not 0 <= idx < len(self.actions):
            raise AgentError(f"replay trace exhausted at round {obs.round_index}")
        return self.actions[idx]


class MappedActionsAgent:
    """Replays a {round_index: action} map (parsed imitation batches)."""

    def __init__(self, actions: dict[int, int], flags: dict[int, list[str]] | None = None):
        self.actions = dict(actions)
        self.flags = flags or {}
        self.last_flags: list[str] = []

    def decide(self, obs: Observation) -> int:
        if obs.round_index not in self.actions:
            raise AgentError(f"no action for round {obs.round_index}")
        self.last_flags = list(self.flags.get(obs.round_index, []))
        return self.actions[obs.round_index]


@lru_cache(maxsize=None)
def _cached_reserve(distribution: str, num_samples: int, seed: int) -> int:
    r_star, _ = optimal_reserve(ValuationDistribution(distribution), num_samples, seed=seed)
    return r_star


class OracleAgent:
    """Plays the normative optimum: the expected-profit-maximizing reserve
    (auction, from the Monte-Carlo grid search) or the critical-fractile
    quantity (newsvendor)."""

    def __init__(self, num_samples: int = 200_000, seed: int = 0):
        self.num_samples = num_samples
        self.seed = seed

    def decide(self, obs: Observation) -> int:
        if obs.task == AUCTION:
            return _cached_reserve(obs.distribution or "cube_root", self.num_samples, self.seed)
        return optimal_quantity(obs.price, obs.cost)


class DemandChasingAgent:
    """Newsvendor heuristic baseline: order last round's realized demand;
    the first round falls back to the critical fractile."""

    def decide(self, obs: Observation) -> int:
        if obs.history:
            return obs.history[-1].demand
        return optimal_quantity(obs.price, obs.cost)


class SyntheticHumanAuctionAgent:
    """Stylized human seller for generating stand-in traces: dispersed
    reserves, anchoring on the previous choice, reserves climbing with the
    number of bidders, and occasional jumps to the range extremes."""

    def __init__(self, seed: int, index: int):
        self.seed = seed
        self.index = index
        p = rng_mod.stream(seed, "synthetic-auction-params", index)
        self.base = float(p.uniform(8.0, 40.0))
        self.slope = float(p.uniform(0.6, 3.0))
        self.noise_sd = float(p.uniform(4.0, 14.0))
        self.p_extreme = float(p.uniform(0.03, 0.10))
        self.anchor = float(p.uniform(0.15, 0.6))

    def decide(self, obs: Observation) -> int:
        g = rng_mod.stream(self.seed, "synthetic-auction-decide", self.index, obs.round_index)
        if g.random() < self.p_extreme:
            return 0 if g.random() < 0.5 else 100
        target = self.base + self.slope * (obs.num_bidders - 1) + g.normal(0.0, self.noise_sd)
        if obs.history:
            target = self.anchor * obs.history[-1].reserve + (1.0 - self.anchor) * target
        return int(min(100, max(0, round(target))))


class SyntheticHumanNewsvendorAgent:
    """Stylized human vendor: demand chasing blended with a pull toward
    mean demand, plus per-round noise."""

    def __init__(self, seed: int, index: int):
        self.seed = seed
        self.index = index
        p = rng_mod.stream(seed, "synthetic-newsvendor-params", index)
        self.chase_w = float(p.uniform(0.35, 0.85))
        self.center_w = float(p.uniform(0.05, 0.30))
        self.noise_sd = float(p.uniform(12.0, 45.0))

    def decide(self, obs: Observation) -> int:
        g = rng_mod.stream(self.seed, "synthetic-newsvendor-decide", self.index, obs.round_index)
        q_star = optimal_quantity(obs.price, obs.cost)
        if obs.history:
            base = self.chase_w * obs.history[-1].demand + (1.0 - self.chase_w) * q_star
        else:
            base = float(q_star)
        value = (1.0 - self.center_w) * base + self.center_w * 150.0 + g.normal(0.0, self.noise_sd)
        return int(min(300, max(0, round(value))))


class RequestGovernor:
    """Process-wide guardrails for remote calls: a requests-per-minute cap
    (sliding window) and an optional hard request budget."""

    def __init__(
        self,
        requests_per_minute: float | None = None,
        request_budget: int | None = None,
        clock=time.monotonic,
        sleep=time.sleep,
    ):
        self.requests_per_minute = requests_per_minute
        self.request_budget = request_budget
        self._clock = clock
        self._sleep = sleep
        self._lock = threading.Lock()
        self._sent: list[float] = []
        self.used = 0

    def acquire(self) -> None:
        with self._lock:
            if self.request_budget is not None and self.used >= self.request_budget:
                raise RequestBudgetExceeded(
                    f"request budget of {self.request_budget} exhausted"
                )
            self.used += 1
            if self.requests_per_minute is None:
                return
            now = self._clock()
            window = 60.0
            self._sent = [t for t in self._sent if now - t < window]
            if len(self._sent) >= self.requests_per_minute:
                wait = self._sent[0] + window - now
                if wait > 0:
                    self._sleep(wait)
                    now = self._clock()
                    self._sent = [t for t in self._sent if now - t < window]
            self._sent.append(now)


@dataclass
class RemoteModelConfig:
    """Chat-completion endpoint settings for one model."""

    endpoint: str
    model: str
    temperature: float = 1.0
    max_retries: int = 3
    timeout_s: float = 60.0
    credential_env: str = "GAMEAUDIT_API_KEY"
    backoff_s: float = 1.0

    def __post_init__(self) -> None:
        if self.temperature < 0:
            raise ValidationError("temperature must be >= 0")
        if self.max_retries < 1:
            raise ValidationError("max_retries must be >= 1")

    def auth_headers(self) -> dict[str, str]:
        if not self.credential_env:
            return {}
        key = os.environ.get(self.credential_env)
        if key is None:
            raise ConfigError(
                f"credential environment variable {self.credential_env!r} is not set"
            )
        return {"Authorization": f"Bearer {key}"}


_RETRYABLE_STATUS = {429, 500, 502, 503, 504}


def query_remote_model(
    cfg: RemoteModelConfig,
    system_text: str,
    user_text: str,
    client: httpx.Client | None = None,
    governor: RequestGovernor | None = None,
) -> str:
    """One chat request: system + user message, assistant text back.

    Transport failures and retryable statuses back off exponentially up to
    cfg.max_retries total attempts; other non-success statuses fail
    immediately with the status carried in the error.
    """
    if not system_text or not user_text:
        raise ValidationError("system_text and user_text must be nonempty")
    payload = {
        "model": cfg.model,
        "temperature": cfg.temperature,
        "messages": [
            {"role": "system", "content": system_text},
            {"role": "user", "content": user_text},
        ],
    }
    headers = cfg.auth_headers()
    own_client = client is None
    if own_client:
        client = httpx.Client(timeout=cfg.timeout_s)
    try:
        last_error: str = ""
        for attempt in range(1, cfg.max_retries + 1):
            if governor is not None:
                governor.acquire()
            try:
                resp = client.post(cfg.endpoint, json=payload, headers=headers)
            except httpx.HTTPError as exc:
                last_error = f"{type(exc).__name__}: {exc}"
            else:
                if resp.status_code == 200:
                    return _extract_content(resp)
                last_error = f"HTTP {resp.status_code}: {resp.text[:500]}"
                if resp.status_code not in _RETRYABLE_STATUS:
                    raise TransportError(last_error)
            if attempt < cfg.max_retries:
                time.sleep(cfg.backoff_s * 2 ** (attempt - 1))
        raise TransportError(f"gave up after {cfg.max_retries} attempts; last error: {last_error}")
    finally:
        if own_client:
            client.close()


def _extract_content(resp: httpx.Response) -> str:
    try:
        body = resp.json()
        content = body["choices"][0]["message"]["content"]
    except (ValueError, LookupError, TypeError) as exc:
        raise ProtocolError(f"malformed response body: {exc}") from exc
    if not isinstance(content, str):
        raise ProtocolError("response content is not text")
    return content


_REPROMPT_SINGLE = (
    "Your previous response was not a single integer. "
    "Respond with one integer between {lo} and {hi} and nothing else."
)
_REPROMPT_BATCH = (
    "Your previous response was missing rounds: {missing}. "
    "Respond again with one line per round covering every round from "
    "{first} to {last}, in the format 'round <number>: <integer>', and nothing else."
)

FLAG_REPROMPTED = "reprompted"


class RemoteModelAgent:
    """Per-round remote decisions for the intrinsicality and instruction
    levels. A malformed answer triggers exactly one corrective re-prompt;
    if that also fails the salvage rules apply and the flags say so."""

    def __init__(
        self,
        cfg: RemoteModelConfig,
        spec: interventions.InterventionSpec,
        profile: AgentProfile | None,
        client: httpx.Client | None = None,
        governor: RequestGovernor | None = None,
    ):
        if spec.level == interventions.IMITATION:
            raise ValidationError("imitation runs as a batch; use run_imitation_batch")
        self.cfg = cfg
        self.spec = spec
        self.profile = profile
        self.client = client
        self.governor = governor
        self.last_flags: list[str] = []

    def decide(self, obs: Observation) -> int:
        bundle = interventions.build_prompts(self.spec, self.profile, obs.task, observation=obs)
        legal = legal_range(obs.task)
        text = query_remote_model(
            self.cfg, bundle.system_text, bundle.user_text, self.client, self.governor
        )
        parsed = validate_action_text(text, legal)
        if parsed.clean:
            self.last_flags = []
            return parsed.value
        retry_user = (
            bundle.user_text
            + "\n\n"
            + _REPROMPT_SINGLE.format(lo=legal[0], hi=legal[1])
        )
        text = query_remote_model(
            self.cfg, bundle.system_text, retry_user, self.client, self.governor
        )
        reparsed = validate_action_text(text, legal)
        self.last_flags = sorted(set(reparsed.flags) | {FLAG_REPROMPTED})
        return reparsed.value


def run_imitation_batch(
    cfg: RemoteModelConfig,
    spec: interventions.InterventionSpec,
    task: str,
    trace: SessionTranscript,
    client: httpx.Client | None = None,
    governor: RequestGovernor | None = None,
) -> tuple[dict[int, int], dict[int, list[str]]]:
    """One batch completion covering every target round, with a single
    re-prompt listing the gaps if the first parse is incomplete."""
    bundle = interventions.build_prompts(spec, None, task, trace=trace)
    rounds = range(bundle.target_first, bundle.target_last + 1)
    legal = legal_range(task)
    text = query_remote_model(cfg, bundle.system_text, bundle.user_text, client, governor)
    try:
        parsed = interventions.parse_round_lines(text, rounds, legal)
        return parsed.actions, parsed.flags
    except IncompleteResponseError as exc:
        retry_user = bundle.user_text + "\n\n" + _REPROMPT_BATCH.format(
            missing=", ".join(str(m) for m in exc.missing),
            first=bundle.target_first,
            last=bundle.target_last,
        )
        text = query_remote_model(cfg, bundle.system_text, retry_user, client, governor)
        try:
            parsed = interventions.parse_round_lines(text, rounds, legal)
        except IncompleteResponseError as exc2:
            raise ProtocolError(
                f"batch response still missing rounds {exc2.missing} after re-prompt"
            ) from exc2
        flags = {k: sorted(set(v) | {FLAG_REPROMPTED}) for k, v in parsed.flags.items()}
        for k in parsed.actions:
            flags.setdefault(k, [FLAG_REPROMPTED])
        return parsed.actions, flags
