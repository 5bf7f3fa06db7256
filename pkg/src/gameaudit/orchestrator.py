"""Experiment orchestration: configuration, execution, persistence, and
the analysis pipeline that turns transcripts into report and plot data.

A run is (agent sources) x (interventions) x (replications) x (profiles).
Agents sharing a profile index always face identical environment draws,
sessions persist incrementally, and an interrupted run resumes without
recomputing completed sessions. All outputs are byte-deterministic for
local agents.
"""

from __future__ import annotations

import csv
import io
import json
import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Callable, Sequence

import numpy as np

from gameaudit import agents as agents_mod
from gameaudit import interventions as iv
from gameaudit import metrics as metrics_mod
from gameaudit.auction import AuctionSessionConfig, ValuationDistribution, run_auction_session
from gameaudit.errors import AgentError, ConfigError, ValidationError
from gameaudit.newsvendor import (
    DEFAULT_PRICE_COST_SCHEDULE,
    NewsvendorSessionConfig,
    run_newsvendor_session,
)
from gameaudit.records import (
    AUCTION,
    NEWSVENDOR,
    AgentProfile,
    SessionTranscript,
    atomic_write_text,
    canonical_json,
    hash_obj,
    read_auction_schedule,
    read_newsvendor_schedule,
    read_profiles,
    read_transcript,
    sha256_hex,
    write_transcript,
)
from gameaudit.rng import derive_seed

MANIFEST_SCHEMA = "gameaudit.manifest.v1"
MANIFEST_NAME = "manifest.json"
TRANSCRIPT_DIR = "transcripts"

DEFAULT_ROUNDS = {AUCTION: 60, NEWSVENDOR: 30}

LOCAL_KINDS = ("constant", "oracle", "demand_chasing", "synthetic_human", "replay")
AGENT_KINDS = LOCAL_KINDS + ("remote",)


@dataclass
class AgentSource:
    """One population of agents (a model or a local baseline)."""

    kind: str
    label: str = ""
    value: int | None = None  # constant
    trace_dir: str | None = None  # replay
    model: str | None = None  # remote
    endpoint: str | None = None
    temperature: float = 1.0
    max_retries: int = 3
    timeout_s: float = 60.0
    backoff_s: float = 1.0
    credential_env: str = "GAMEAUDIT_API_KEY"

    def __post_init__(self) -> None:
        if self.kind not in AGENT_KINDS:
            raise ConfigError(f"unknown agent kind {self.kind!r}")
        if self.kind == "constant" and self.value is None:
            raise ConfigError("constant agent needs 'value'")
        if self.kind == "replay" and not self.trace_dir:
            raise ConfigError("replay agent needs 'trace_dir'")
        if self.kind == "remote" and (not self.model or not self.endpoint):
            raise ConfigError("remote agent needs 'model' and 'endpoint'")
        if not self.label:
            self.label = {
                "constant": f"constant-{self.value}",
                "replay": "replay",
                "remote": self.model or "remote",
            }.get(self.kind, self.kind)

    def remote_config(self) -> agents_mod.RemoteModelConfig:
        return agents_mod.RemoteModelConfig(
            endpoint=self.endpoint,
            model=self.model,
            temperature=self.temperature,
            max_retries=self.max_retries,
            timeout_s=self.timeout_s,
            backoff_s=self.backoff_s,
            credential_env=self.credential_env,
        )


@dataclass
class ExperimentConfig:
    task: str = AUCTION
    agents: list[AgentSource] = field(default_factory=list)
    interventions: list[iv.InterventionSpec] = field(default_factory=lambda: [iv.InterventionSpec()])
    num_agents: int = 40
    rounds: int | None = None
    replications: int = 3
    environment_seed: int = 0
    profile_seed: int = 1
    agent_seed: int = 2
    distribution: str = "split"  # auction: cube_root | cube | split across agents
    schedule_file: str | None = None
    profiles_file: str | None = None
    human_traces_dir: str | None = None  # imitation context and KS pairing
    output_dir: str = "runs/experiment"
    workers: int = 1
    requests_per_minute: float | None = None
    request_budget: int | None = None
    max_sessions_per_run: int | None = None  # stop early; resume continues

    def __post_init__(self) -> None:
        if self.task not in (AUCTION, NEWSVENDOR):
            raise ConfigError(f"unknown task {self.task!r}")
        if not self.agents:
            raise ConfigError("at least one agent source is required")
        if self.num_agents < 1 or self.replications < 1:
            raise ConfigError("num_agents and replications must be >= 1")
        if self.rounds is None:
            self.rounds = DEFAULT_ROUNDS[self.task]
        if self.distribution not in ("cube_root", "cube", "split"):
            raise ConfigError(f"unknown distribution mode {self.distribution!r}")
        if self.workers < 1:
            raise ConfigError("workers must be >= 1")

    @classmethod
    def from_dict(cls, raw: dict[str, Any]) -> "ExperimentConfig":
        data = dict(raw)
        try:
            data["agents"] = [AgentSource(**a) for a in data.get("agents", [])]
            data["interventions"] = [
                iv.InterventionSpec(**spec) for spec in data.get("interventions", [{}])
            ]
            return cls(**data)
        except (TypeError, ValidationError) as exc:
            raise ConfigError(str(exc)) from exc

    def to_dict(self) -> dict[str, Any]:
        d = asdict(self)
        return d

    def identity(self) -> dict[str, Any]:
        """The fields that define what gets computed; excludes where results
        land and operational knobs that cannot change outputs."""
        d = self.to_dict()
        for key in (
            "output_dir",
            "workers",
            "requests_per_minute",
            "request_budget",
            "max_sessions_per_run",
        ):
            d.pop(key, None)
        d["input_files"] = self._input_fingerprint()
        return d

    def config_hash(self) -> str:
        return hash_obj(self.identity())

    def _input_fingerprint(self) -> dict[str, str]:
        fp: dict[str, str] = {}
        for path in self._input_paths():
            fp[path.name] = sha256_hex(path.read_text(encoding="utf-8"))
        return fp

    def _input_paths(self) -> list[Path]:
        paths = []
        if self.schedule_file:
            paths.append(Path(self.schedule_file))
        if self.profiles_file:
            paths.append(Path(self.profiles_file))
        for src in self.agents:
            if src.kind == "replay":
                paths.extend(sorted(Path(src.trace_dir).glob("*.jsonl")))
        if self.human_traces_dir:
            paths.extend(sorted(Path(self.human_traces_dir).glob("*.jsonl")))
        return paths

    def validate_inputs(self) -> None:
        if self.schedule_file and not Path(self.schedule_file).exists():
            raise ConfigError(f"schedule_file not found: {self.schedule_file}")
        if self.profiles_file and not Path(self.profiles_file).exists():
            raise ConfigError(f"profiles_file not found: {self.profiles_file}")
        needs_humans = any(s.level == iv.IMITATION for s in self.interventions)
        if needs_humans and not self.human_traces_dir:
            raise ConfigError("imitation interventions need human_traces_dir")
        if self.human_traces_dir and not Path(self.human_traces_dir).is_dir():
            raise ConfigError(f"human_traces_dir not found: {self.human_traces_dir}")
        for src in self.agents:
            if src.kind == "replay" and not Path(src.trace_dir).is_dir():
                raise ConfigError(f"trace_dir not found: {src.trace_dir}")
            if src.kind == "remote":
                src.remote_config().auth_headers()  # raises ConfigError if unset
        if needs_humans:
            for src in self.agents:
                if src.kind != "remote":
                    raise ConfigError(
                        "imitation interventions require remote agent sources "
                        f"(got {src.kind!r})"
                    )


def distribution_for_index(mode: str, index: int, num_agents: int) -> ValuationDistribution:
    if mode == "split":
        half = (num_agents + 1) // 2
        return ValuationDistribution.CUBE_ROOT if index < half else ValuationDistribution.CUBE
    return ValuationDistribution(mode)


@dataclass
class SessionPlan:
    session_id: str
    source: AgentSource
    intervention: iv.InterventionSpec
    replication: int
    profile_index: int


def enumerate_sessions(config: ExperimentConfig) -> list[SessionPlan]:
    plans = []
    for source in config.agents:
        for spec in config.interventions:
            for rep in range(1, config.replications + 1):
                for idx in range(config.num_agents):
                    plans.append(
                        SessionPlan(
                            session_id=f"{source.label}__{spec.label()}__rep{rep}__p{idx:02d}",
                            source=source,
                            intervention=spec,
                            replication=rep,
                            profile_index=idx,
                        )
                    )
    return plans


class RunManifest:
    """Status ledger for one output directory; completed sessions are
    immutable and never recomputed on resume."""

    def __init__(self, run_dir: Path, config: ExperimentConfig):
        self.run_dir = run_dir
        self.config = config
        self.path = run_dir / MANIFEST_NAME
        self.sessions: dict[str, dict[str, Any]] = {}
        self.created_at = _now()
        self._lock = threading.Lock()

    @property
    def config_hash(self) -> str:
        return self.config.config_hash()

    def register(self, plans: Sequence[SessionPlan]) -> None:
        for p in plans:
            self.sessions.setdefault(
                p.session_id,
                {"status": "pending", "transcript": f"{TRANSCRIPT_DIR}/{p.session_id}.jsonl", "error": None},
            )

    def update(self, session_id: str, status: str, error: str | None = None) -> None:
        with self._lock:
            entry = self.sessions[session_id]
            entry["status"] = status
            entry["error"] = error
            self.save()

    def counts(self) -> dict[str, int]:
        out = {"pending": 0, "complete": 0, "failed": 0}
        for entry in self.sessions.values():
            out[entry["status"]] += 1
        return out

    def to_dict(self) -> dict[str, Any]:
        return {
            "schema": MANIFEST_SCHEMA,
            "config_hash": self.config_hash,
            "config": self.config.to_dict(),
            "environment_fingerprint": {
                "seeds": {
                    "environment": self.config.environment_seed,
                    "profiles": self.config.profile_seed,
                    "agents": self.config.agent_seed,
                },
                "templates": iv.template_fingerprint(),
            },
            "sessions": self.sessions,
            "created_at": self.created_at,
            "updated_at": _now(),
        }

    def save(self) -> None:
        atomic_write_text(self.path, canonical_json(self.to_dict()) + "\n")

    @classmethod
    def load(cls, run_dir: Path) -> "RunManifest":
        raw = json.loads((run_dir / MANIFEST_NAME).read_text(encoding="utf-8"))
        if raw.get("schema") != MANIFEST_SCHEMA:
            raise ConfigError(f"{run_dir}: not a run manifest")
        config = ExperimentConfig.from_dict(raw["config"])
        m = cls(run_dir, config)
        m.sessions = raw["sessions"]
        m.created_at = raw.get("created_at", m.created_at)
        return m


def _now() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


def _load_trace_dir(trace_dir: str) -> dict[int, SessionTranscript]:
    traces: dict[int, SessionTranscript] = {}
    for path in sorted(Path(trace_dir).glob("*.jsonl")):
        t = read_transcript(path)
        if t.profile_index is None:
            raise ConfigError(f"{path}: trace has no profile_index")
        traces[t.profile_index] = t
    if not traces:
        raise ConfigError(f"{trace_dir}: no trace files found")
    return traces


def _auction_schedule_from_trace(trace: SessionTranscript) -> list[tuple[int, list[int]]]:
    return [(r.num_bidders, list(r.valuations)) for r in trace.rounds]


class _ExperimentRunner:
    def __init__(
        self,
        config: ExperimentConfig,
        manifest: RunManifest,
        client_factory: Callable[[], Any] | None = None,
    ):
        self.config = config
        self.manifest = manifest
        self.client_factory = client_factory or (lambda: None)
        self.governor = agents_mod.RequestGovernor(
            requests_per_minute=config.requests_per_minute,
            request_budget=config.request_budget,
        )
        self.profiles = self._load_profiles()
        self.human_traces = (
            _load_trace_dir(config.human_traces_dir) if config.human_traces_dir else {}
        )
        self.replay_traces: dict[str, dict[int, SessionTranscript]] = {
            src.label: _load_trace_dir(src.trace_dir)
            for src in config.agents
            if src.kind == "replay"
        }
        self.schedule = None
        if config.schedule_file:
            if config.task == AUCTION:
                self.schedule = read_auction_schedule(Path(config.schedule_file))
            else:
                self.schedule = read_newsvendor_schedule(Path(config.schedule_file))

    def _load_profiles(self) -> list[AgentProfile]:
        if self.config.profiles_file:
            profiles = read_profiles(Path(self.config.profiles_file))
            if len(profiles) < self.config.num_agents:
                raise ConfigError(
                    f"profiles file has {len(profiles)} entries; need {self.config.num_agents}"
                )
            return profiles[: self.config.num_agents]
        return agents_mod.generate_profiles(self.config.profile_seed, self.config.num_agents)

    def run_session(self, plan: SessionPlan, resume_from: SessionTranscript | None) -> SessionTranscript:
        if plan.intervention.level == iv.IMITATION:
            transcript = self._run_imitation(plan)
        elif self.config.task == AUCTION:
            transcript = self._run_auction(plan, resume_from)
        else:
            transcript = self._run_newsvendor(plan, resume_from)
        transcript.agent_id = f"p{plan.profile_index:02d}"
        transcript.profile_index = plan.profile_index
        transcript.source = plan.source.label
        transcript.intervention = plan.intervention.label()
        transcript.replication = plan.replication
        transcript.metadata["profile"] = asdict(self.profiles[plan.profile_index])
        return transcript

    def _env_seed(self, idx: int) -> int:
        return derive_seed(self.config.environment_seed, self.config.task, idx)

    def _make_agent(self, plan: SessionPlan, distribution: ValuationDistribution | None):
        src = plan.source
        if src.kind == "constant":
            return agents_mod.ConstantActionAgent(src.value)
        if src.kind == "oracle":
            return agents_mod.OracleAgent()
        if src.kind == "demand_chasing":
            return agents_mod.DemandChasingAgent()
        if src.kind == "synthetic_human":
            if self.config.task == AUCTION:
                return agents_mod.SyntheticHumanAuctionAgent(self.config.agent_seed, plan.profile_index)
            return agents_mod.SyntheticHumanNewsvendorAgent(self.config.agent_seed, plan.profile_index)
        if src.kind == "replay":
            trace = self.replay_traces[src.label].get(plan.profile_index)
            if trace is None:
                raise ConfigError(f"no replay trace for profile {plan.profile_index}")
            return agents_mod.ReplayAgent(trace.actions, first_round=trace.first_round)
        return agents_mod.RemoteModelAgent(
            src.remote_config(),
            plan.intervention,
            self.profiles[plan.profile_index],
            client=self.client_factory(),
            governor=self.governor,
        )

    def _run_auction(self, plan: SessionPlan, resume_from) -> SessionTranscript:
        idx = plan.profile_index
        if plan.source.kind == "replay":
            trace = self.replay_traces[plan.source.label].get(idx)
            if trace is None:
                raise ConfigError(f"no replay trace for profile {idx}")
            cfg = AuctionSessionConfig(
                total_rounds=len(trace.rounds),
                distribution=ValuationDistribution(trace.distribution or "cube_root"),
                rng_seed=trace.seed,
                bidder_schedule=_auction_schedule_from_trace(trace),
                first_round=trace.first_round,
            )
        else:
            cfg = AuctionSessionConfig(
                total_rounds=self.config.rounds,
                distribution=distribution_for_index(
                    self.config.distribution, idx, self.config.num_agents
                ),
                rng_seed=self._env_seed(idx),
                bidder_schedule=self.schedule,
            )
        agent = self._make_agent(plan, cfg.distribution)
        return run_auction_session(cfg, agent, resume_from=resume_from)

    def _run_newsvendor(self, plan: SessionPlan, resume_from) -> SessionTranscript:
        idx = plan.profile_index
        if plan.source.kind == "replay":
            trace = self.replay_traces[plan.source.label].get(idx)
            if trace is None:
                raise ConfigError(f"no replay trace for profile {idx}")
            cfg = NewsvendorSessionConfig(
                total_rounds=len(trace.rounds),
                price_cost_schedule=[(r.price, r.cost) for r in trace.rounds],
                rng_seed=trace.seed,
                demand_schedule=[r.demand for r in trace.rounds],
                first_round=trace.first_round,
            )
        else:
            price_cost, demands = self.schedule if self.schedule else (None, None)
            cfg = NewsvendorSessionConfig(
                total_rounds=self.config.rounds,
                price_cost_schedule=price_cost or list(DEFAULT_PRICE_COST_SCHEDULE)[: self.config.rounds],
                rng_seed=self._env_seed(idx),
                demand_schedule=demands,
            )
        agent = self._make_agent(plan, None)
        return run_newsvendor_session(cfg, agent, resume_from=resume_from)

    def _run_imitation(self, plan: SessionPlan) -> SessionTranscript:
        idx = plan.profile_index
        human = self.human_traces.get(idx)
        if human is None:
            raise ConfigError(f"no human trace for profile {idx}")
        context_rounds = plan.intervention.context_rounds or iv.DEFAULT_CONTEXT_ROUNDS[self.config.task]
        split = iv.split_trace_for_imitation(human, context_rounds)
        try:
            actions, flags = agents_mod.run_imitation_batch(
                plan.source.remote_config(),
                plan.intervention,
                self.config.task,
                human,
                client=self.client_factory(),
                governor=self.governor,
            )
        except AgentError as exc:
            failed = SessionTranscript(
                task=self.config.task,
                agent_id="",
                seed=human.seed,
                config_hash=self.config.config_hash(),
                first_round=split.first_target,
                failed=True,
                failure_reason=f"{type(exc).__name__}: {exc}",
            )
            failed.distribution = human.distribution
            return failed
        agent = agents_mod.MappedActionsAgent(actions, flags)
        target_rounds = human.rounds[context_rounds:]
        if self.config.task == AUCTION:
            cfg = AuctionSessionConfig(
                total_rounds=len(target_rounds),
                distribution=ValuationDistribution(human.distribution or "cube_root"),
                rng_seed=human.seed,
                bidder_schedule=[(r.num_bidders, list(r.valuations)) for r in target_rounds],
                first_round=split.first_target,
            )
            transcript = run_auction_session(cfg, agent)
        else:
            cfg = NewsvendorSessionConfig(
                total_rounds=len(target_rounds),
                price_cost_schedule=[(r.price, r.cost) for r in target_rounds],
                rng_seed=human.seed,
                demand_schedule=[r.demand for r in target_rounds],
                first_round=split.first_target,
            )
            transcript = run_newsvendor_session(cfg, agent)
        transcript.metadata["context_rounds"] = context_rounds
        transcript.metadata["imitation_source_trace"] = human.agent_id
        return transcript


def run_experiment(
    config: ExperimentConfig,
    resume: bool = False,
    client_factory: Callable[[], Any] | None = None,
) -> RunManifest:
    """Execute (or resume) every planned session and persist incrementally.

    Completed sessions are skipped on resume; failed remote sessions retry
    from their retained partial transcript. Session failures never abort
    the experiment; they are reported in the manifest counts.
    """
    config.validate_inputs()
    run_dir = Path(config.output_dir)
    manifest_path = run_dir / MANIFEST_NAME
    if manifest_path.exists():
        existing = RunManifest.load(run_dir)
        if existing.config_hash != config.config_hash():
            raise ConfigError(
                f"{run_dir} already holds a run with a different config "
                f"({existing.config_hash[:12]} != {config.config_hash()[:12]})"
            )
        manifest = existing
        manifest.config = config
    else:
        if resume:
            raise ConfigError(f"nothing to resume in {run_dir}")
        manifest = RunManifest(run_dir, config)
    plans = enumerate_sessions(config)
    manifest.register(plans)
    manifest.save()

    runner = _ExperimentRunner(config, manifest, client_factory)
    todo = [p for p in plans if manifest.sessions[p.session_id]["status"] != "complete"]
    if config.max_sessions_per_run is not None:
        todo = todo[: config.max_sessions_per_run]

    def work(plan: SessionPlan) -> None:
        entry = manifest.sessions[plan.session_id]
        t_path = run_dir / entry["transcript"]
        resume_from = None
        if t_path.exists() and entry["status"] == "failed":
            previous = read_transcript(t_path)
            if previous.rounds and not previous.complete:
                resume_from = previous
        try:
            transcript = runner.run_session(plan, resume_from)
        except ConfigError:
            raise
        except AgentError as exc:  # batch-level failures surface here
            manifest.update(plan.session_id, "failed", f"{type(exc).__name__}: {exc}")
            return
        write_transcript(t_path, transcript)
        if transcript.failed:
            manifest.update(plan.session_id, "failed", transcript.failure_reason)
        else:
            manifest.update(plan.session_id, "complete")

    if config.workers == 1:
        for plan in todo:
            work(plan)
    else:
        with ThreadPoolExecutor(max_workers=config.workers) as pool:
            list(pool.map(work, todo))
    manifest.save()
    return manifest


def generate_synthetic_humans(
    task: str,
    n: int,
    seed: int,
    out_dir: str | Path,
    rounds: int | None = None,
    distribution: str = "split",
    agent_seed: int | None = None,
) -> list[Path]:
    """Write n stand-in human traces with documented stylizations (wide
    dispersion, occasional extremes, reserves rising with competition,
    demand chasing). Environments use the same seed derivation as
    run_experiment, so a later experiment with environment_seed=seed faces
    the same draws. Files are clearly labeled synthetic."""
    if n < 1:
        raise ValidationError("n must be >= 1")
    if task not in (AUCTION, NEWSVENDOR):
        raise ValidationError(f"unknown task {task!r}")
    rounds = rounds or DEFAULT_ROUNDS[task]
    agent_seed = derive_seed(seed, "synthetic-behavior") if agent_seed is None else agent_seed
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = []
    for idx in range(n):
        env_seed = derive_seed(seed, task, idx)
        if task == AUCTION:
            cfg = AuctionSessionConfig(
                total_rounds=rounds,
                distribution=distribution_for_index(distribution, idx, n),
                rng_seed=env_seed,
            )
            agent = agents_mod.SyntheticHumanAuctionAgent(agent_seed, idx)
            transcript = run_auction_session(cfg, agent)
        else:
            cfg = NewsvendorSessionConfig(
                total_rounds=rounds,
                price_cost_schedule=list(DEFAULT_PRICE_COST_SCHEDULE)[:rounds],
                rng_seed=env_seed,
            )
            agent = agents_mod.SyntheticHumanNewsvendorAgent(agent_seed, idx)
            transcript = run_newsvendor_session(cfg, agent)
        transcript.agent_id = f"human{idx:02d}"
        transcript.profile_index = idx
        transcript.source = "human"
        transcript.metadata["synthetic"] = True
        path = out / f"human_p{idx:02d}.jsonl"
        write_transcript(path, transcript)
        paths.append(path)
    return paths


# ---------------------------------------------------------------------------
# Analysis
# ---------------------------------------------------------------------------


@dataclass
class AnalysisOptions:
    window: tuple[int, int] | None = None  # rounds included in metrics
    ks_window: tuple[int, int] | None = None  # defaults to the pair overlap
    entropy_bin_width: int | None = None
    ci_method: str = "normal"


def _window_rounds(t: SessionTranscript, window: tuple[int, int] | None):
    if window is None:
        return list(t.rounds)
    return [r for r in t.rounds if window[0] <= r.round_index <= window[1]]


def _overlap_actions(a: SessionTranscript, b: SessionTranscript, window):
    rounds_a = {r.round_index: r.action for r in a.rounds}
    rounds_b = {r.round_index: r.action for r in b.rounds}
    common = sorted(set(rounds_a) & set(rounds_b))
    if window is not None:
        common = [k for k in common if window[0] <= k <= window[1]]
    return [rounds_a[k] for k in common], [rounds_b[k] for k in common]


def analyze(
    run_dirs: Sequence[str | Path],
    out_dir: str | Path,
    human_traces_dir: str | Path | None = None,
    options: AnalysisOptions | None = None,
) -> dict[str, Any]:
    """Metric reports and flat plot-data files for completed sessions.

    Produces a Table-style summary (one row per source/intervention and
    variable), per-bidder-count reserve curves, per-agent selling-tactic
    rates, long-format action distributions, per-pair distribution
    distances against the paired human traces, and entropy ECDFs. Failed
    sessions are excluded and listed in the report header.
    """
    opts = options or AnalysisOptions()
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)

    transcripts: list[SessionTranscript] = []
    excluded: list[dict[str, str]] = []
    task = None
    for run_dir in run_dirs:
        manifest = RunManifest.load(Path(run_dir))
        task = manifest.config.task if task is None else task
        if manifest.config.task != task:
            raise ConfigError("cannot mix tasks in one analysis")
        for session_id, entry in sorted(manifest.sessions.items()):
            if entry["status"] == "complete":
                transcripts.append(read_transcript(Path(run_dir) / entry["transcript"]))
            else:
                excluded.append({"session": session_id, "status": entry["status"], "error": entry.get("error") or ""})
    if not transcripts:
        raise ConfigError("no completed sessions to analyze")

    humans: dict[int, SessionTranscript] = {}
    if human_traces_dir is not None:
        humans = _load_trace_dir(str(human_traces_dir))

    by_condition: dict[tuple[str, str], list[SessionTranscript]] = {}
    for t in transcripts:
        by_condition.setdefault((t.source, t.intervention), []).append(t)
    for group in by_condition.values():
        group.sort(key=lambda t: (t.replication, t.profile_index or 0))

    reports: list[dict[str, Any]] = []
    summary_rows: list[dict[str, Any]] = []
    dist_rows: list[dict[str, Any]] = []
    ks_rows: list[dict[str, Any]] = []
    entropy_rows: list[dict[str, Any]] = []
    reserve_rows: list[dict[str, Any]] = []
    rate_rows: list[dict[str, Any]] = []

    human_list = [humans[k] for k in sorted(humans)] if humans else []
    if human_list:
        _append_population_rows(
            "human", "observed", human_list, task, opts,
            summary_rows, dist_rows, entropy_rows, reserve_rows, rate_rows,
        )

    for (source, intervention), group in sorted(by_condition.items()):
        _append_population_rows(
            source, intervention, group, task, opts,
            summary_rows, dist_rows, entropy_rows, reserve_rows, rate_rows,
        )
        per_agent = [metrics_mod.agent_metrics(t, opts.window) for t in group]
        report = metrics_mod.MetricReport(
            task=task, source=source, intervention=intervention, per_agent=per_agent
        )
        pooled_actions = [r.action for t in group for r in _window_rounds(t, opts.window)]
        pooled_profits = [r.profit for t in group for r in _window_rounds(t, opts.window)]
        report.population = {
            "sessions": len(group),
            "action": metrics_mod.summary_stats(pooled_actions),
            "profit": metrics_mod.summary_stats(pooled_profits),
            "pooled_entropy_bits": metrics_mod.behavioral_entropy(
                pooled_actions, opts.entropy_bin_width
            ),
            "mean_agent_entropy_bits": float(np.mean([row["entropy_bits"] for row in per_agent])),
        }
        if humans:
            pair_ks, unpaired = [], []
            for t in group:
                human = humans.get(t.profile_index)
                if human is None:
                    unpaired.append(t.agent_id)
                    continue
                a, b = _overlap_actions(t, human, opts.ks_window)
                if not a:
                    unpaired.append(t.agent_id)
                    continue
                d = metrics_mod.ks_distance(a, b)
                pair_ks.append(d)
                ks_rows.append(
                    {
                        "source": source,
                        "intervention": intervention,
                        "replication": t.replication,
                        "agent_id": t.agent_id,
                        "ks_distance": d,
                    }
                )
            if unpaired:
                raise ConfigError(
                    f"{source}/{intervention}: no paired human trace for agents: "
                    + ", ".join(sorted(set(unpaired)))
                )
            report.tests["mean_ks_vs_human"] = float(np.mean(pair_ks))
            rep1 = [
                row["ks_distance"]
                for row in ks_rows
                if row["source"] == source and row["intervention"] == intervention and row["replication"] == 1
            ]
            report.tests["mean_ks_vs_human_rep1"] = float(np.mean(rep1)) if rep1 else None
            human_profit = [sum(r.profit for r in _window_rounds(h, opts.window)) for h in human_list]
            agent_profit = [row["total_profit"] for row in per_agent]
            if len(agent_profit) >= 2 and len(human_profit) >= 2:
                tstat, pval = metrics_mod.welch_t_test(agent_profit, human_profit)
                report.tests["welch_total_profit_vs_human"] = {"t": tstat, "p": pval}
        if len({t.replication for t in group}) > 1:
            report.tests["cross_replication_pearson"] = _replication_consistency(group)
        reports.append(
            {
                "task": report.task,
                "source": report.source,
                "intervention": report.intervention,
                "population": report.population,
                "tests": report.tests,
                "per_agent": report.per_agent,
            }
        )

    _write_csv(out / "summary.csv", ["source", "intervention", "variable", "mean", "sd", "min", "max", "S", "n"], summary_rows)
    _write_csv(out / "action_distribution.csv", None, dist_rows)
    _write_csv(out / "entropy_ecdf.csv", ["source", "intervention", "entropy_bits", "cum_frac"], entropy_rows)
    if task == AUCTION:
        _write_csv(out / "reserve_by_bidders.csv", ["source", "intervention", "num_bidders", "mean", "ci_low", "ci_high", "n_obs"], reserve_rows)
        _write_csv(out / "str_pcr.csv", ["source", "intervention", "replication", "agent_id", "str", "pcr", "pcr_defined"], rate_rows)
    if ks_rows:
        _write_csv(out / "ks_distances.csv", ["source", "intervention", "replication", "agent_id", "ks_distance"], ks_rows)

    report_doc = {
        "schema": "gameaudit.analysis.v1",
        "task": task,
        "options": asdict(opts),
        "excluded_sessions": excluded,
        "conditions": reports,
    }
    atomic_write_text(out / "report.json", canonical_json(report_doc) + "\n")
    files = sorted(str(p.name) for p in out.iterdir() if p.is_file())
    return {"out_dir": str(out), "files": files, "conditions": len(reports), "excluded": len(excluded)}


def _replication_consistency(group: list[SessionTranscript]) -> dict[str, Any]:
    """Pairwise action-sequence and profit correlations across replications
    of the same profile; deterministic agents come out at exactly 1."""
    by_profile: dict[int, dict[int, SessionTranscript]] = {}
    for t in group:
        by_profile.setdefault(t.profile_index or 0, {})[t.replication] = t
    action_rs, profit_rs = [], []
    for reps in by_profile.values():
        keys = sorted(reps)
        for i in range(len(keys)):
            for j in range(i + 1, len(keys)):
                a, b = reps[keys[i]], reps[keys[j]]
                if len(a.actions) != len(b.actions):
                    continue
                try:
                    action_rs.append(metrics_mod.pearson_r(a.actions, b.actions))
                except Exception:
                    # constant sequences: identical means perfectly consistent
                    action_rs.append(1.0 if a.actions == b.actions else 0.0)
                try:
                    profit_rs.append(metrics_mod.pearson_r(a.profits, b.profits))
                except Exception:
                    profit_rs.append(1.0 if a.profits == b.profits else 0.0)
    return {
        "mean_action_r": float(np.mean(action_rs)) if action_rs else None,
        "min_action_r": float(np.min(action_rs)) if action_rs else None,
        "mean_profit_r": float(np.mean(profit_rs)) if profit_rs else None,
        "pairs": len(action_rs),
    }


def _append_population_rows(
    source, intervention, group, task, opts,
    summary_rows, dist_rows, entropy_rows, reserve_rows, rate_rows,
) -> None:
    pooled_actions = [r.action for t in group for r in _window_rounds(t, opts.window)]
    pooled_profits = [r.profit for t in group for r in _window_rounds(t, opts.window)]
    action_name = "reserve_price" if task == AUCTION else "order_quantity"
    for variable, values in ((action_name, pooled_actions), ("profit", pooled_profits)):
        stats = metrics_mod.summary_stats(values)
        # column "S" is Shannon entropy (bits) of the pooled values
        stats["S"] = metrics_mod.behavioral_entropy(values, opts.entropy_bin_width)
        stats.pop("entropy_bits")
        summary_rows.append({"source": source, "intervention": intervention, "variable": variable, **stats})
    for t in group:
        for r in _window_rounds(t, opts.window):
            row = {
                "source": source,
                "intervention": intervention,
                "replication": t.replication,
                "agent_id": t.agent_id,
                "round": r.round_index,
                "action": r.action,
                "profit": r.profit,
            }
            if task == NEWSVENDOR:
                row["bias"] = r.bias
            else:
                row["num_bidders"] = r.num_bidders
                row["sale"] = int(r.sale)
            dist_rows.append(row)
    agent_entropies = sorted(
        metrics_mod.behavioral_entropy(
            [r.action for r in _window_rounds(t, opts.window)], opts.entropy_bin_width
        )
        for t in group
    )
    for value, frac in metrics_mod.ecdf_table(agent_entropies):
        entropy_rows.append(
            {"source": source, "intervention": intervention, "entropy_bits": value, "cum_frac": frac}
        )
    if task == AUCTION:
        windowed = []
        for t in group:
            clone = SessionTranscript(task=t.task, agent_id=t.agent_id, seed=t.seed, config_hash=t.config_hash)
            clone.rounds = _window_rounds(t, opts.window)
            windowed.append(clone)
        groups = metrics_mod.reserve_by_bidder_count(windowed, ci_method=opts.ci_method)
        for n, stats in groups.items():
            reserve_rows.append({"source": source, "intervention": intervention, "num_bidders": n, **stats})
        for t in group:
            rounds = _window_rounds(t, opts.window)
            rate_rows.append(
                {
                    "source": source,
                    "intervention": intervention,
                    "replication": t.replication,
                    "agent_id": t.agent_id,
                    "str": metrics_mod.sell_through_rate([r.sale for r in rounds]),
                    "pcr": metrics_mod.premium_capture_rate(rounds),
                    "pcr_defined": int(any(r.sale for r in rounds)),
                }
            )


def _write_csv(path: Path, fieldnames: list[str] | None, rows: list[dict[str, Any]]) -> None:
    if not rows:
        return
    if fieldnames is None:
        fieldnames = list(rows[0].keys())
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=fieldnames, lineterminator="\n")
    writer.writeheader()
    for row in rows:
        writer.writerow(row)
    atomic_write_text(path, buf.getvalue())
