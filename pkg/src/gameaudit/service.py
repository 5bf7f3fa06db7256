"""HTTP service wrapping the experiment orchestrator.

One endpoint per harness verb: validate a config, run or resume an
experiment, analyze completed runs, generate stand-in human traces, lint
the prompt templates, and query the strategy oracles. Experiments run
synchronously within the request; the run directory carries all state, so
an interrupted request is resumed by posting the same config again with
resume=true. Template placeholders are linted at startup.
"""

from __future__ import annotations

from typing import Literal, Optional

from fastapi import FastAPI, HTTPException
from pydantic import BaseModel, ConfigDict, Field

from gameaudit import __version__
from gameaudit import interventions as iv
from gameaudit.auction import ValuationDistribution, optimal_reserve
from gameaudit.errors import ConfigError, HarnessError, ValidationError
from gameaudit.newsvendor import optimal_quantity
from gameaudit.orchestrator import (
    AnalysisOptions,
    ExperimentConfig,
    analyze,
    enumerate_sessions,
    generate_synthetic_humans,
    run_experiment,
)

STATUS_OK = "ok"
STATUS_PARTIAL = "partial_failures"
STATUS_REMOTE_FAILURE = "remote_protocol_failure"


class AgentSourceModel(BaseModel):
    model_config = ConfigDict(extra="forbid")

    kind: Literal["constant", "oracle", "demand_chasing", "synthetic_human", "replay", "remote"]
    label: str = ""
    value: Optional[int] = None
    trace_dir: Optional[str] = None
    model: Optional[str] = None
    endpoint: Optional[str] = None
    temperature: float = 1.0
    max_retries: int = 3
    timeout_s: float = 60.0
    backoff_s: float = 1.0
    credential_env: str = "GAMEAUDIT_API_KEY"


class InterventionModel(BaseModel):
    model_config = ConfigDict(extra="forbid")

    level: Literal["intrinsicality", "instruction", "imitation"] = "intrinsicality"
    risk: Optional[Literal["seeking", "averse"]] = None
    imitation_variant: Optional[Literal["direct", "context_aware", "theory_guided"]] = None
    context_rounds: Optional[int] = None


class ExperimentConfigModel(BaseModel):
    model_config = ConfigDict(extra="forbid")

    task: Literal["auction", "newsvendor"] = "auction"
    agents: list[AgentSourceModel]
    interventions: list[InterventionModel] = Field(default_factory=lambda: [InterventionModel()])
    num_agents: int = 40
    rounds: Optional[int] = None
    replications: int = 3
    environment_seed: int = 0
    profile_seed: int = 1
    agent_seed: int = 2
    distribution: Literal["cube_root", "cube", "split"] = "split"
    schedule_file: Optional[str] = None
    profiles_file: Optional[str] = None
    human_traces_dir: Optional[str] = None
    output_dir: str = "runs/experiment"
    workers: int = 1
    requests_per_minute: Optional[float] = None
    request_budget: Optional[int] = None
    max_sessions_per_run: Optional[int] = None

    def to_config(self) -> ExperimentConfig:
        return ExperimentConfig.from_dict(self.model_dump())


class ValidateResponse(BaseModel):
    ok: bool
    config_hash: str
    task: str
    sessions_planned: int


class RunRequest(BaseModel):
    config: ExperimentConfigModel
    resume: bool = False


class SessionFailure(BaseModel):
    session: str
    error: str


class RunResponse(BaseModel):
    status: str
    config_hash: str
    output_dir: str
    counts: dict[str, int]
    failures: list[SessionFailure]


class AnalyzeRequest(BaseModel):
    run_dirs: list[str]
    out_dir: str
    human_traces_dir: Optional[str] = None
    window: Optional[tuple[int, int]] = None
    ks_window: Optional[tuple[int, int]] = None
    entropy_bin_width: Optional[int] = None
    ci_method: Literal["normal", "bootstrap"] = "normal"


class AnalyzeResponse(BaseModel):
    out_dir: str
    files: list[str]
    conditions: int
    excluded: int


class GenerateHumansRequest(BaseModel):
    task: Literal["auction", "newsvendor"] = "auction"
    n: int = 40
    seed: int = 0
    out_dir: str
    rounds: Optional[int] = None
    distribution: Literal["cube_root", "cube", "split"] = "split"


class GenerateHumansResponse(BaseModel):
    files: list[str]


class TemplateLintEntry(BaseModel):
    template: str
    ok: bool
    placeholders: list[str] = Field(default_factory=list)
    sha256: str = ""
    error: Optional[str] = None


class TemplateLintResponse(BaseModel):
    ok: bool
    templates: list[TemplateLintEntry]


class AuctionOracleRequest(BaseModel):
    distribution: Literal["cube_root", "cube"] = "cube_root"
    num_samples: int = 200_000
    grid_step: int = 1
    seed: int = 0


class AuctionOracleResponse(BaseModel):
    distribution: str
    r_star: int
    curve: list[tuple[int, float]]


class NewsvendorOracleRequest(BaseModel):
    pairs: list[tuple[float, float]]


class NewsvendorOracleRow(BaseModel):
    price: float
    cost: float
    q_star: int


class NewsvendorOracleResponse(BaseModel):
    rows: list[NewsvendorOracleRow]


class HealthResponse(BaseModel):
    status: str
    version: str


def _run_status(manifest) -> str:
    counts = manifest.counts()
    if counts["failed"] == 0:
        return STATUS_OK
    remote_sources = {
        s.label for s in manifest.config.agents if s.kind == "remote"
    }
    if remote_sources:
        remote_complete = 0
        for sid, entry in manifest.sessions.items():
            if sid.split("__")[0] in remote_sources and entry["status"] == "complete":
                remote_complete += 1
        if remote_complete == 0:
            return STATUS_REMOTE_FAILURE
    return STATUS_PARTIAL


def create_app(client_factory=None) -> FastAPI:
    """Build the service; client_factory injects a stub HTTP client for
    remote-model calls in tests."""
    lint = iv.lint_templates()
    broken = [e["template"] for e in lint if not e["ok"]]
    if broken:
        raise ConfigError(f"template lint failed at startup: {broken}")

    app = FastAPI(title="gameaudit", version=__version__)

    def bad_request(exc: Exception) -> HTTPException:
        return HTTPException(status_code=400, detail=str(exc))

    @app.get("/health", response_model=HealthResponse)
    def health() -> HealthResponse:
        return HealthResponse(status="ok", version=__version__)

    @app.post("/config/validate", response_model=ValidateResponse)
    def validate_config(model: ExperimentConfigModel) -> ValidateResponse:
        try:
            config = model.to_config()
            config.validate_inputs()
        except (ConfigError, ValidationError) as exc:
            raise bad_request(exc)
        return ValidateResponse(
            ok=True,
            config_hash=config.config_hash(),
            task=config.task,
            sessions_planned=len(enumerate_sessions(config)),
        )

    @app.post("/experiments/run", response_model=RunResponse)
    def experiments_run(req: RunRequest) -> RunResponse:
        try:
            config = req.config.to_config()
            manifest = run_experiment(config, resume=req.resume, client_factory=client_factory)
        except (ConfigError, ValidationError) as exc:
            raise bad_request(exc)
        failures = [
            SessionFailure(session=sid, error=entry["error"] or "")
            for sid, entry in sorted(manifest.sessions.items())
            if entry["status"] == "failed"
        ]
        return RunResponse(
            status=_run_status(manifest),
            config_hash=manifest.config_hash,
            output_dir=str(manifest.run_dir),
            counts=manifest.counts(),
            failures=failures,
        )

    @app.post("/analysis/run", response_model=AnalyzeResponse)
    def analysis_run(req: AnalyzeRequest) -> AnalyzeResponse:
        options = AnalysisOptions(
            window=req.window,
            ks_window=req.ks_window,
            entropy_bin_width=req.entropy_bin_width,
            ci_method=req.ci_method,
        )
        try:
            result = analyze(
                req.run_dirs, req.out_dir, human_traces_dir=req.human_traces_dir, options=options
            )
        except (ConfigError, ValidationError, FileNotFoundError) as exc:
            raise bad_request(exc)
        return AnalyzeResponse(**result)

    @app.post("/humans/generate", response_model=GenerateHumansResponse)
    def humans_generate(req: GenerateHumansRequest) -> GenerateHumansResponse:
        try:
            paths = generate_synthetic_humans(
                req.task, req.n, req.seed, req.out_dir, rounds=req.rounds, distribution=req.distribution
            )
        except (ConfigError, ValidationError) as exc:
            raise bad_request(exc)
        return GenerateHumansResponse(files=[str(p) for p in paths])

    @app.post("/templates/lint", response_model=TemplateLintResponse)
    def templates_lint() -> TemplateLintResponse:
        report = iv.lint_templates()
        entries = [TemplateLintEntry(**e) for e in report]
        return TemplateLintResponse(ok=all(e.ok for e in entries), templates=entries)

    @app.post("/oracle/auction", response_model=AuctionOracleResponse)
    def oracle_auction(req: AuctionOracleRequest) -> AuctionOracleResponse:
        try:
            r_star, curve = optimal_reserve(
                ValuationDistribution(req.distribution),
                num_samples=req.num_samples,
                grid_step=req.grid_step,
                seed=req.seed,
            )
        except HarnessError as exc:
            raise bad_request(exc)
        return AuctionOracleResponse(distribution=req.distribution, r_star=r_star, curve=curve)

    @app.post("/oracle/newsvendor", response_model=NewsvendorOracleResponse)
    def oracle_newsvendor(req: NewsvendorOracleRequest) -> NewsvendorOracleResponse:
        rows = []
        for price, cost in req.pairs:
            try:
                rows.append(
                    NewsvendorOracleRow(price=price, cost=cost, q_star=optimal_quantity(price, cost))
                )
            except HarnessError as exc:
                raise bad_request(exc)
        return NewsvendorOracleResponse(rows=rows)

    return app
