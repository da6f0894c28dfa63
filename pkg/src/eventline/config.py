"""Run configuration: one JSON file, unknown keys rejected at every level."""

from __future__ import annotations

import dataclasses
import json
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, get_args, get_origin, get_type_hints

from .gateway import IdentityEmbedder, OpenAICompatBackend, RetryPolicy
from .refinery import AgentSettings, RefinementConfig
from .simulate import HashingEmbedder, SimulatedAgent
from .templates import STAGE_REQUIREMENTS, TemplateError, load_templates

BACKEND_KINDS = ("openai", "simulated", "identity", "hashing")
ROLES = ("extraction", "feedback", "generation", "summarizer", "judge", "embedder")


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class RetryConfig:
    max_attempts: int = 3
    base_backoff: float = 1.0
    max_requests_per_minute: int = 60


@dataclass(frozen=True)
class BackendConfig:
    kind: str = "openai"
    tag: str = ""
    base_url: str = ""
    model_name: str = ""
    api_key_env: str | None = None
    temperature: float = 0.0
    max_output_tokens: int = 4096
    timeout: float = 120.0
    retry: RetryConfig = field(default_factory=RetryConfig)

    def __post_init__(self) -> None:
        if self.kind not in BACKEND_KINDS:
            raise ConfigError(f"backend kind must be one of {BACKEND_KINDS}, got {self.kind!r}")
        if self.kind == "openai" and not (self.base_url and self.model_name):
            raise ConfigError("openai backends need base_url and model_name")
        if not 0 <= self.temperature <= 1:
            raise ConfigError("temperature must be in [0, 1]")

    @property
    def label(self) -> str:
        return self.tag or self.model_name or self.kind

    def settings(self) -> AgentSettings:
        return AgentSettings(self.temperature, self.max_output_tokens, self.model_name)

    def policy(self) -> RetryPolicy:
        return RetryPolicy(**dataclasses.asdict(self.retry))

    def build(self):
        if self.kind == "openai":
            return OpenAICompatBackend(self.base_url, self.model_name, self.api_key_env, self.timeout, name=self.label)
        if self.kind == "simulated":
            return SimulatedAgent(name=self.label, model_name=self.model_name or self.label)
        if self.kind == "identity":
            return IdentityEmbedder()
        return HashingEmbedder()


@dataclass(frozen=True)
class BackendsConfig:
    extraction: BackendConfig | None = None
    feedback: BackendConfig | None = None
    generation: list[BackendConfig] = field(default_factory=list)
    summarizer: BackendConfig | None = None
    judge: BackendConfig | None = None
    embedder: BackendConfig | None = None


@dataclass(frozen=True)
class PathsConfig:
    templates_dir: str | None = None
    corpus_file: str = "corpus.jsonl"
    output_dir: str = "runs"


@dataclass(frozen=True)
class GenerationConfig:
    failure_ceiling: float = 0.2
    retry_limit: int = 2


@dataclass(frozen=True)
class EvaluationConfig:
    test_fraction: float = 0.2
    n_test: int | None = None
    judge_pool: str = "test"  # "test" | "all"
    judge_swap: bool = True
    judge_retry_limit: int = 2
    structured_source: str = "gold"  # "gold" | "predicted"

    def __post_init__(self) -> None:
        if self.judge_pool not in ("test", "all"):
            raise ConfigError("judge_pool must be 'test' or 'all'")
        if self.structured_source not in ("gold", "predicted"):
            raise ConfigError("structured_source must be 'gold' or 'predicted'")


@dataclass(frozen=True)
class RunConfig:
    backends: BackendsConfig = field(default_factory=BackendsConfig)
    refinement: RefinementConfig = field(default_factory=RefinementConfig)
    paths: PathsConfig = field(default_factory=PathsConfig)
    generation: GenerationConfig = field(default_factory=GenerationConfig)
    evaluation: EvaluationConfig = field(default_factory=EvaluationConfig)
    concurrency: int = 1
    seed: int = 0
    ledger_max_attempts: int = 3

    def __post_init__(self) -> None:
        if self.concurrency < 1:
            raise ConfigError("concurrency must be >= 1")

    @property
    def output_dir(self) -> Path:
        return Path(self.paths.output_dir)

    @property
    def corpus_file(self) -> Path:
        return Path(self.paths.corpus_file)

    def templates(self):
        return load_templates(self.paths.templates_dir, STAGE_REQUIREMENTS)

    def backend(self, role: str) -> BackendConfig:
        cfg = getattr(self.backends, role)
        if not cfg:
            raise ConfigError(f"no backend configured for role {role!r}")
        return cfg


def _build(cls, data: Any, where: str):
    """Instantiate dataclass ``cls`` from plain JSON, rejecting unknown keys."""
    if not isinstance(data, dict):
        raise ConfigError(f"{where}: expected an object")
    hints = get_type_hints(cls)
    names = {f.name for f in dataclasses.fields(cls)}
    unknown = set(data) - names
    if unknown:
        raise ConfigError(f"{where}: unknown key(s) {sorted(unknown)}")
    kwargs = {}
    for key, value in data.items():
        kwargs[key] = _coerce(hints[key], value, f"{where}.{key}")
    try:
        return cls(**kwargs)
    except ConfigError:
        raise
    except (TypeError, ValueError) as e:
        raise ConfigError(f"{where}: {e}") from e


def _coerce(tp, value, where: str):
    origin = get_origin(tp)
    args = [a for a in get_args(tp) if a is not type(None)]
    if value is None:
        return None
    if origin is list:
        (item,) = get_args(tp)
        values = value if isinstance(value, list) else [value]
        return [_coerce(item, v, f"{where}[{i}]") for i, v in enumerate(values)]
    if args and origin is not None and len(args) == 1:  # Optional[X]
        return _coerce(args[0], value, where)
    if dataclasses.is_dataclass(tp):
        return _build(tp, value, where)
    if tp is float and isinstance(value, int) and not isinstance(value, bool):
        return float(value)
    if isinstance(tp, type) and not isinstance(value, tp):
        raise ConfigError(f"{where}: expected {tp.__name__}, got {type(value).__name__}")
    return value


def load_config(path: str | Path, seed: int | None = None) -> RunConfig:
    """Read and validate a config file; relative paths resolve against its directory."""
    path = Path(path)
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
    except (OSError, ValueError) as e:
        raise ConfigError(f"cannot read config {path}: {e}") from e
    cfg = _build(RunConfig, data, "config")
    base = path.parent.resolve()

    def resolve(p: str | None) -> str | None:
        return None if p is None else os.path.normpath(base / p)

    paths = PathsConfig(resolve(cfg.paths.templates_dir), resolve(cfg.paths.corpus_file), resolve(cfg.paths.output_dir))
    cfg = dataclasses.replace(cfg, paths=paths, seed=cfg.seed if seed is None else seed)
    try:
        cfg.templates()
    except (TemplateError, OSError) as e:
        raise ConfigError(str(e)) from e
    return cfg
