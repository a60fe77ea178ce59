"""Run configuration: YAML schema, validation, and defaults.

Schema (all paths resolve relative to the config file's directory):

    corpus:
      local: <dir of local guideline files>
      international: <dir of international guideline files>
    scenarios: <dir of scenario files>
    keys: <dir of JSON answer keys>
    replay: <JSONL replay fixture>            # required by replay backends
    out: <output directory>
    seed: <u64>                               # embedder seed
    embedder: {dims: 64}
    tree_levels: [128, 512, 2048]
    retriever: {top_k: 30, merge_threshold: 0.5, max_context_nodes: null}
    generation:
      temperature: 0.1
      top_p: 0.90
      max_tokens: 2048
      short_context_mode: false
    thresholds: [0.65, 0.75, 0.85]
    reference_system: GPT4_international
    repeats: {default: 1, reference: 4}
    parallelism: 1
    systems:
      - {model: GPT4, knowledge_base: international, backend: replay}
      - {model: GPT4, knowledge_base: none, backend: replay}
      # http backends take endpoint + auth_env (token env var name):
      # - {model: GPT4, knowledge_base: local, backend: http,
      #    endpoint: "https://...", auth_env: CHAT_API_TOKEN}
    human_answers: <JSONL of structured human records>   # optional
    score_sheets: <CSV of Likert score sheets>           # optional
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import yaml

from ..clinical import GRADING_THRESHOLDS
from ..corpus import DEFAULT_LEVEL_SIZES
from ..embedding import DEFAULT_DIMS
from ..generation import GenerationConfig, KnowledgeBase, SystemId
from ..retrieval import RetrieverConfig

__all__ = ["SystemSpec", "RunConfig", "load_config", "ConfigError"]


class ConfigError(ValueError):
    """Invalid or incomplete run configuration."""


@dataclass(frozen=True)
class SystemSpec:
    system: SystemId
    backend: str = "replay"
    endpoint: str | None = None
    auth_env: str | None = None

    def __post_init__(self) -> None:
        if self.backend not in ("replay", "http"):
            raise ConfigError(f"unknown backend {self.backend!r}")
        if self.backend == "http" and not self.endpoint:
            raise ConfigError(
                f"system {self.system.rendered!r}: http backend needs an endpoint"
            )


@dataclass
class RunConfig:
    corpus_local: Path | None
    corpus_international: Path | None
    scenarios: Path
    keys: Path
    out: Path
    systems: tuple[SystemSpec, ...]
    replay: Path | None = None
    seed: int = 0
    embedder_dims: int = DEFAULT_DIMS
    tree_levels: tuple[int, ...] = DEFAULT_LEVEL_SIZES
    retriever: RetrieverConfig = field(default_factory=RetrieverConfig)
    generation: GenerationConfig = field(default_factory=GenerationConfig)
    thresholds: tuple[float, ...] = GRADING_THRESHOLDS
    reference_system: str = "GPT4_international"
    repeats_default: int = 1
    repeats_reference: int = 4
    parallelism: int = 1
    human_answers: Path | None = None
    score_sheets: Path | None = None

    def validate(self) -> None:
        rendered = [spec.system.rendered for spec in self.systems]
        if len(set(rendered)) != len(rendered):
            raise ConfigError("duplicate systems in configuration")
        if self.reference_system not in rendered:
            raise ConfigError(
                f"reference system {self.reference_system!r} is not among the "
                f"configured systems {rendered}"
            )
        for name, path in (
            ("scenarios", self.scenarios),
            ("keys", self.keys),
        ):
            if not path.is_dir():
                raise ConfigError(f"{name} directory does not exist: {path}")
        needs_corpus = {
            spec.system.knowledge_base for spec in self.systems
        } - {KnowledgeBase.NONE}
        for kb in needs_corpus:
            directory = (
                self.corpus_local
                if kb is KnowledgeBase.LOCAL
                else self.corpus_international
            )
            if directory is None or not directory.is_dir():
                raise ConfigError(f"missing corpus directory for {kb.value!r} systems")
        if any(spec.backend == "replay" for spec in self.systems):
            if self.replay is None or not self.replay.is_file():
                raise ConfigError("replay fixture file is required and missing")
        for name, path in (
            ("human_answers", self.human_answers),
            ("score_sheets", self.score_sheets),
        ):
            if path is not None and not path.is_file():
                raise ConfigError(f"{name} file does not exist: {path}")
        if self.parallelism < 1:
            raise ConfigError("parallelism must be >= 1")
        if self.repeats_default < 1 or self.repeats_reference < 1:
            raise ConfigError("repeat counts must be >= 1")
        for threshold in self.thresholds:
            if not 0.0 < threshold <= 1.0:
                raise ConfigError(f"threshold {threshold} outside (0, 1]")

    def repeats_for(self, system: SystemId) -> int:
        if system.rendered == self.reference_system:
            return self.repeats_reference
        return self.repeats_default


def _resolve(base: Path, raw: str | None) -> Path | None:
    if raw is None:
        return None
    path = Path(raw)
    return path if path.is_absolute() else (base / path)


def load_config(
    path: Path | str,
    *,
    out_override: Path | str | None = None,
    seed_override: int | None = None,
) -> RunConfig:
    """Load and validate a YAML run configuration."""
    path = Path(path)
    try:
        data = yaml.safe_load(path.read_text(encoding="utf-8")) or {}
    except yaml.YAMLError as exc:
        raise ConfigError(f"{path}: invalid YAML: {exc}") from exc
    base = path.parent

    corpus = data.get("corpus", {}) or {}
    retriever_raw = data.get("retriever", {}) or {}
    generation_raw = data.get("generation", {}) or {}
    repeats_raw = data.get("repeats", {}) or {}
    embedder_raw = data.get("embedder", {}) or {}

    systems: list[SystemSpec] = []
    for raw in data.get("systems", []) or []:
        try:
            kb = KnowledgeBase(str(raw.get("knowledge_base", "none")).lower())
        except ValueError:
            raise ConfigError(
                f"invalid knowledge_base {raw.get('knowledge_base')!r}"
            ) from None
        systems.append(
            SystemSpec(
                system=SystemId(model_name=str(raw["model"]), knowledge_base=kb),
                backend=str(raw.get("backend", "replay")),
                endpoint=raw.get("endpoint"),
                auth_env=raw.get("auth_env"),
            )
        )
    if not systems:
        raise ConfigError("configuration lists no systems")

    try:
        retriever = RetrieverConfig(
            top_k=int(retriever_raw.get("top_k", 30)),
            merge_threshold=float(retriever_raw.get("merge_threshold", 0.5)),
            max_context_nodes=(
                None
                if retriever_raw.get("max_context_nodes") is None
                else int(retriever_raw["max_context_nodes"])
            ),
        )
        generation = GenerationConfig(
            temperature=float(generation_raw.get("temperature", 0.1)),
            top_p=float(generation_raw.get("top_p", 0.90)),
            max_tokens=int(generation_raw.get("max_tokens", 2048)),
            short_context_mode=bool(generation_raw.get("short_context_mode", False)),
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc

    out = _resolve(base, data.get("out", "out"))
    if out_override is not None:
        out = Path(out_override)
    seed = int(data.get("seed", 0))
    if seed_override is not None:
        seed = seed_override

    config = RunConfig(
        corpus_local=_resolve(base, corpus.get("local")),
        corpus_international=_resolve(base, corpus.get("international")),
        scenarios=_resolve(base, data.get("scenarios", "scenarios")),
        keys=_resolve(base, data.get("keys", "keys")),
        out=out,
        systems=tuple(systems),
        replay=_resolve(base, data.get("replay")),
        seed=seed,
        embedder_dims=int(embedder_raw.get("dims", DEFAULT_DIMS)),
        tree_levels=tuple(int(s) for s in data.get("tree_levels", DEFAULT_LEVEL_SIZES)),
        retriever=retriever,
        generation=generation,
        thresholds=tuple(float(t) for t in data.get("thresholds", GRADING_THRESHOLDS)),
        reference_system=str(data.get("reference_system", "GPT4_international")),
        repeats_default=int(repeats_raw.get("default", 1)),
        repeats_reference=int(repeats_raw.get("reference", 4)),
        parallelism=int(data.get("parallelism", 1)),
        human_answers=_resolve(base, data.get("human_answers")),
        score_sheets=_resolve(base, data.get("score_sheets")),
    )
    config.validate()
    return config
