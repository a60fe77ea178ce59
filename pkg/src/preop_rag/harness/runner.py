"""Experiment execution and line-delimited record persistence.

One run record captures everything the harness knows about a single
(system, scenario, repeat) call: the verbatim response, both latencies,
the extracted structured answers, and the grades at every configured
threshold. Records persist as line-delimited JSON sorted by key, so a rerun
over an existing output directory skips finished keys and regenerating
reports from the same records is byte-identical.
"""

from __future__ import annotations

import json
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

from ..clinical import (
    AnswerKey,
    Grade,
    ResponseRecord,
    Scenario,
    extract_record,
    grade,
    load_answer_keys,
    load_scenarios,
)
from ..corpus import NodeTree, build_tree, load_corpus
from ..embedding import EmbedderConfig, HashEmbedder
from ..generation import (
    GenerationConfig,
    HttpChatBackend,
    KnowledgeBase,
    ReplayBackend,
    assemble_prompt,
    generate,
)
from ..retrieval import RetrieverConfig, VectorIndex, index_build, run_query
from .config import RunConfig, SystemSpec

RECORD_SCHEMA = "run-record/1"
RECORDS_FILENAME = "records.jsonl"

__all__ = [
    "RunRecord",
    "RunSummary",
    "run_experiment",
    "load_records",
    "save_records",
    "regrade_records",
]


@dataclass(frozen=True)
class RunRecord:
    system: str
    scenario_id: str
    repeat_index: int
    text: str
    retrieval_latency_ms: float
    generation_latency_ms: float
    truncated: bool
    record: ResponseRecord
    grades: dict[float, Grade]

    @property
    def key(self) -> tuple[str, str, int]:
        return (self.system, self.scenario_id, self.repeat_index)


@dataclass
class RunSummary:
    generated: int
    skipped: int
    failures: list[tuple[tuple[str, str, int], str]]
    records: list[RunRecord]


def _record_to_json(record: RunRecord) -> dict:
    return {
        "schema": RECORD_SCHEMA,
        "system": record.system,
        "scenario_id": record.scenario_id,
        "repeat_index": record.repeat_index,
        "text": record.text,
        "retrieval_latency_ms": record.retrieval_latency_ms,
        "generation_latency_ms": record.generation_latency_ms,
        "truncated": record.truncated,
        "answers": {
            "delay": record.record.delay_answer,
            "triage": record.record.triage_answer,
            "carbo": record.record.carbo_answer,
        },
        "matched_items": {
            category: list(labels)
            for category, labels in record.record.matched_items.items()
        },
        "hallucination_hits": list(record.record.hallucination_hits),
        "grades": {
            repr(threshold): {
                "categories": dict(g.category_correct),
                "fitness": g.fitness_correct,
                "triage": g.triage_correct,
                "carbo": g.carbo_correct,
                "hallucination": g.hallucination,
                "overall": g.overall_correct,
            }
            for threshold, g in sorted(record.grades.items())
        },
    }


def _record_from_json(data: dict) -> RunRecord:
    if data.get("schema") != RECORD_SCHEMA:
        raise ValueError(f"unsupported record schema {data.get('schema')!r}")
    response = ResponseRecord(
        scenario_id=data["scenario_id"],
        system=data["system"],
        repeat_index=int(data["repeat_index"]),
        delay_answer=data["answers"]["delay"],
        triage_answer=data["answers"]["triage"],
        carbo_answer=data["answers"]["carbo"],
        matched_items={
            category: tuple(labels)
            for category, labels in data.get("matched_items", {}).items()
        },
        hallucination_hits=tuple(data.get("hallucination_hits", ())),
    )
    grades: dict[float, Grade] = {}
    for raw_threshold, g in data.get("grades", {}).items():
        threshold = float(raw_threshold)
        grades[threshold] = Grade(
            threshold=threshold,
            category_correct=dict(g["categories"]),
            fitness_correct=g["fitness"],
            triage_correct=g["triage"],
            carbo_correct=g["carbo"],
            hallucination=g["hallucination"],
            overall_correct=g["overall"],
        )
    return RunRecord(
        system=data["system"],
        scenario_id=data["scenario_id"],
        repeat_index=int(data["repeat_index"]),
        text=data["text"],
        retrieval_latency_ms=float(data["retrieval_latency_ms"]),
        generation_latency_ms=float(data["generation_latency_ms"]),
        truncated=bool(data.get("truncated", False)),
        record=response,
        grades=grades,
    )


def save_records(records: Iterable[RunRecord], path: Path | str) -> None:
    ordered = sorted(records, key=lambda r: r.key)
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8") as fh:
        for record in ordered:
            fh.write(json.dumps(_record_to_json(record), sort_keys=True) + "\n")


def load_records(path: Path | str) -> list[RunRecord]:
    records: list[RunRecord] = []
    with Path(path).open("r", encoding="utf-8") as fh:
        for line in fh:
            if line.strip():
                records.append(_record_from_json(json.loads(line)))
    return records


def _effective_retriever(config: RunConfig) -> RetrieverConfig:
    """Apply the short-context context-node cap on top of the retriever config."""
    cap = config.generation.context_node_cap
    if cap is None:
        return config.retriever
    current = config.retriever.max_context_nodes
    effective = min(cap, config.retriever.top_k)
    if current is not None:
        effective = min(current, effective)
    return RetrieverConfig(
        top_k=config.retriever.top_k,
        merge_threshold=config.retriever.merge_threshold,
        max_context_nodes=effective,
    )


class _CorpusBundle:
    """Trees and index for one knowledge base, built once per run."""

    def __init__(self, trees: Sequence[NodeTree], index: VectorIndex) -> None:
        self.trees = list(trees)
        self.index = index


def _build_corpora(
    config: RunConfig, embedder: HashEmbedder
) -> dict[KnowledgeBase, _CorpusBundle]:
    bundles: dict[KnowledgeBase, _CorpusBundle] = {}
    wanted = {spec.system.knowledge_base for spec in config.systems}
    for kb, directory in (
        (KnowledgeBase.LOCAL, config.corpus_local),
        (KnowledgeBase.INTERNATIONAL, config.corpus_international),
    ):
        if kb not in wanted or directory is None:
            continue
        docs = load_corpus(directory)
        trees = [build_tree(doc, config.tree_levels) for doc in docs]
        bundles[kb] = _CorpusBundle(trees, index_build(trees, embedder))
    return bundles


def _make_backend(spec: SystemSpec, config: RunConfig, replay: ReplayBackend | None):
    if spec.backend == "replay":
        if replay is None:
            raise ValueError("replay backend requested but no fixture configured")
        return replay
    return HttpChatBackend(
        endpoint=spec.endpoint or "",
        model=spec.system.model_name,
        auth_env=spec.auth_env,
    )


def _run_one(
    spec: SystemSpec,
    scenario: Scenario,
    key: AnswerKey,
    repeat_index: int,
    backend,
    bundles: dict[KnowledgeBase, _CorpusBundle],
    embedder: HashEmbedder,
    retriever: RetrieverConfig,
    generation_config: GenerationConfig,
    thresholds: Sequence[float],
) -> RunRecord:
    kb = spec.system.knowledge_base
    contexts = []
    retrieval_ms = 0.0
    if kb is not KnowledgeBase.NONE:
        bundle = bundles[kb]
        started = time.perf_counter()
        query = embedder.embed(scenario.free_text)
        contexts = run_query(bundle.index, bundle.trees, query, retriever)
        retrieval_ms = (time.perf_counter() - started) * 1000.0
    prompt = assemble_prompt(scenario, contexts, kb)
    result = generate(
        backend,
        prompt,
        generation_config,
        system=spec.system,
        scenario_id=scenario.id,
        repeat_index=repeat_index,
        retrieval_latency_ms=retrieval_ms,
    )
    response = extract_record(
        result.text, key, system=result.system, repeat_index=repeat_index
    )
    grades = {t: grade(response, key, t) for t in thresholds}
    return RunRecord(
        system=result.system,
        scenario_id=scenario.id,
        repeat_index=repeat_index,
        text=result.text,
        retrieval_latency_ms=result.retrieval_latency_ms,
        generation_latency_ms=result.generation_latency_ms,
        truncated=result.truncated,
        record=response,
        grades=grades,
    )


def run_experiment(config: RunConfig) -> RunSummary:
    """Execute every (system, scenario, repeat) and persist the records.

    Existing keys in the output file are skipped (resumable); per-key
    failures are collected in the summary without aborting other keys.
    """
    config.validate()
    scenarios = load_scenarios(config.scenarios)
    keys = load_answer_keys(config.keys)
    missing = [s.id for s in scenarios if s.id not in keys]
    if missing:
        raise ValueError(f"scenarios without answer keys: {missing}")

    embedder = HashEmbedder(EmbedderConfig(dims=config.embedder_dims, seed=config.seed))
    bundles = _build_corpora(config, embedder)
    retriever = _effective_retriever(config)
    replay = (
        ReplayBackend.from_jsonl(config.replay)
        if config.replay is not None and config.replay.is_file()
        else None
    )

    records_path = config.out / RECORDS_FILENAME
    existing = load_records(records_path) if records_path.is_file() else []
    done = {record.key for record in existing}

    tasks = []
    for spec in sorted(config.systems, key=lambda s: s.system.rendered):
        backend = _make_backend(spec, config, replay)
        for scenario in scenarios:
            for repeat_index in range(1, config.repeats_for(spec.system) + 1):
                task_key = (spec.system.rendered, scenario.id, repeat_index)
                if task_key in done:
                    continue
                tasks.append((task_key, spec, scenario, keys[scenario.id], repeat_index, backend))

    def execute(task):
        task_key, spec, scenario, key, repeat_index, backend = task
        try:
            record = _run_one(
                spec,
                scenario,
                key,
                repeat_index,
                backend,
                bundles,
                embedder,
                retriever,
                config.generation,
                config.thresholds,
            )
            return task_key, record, None
        except Exception as exc:  # per-key isolation is the contract
            return task_key, None, f"{type(exc).__name__}: {exc}"

    if config.parallelism > 1 and len(tasks) > 1:
        with ThreadPoolExecutor(max_workers=config.parallelism) as pool:
            outcomes = list(pool.map(execute, tasks))
    else:
        outcomes = [execute(task) for task in tasks]

    new_records = [record for _, record, error in outcomes if error is None]
    failures = [(task_key, error) for task_key, _, error in outcomes if error]
    failures.sort(key=lambda item: item[0])

    all_records = existing + new_records
    save_records(all_records, records_path)
    return RunSummary(
        generated=len(new_records),
        skipped=len(done),
        failures=failures,
        records=sorted(all_records, key=lambda r: r.key),
    )


def regrade_records(
    records: Sequence[RunRecord],
    keys: dict[str, AnswerKey],
    thresholds: Sequence[float],
) -> list[RunRecord]:
    """Re-extract and re-grade stored responses against (possibly updated) keys."""
    regraded: list[RunRecord] = []
    for record in records:
        key = keys.get(record.scenario_id)
        if key is None:
            raise ValueError(f"no answer key for scenario {record.scenario_id!r}")
        response = extract_record(
            record.text, key, system=record.system, repeat_index=record.repeat_index
        )
        grades = {t: grade(response, key, t) for t in thresholds}
        regraded.append(
            RunRecord(
                system=record.system,
                scenario_id=record.scenario_id,
                repeat_index=record.repeat_index,
                text=record.text,
                retrieval_latency_ms=record.retrieval_latency_ms,
                generation_latency_ms=record.generation_latency_ms,
                truncated=record.truncated,
                record=response,
                grades=grades,
            )
        )
    return regraded
