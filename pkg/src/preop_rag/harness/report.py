"""Report tables computed from persisted run records.

Every table is a pure function of the records (plus the optional human
answers and score sheets), so regenerating a report from the same inputs
is byte-identical. Tables are emitted both as aligned text and as one TSV
per table; the headline tables are additionally rendered as PNG figures.

Percentages print to 1 decimal, odds ratios to 2, p-values to 3 (with the
`<0.001` convention); the reference system's own comparison cells print
as `-`.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence

from ..clinical import (
    CATEGORIES,
    AnswerKey,
    Grade,
    ResponseRecord,
    Scenario,
    grade as grade_record,
)
from ..generation import KnowledgeBase, SystemId
from ..stats import (
    RatingMatrix,
    ScoreSheet,
    Table2x2,
    accuracy_by_asa,
    confusion_rates,
    fisher_exact,
    percent_agreement,
    score_aggregate,
)
from .runner import RunRecord

HUMAN_SYSTEM = "HumanDoctor"

ASPECTS = ("fasting", "carbo", "medications", "team_instructions", "optimizations")

__all__ = [
    "Table",
    "Report",
    "build_report",
    "write_report",
    "load_human_answers",
    "load_score_sheets",
]


@dataclass(frozen=True)
class Table:
    name: str
    title: str
    columns: tuple[str, ...]
    rows: tuple[tuple[str, ...], ...]


@dataclass
class Report:
    tables: list[Table]
    summary: list[str]
    warnings: list[str]
    fitness_pct: dict[str, float]
    hallucination_pct: dict[str, float]
    asa_pct: dict[int, dict[str, float]]
    reference_system: str


@dataclass(frozen=True)
class _Unit:
    """One graded response: an LLM run record or one human rater's answers."""

    system: str
    scenario_id: str
    repeat_index: int
    response: ResponseRecord
    grades: Mapping[float, Grade]
    retrieval_ms: float | None = None
    generation_ms: float | None = None


def _fmt_pct(value: float | None) -> str:
    return "-" if value is None else f"{value * 100.0:.1f}"


def _fmt_or(value: float | None) -> str:
    if value is None:
        return "-"
    if math.isnan(value):
        return "NA"
    if math.isinf(value):
        return "inf"
    return f"{value:.2f}"


def _fmt_p(value: float | None) -> str:
    if value is None:
        return "-"
    if value < 0.0005:
        return "<0.001"
    return f"{value:.3f}"


def load_human_answers(path: Path | str) -> list[ResponseRecord]:
    """Structured human answers: one JSON object per line, record-shaped."""
    records: list[ResponseRecord] = []
    with Path(path).open("r", encoding="utf-8") as fh:
        for line in fh:
            if not line.strip():
                continue
            data = json.loads(line)
            records.append(
                ResponseRecord(
                    scenario_id=data["scenario_id"],
                    system=data.get("system", HUMAN_SYSTEM),
                    repeat_index=int(data["repeat_index"]),
                    delay_answer=data.get("delay_answer", "absent"),
                    triage_answer=data.get("triage_answer", "absent"),
                    carbo_answer=data.get("carbo_answer", "absent"),
                    matched_items={
                        category: tuple(labels)
                        for category, labels in data.get("matched_items", {}).items()
                    },
                    hallucination_hits=tuple(data.get("hallucination_hits", ())),
                )
            )
    return records


def load_score_sheets(path: Path | str) -> list[ScoreSheet]:
    """CSV columns: grader,safety,consensus,objectivity,reproducibility,explainability."""
    sheets: list[ScoreSheet] = []
    with Path(path).open("r", encoding="utf-8", newline="") as fh:
        for row in csv.DictReader(fh):
            sheets.append(
                ScoreSheet(
                    grader=row["grader"],
                    safety=float(row["safety"]),
                    consensus=float(row["consensus"]),
                    objectivity=float(row["objectivity"]),
                    reproducibility=float(row["reproducibility"]),
                    explainability=float(row["explainability"]),
                )
            )
    return sheets


def _units_from_records(records: Sequence[RunRecord]) -> list[_Unit]:
    return [
        _Unit(
            system=r.system,
            scenario_id=r.scenario_id,
            repeat_index=r.repeat_index,
            response=r.record,
            grades=r.grades,
            retrieval_ms=r.retrieval_latency_ms,
            generation_ms=r.generation_latency_ms,
        )
        for r in records
    ]


def _units_from_humans(
    humans: Sequence[ResponseRecord],
    keys: Mapping[str, AnswerKey],
    thresholds: Sequence[float],
) -> list[_Unit]:
    units: list[_Unit] = []
    for response in humans:
        key = keys.get(response.scenario_id)
        if key is None:
            raise ValueError(
                f"human answers reference unknown scenario {response.scenario_id!r}"
            )
        grades = {t: grade_record(response, key, t) for t in thresholds}
        units.append(
            _Unit(
                system=response.system,
                scenario_id=response.scenario_id,
                repeat_index=response.repeat_index,
                response=response,
                grades=grades,
            )
        )
    return units


def _system_order(systems: Iterable[str], reference: str) -> list[str]:
    ordered = sorted(set(systems))
    result = [s for s in (reference, HUMAN_SYSTEM) if s in ordered]
    result.extend(s for s in ordered if s not in result)
    return result


def _fitness_counts(units: Sequence[_Unit], threshold: float) -> tuple[int, int]:
    correct = sum(1 for u in units if u.grades[threshold].fitness_correct)
    return correct, len(units)


def _aspect_outcomes(unit: _Unit, threshold: float) -> dict[str, bool | None]:
    """Correctness of the five instruction aspects; None marks NA."""
    g = unit.grades[threshold]
    outcomes: dict[str, bool | None] = {
        category: g.category_correct.get(category) for category in CATEGORIES
    }
    outcomes["carbo"] = g.carbo_correct
    return outcomes


def _aspect_cells(units: Sequence[_Unit], threshold: float) -> dict[str, tuple[int, int]]:
    """(correct, graded) per aspect plus the pooled "total" cell counts."""
    counts = {aspect: [0, 0] for aspect in ASPECTS}
    counts["total"] = [0, 0]
    for unit in units:
        for aspect, value in _aspect_outcomes(unit, threshold).items():
            if value is None:
                continue
            counts[aspect][0] += int(value)
            counts[aspect][1] += 1
            counts["total"][0] += int(value)
            counts["total"][1] += 1
    return {k: (v[0], v[1]) for k, v in counts.items()}


def _versus_reference(
    ref_correct: int, ref_total: int, correct: int, total: int
) -> tuple[float, float, float]:
    table = Table2x2(
        a=ref_correct, b=ref_total - ref_correct, c=correct, d=total - correct
    )
    result = fisher_exact(table)
    return result.odds_ratio_sample, result.odds_ratio_cmle, result.p_two_sided


def build_report(
    records: Sequence[RunRecord],
    keys: Mapping[str, AnswerKey],
    scenarios: Sequence[Scenario],
    *,
    reference_system: str,
    threshold: float = 0.75,
    thresholds: Sequence[float] = (0.65, 0.75, 0.85),
    human_answers: Sequence[ResponseRecord] = (),
    score_sheets: Sequence[ScoreSheet] = (),
) -> Report:
    if not records:
        raise ValueError("no records to report on")
    warnings: list[str] = []
    units = _units_from_records(records)
    if human_answers:
        units.extend(_units_from_humans(human_answers, keys, thresholds))
    else:
        warnings.append("no human answers supplied; human rows omitted")

    by_system: dict[str, list[_Unit]] = {}
    for unit in units:
        by_system.setdefault(unit.system, []).append(unit)
    order = _system_order(by_system, reference_system)
    if reference_system not in by_system:
        raise ValueError(f"reference system {reference_system!r} has no records")

    tables: list[Table] = []
    asa_by_scenario = {s.id: s.asa_class for s in scenarios}

    # Fitness accuracy with both odds-ratio estimators versus the reference.
    ref_correct, ref_total = _fitness_counts(by_system[reference_system], threshold)
    fitness_rows: list[tuple[str, ...]] = []
    fitness_pct: dict[str, float] = {}
    for system in order:
        correct, total = _fitness_counts(by_system[system], threshold)
        fitness_pct[system] = 100.0 * correct / total
        if system == reference_system:
            fitness_rows.append(
                (system, str(correct), str(total), _fmt_pct(correct / total), "-", "-", "-")
            )
            continue
        or_sample, or_cmle, p = _versus_reference(ref_correct, ref_total, correct, total)
        fitness_rows.append(
            (
                system,
                str(correct),
                str(total),
                _fmt_pct(correct / total),
                _fmt_or(or_sample),
                _fmt_or(or_cmle),
                _fmt_p(p),
            )
        )
    tables.append(
        Table(
            name="fitness_comparison",
            title=f"Fitness-for-surgery accuracy vs {reference_system} "
            f"(threshold {threshold:g})",
            columns=("agent", "correct", "total", "accuracy_pct", "or_sample", "or_cmle", "p_value"),
            rows=tuple(fitness_rows),
        )
    )

    # Nurse/doctor triage accuracy, local-rule systems only.
    triage_rows: list[tuple[str, ...]] = []
    for system in order:
        if system == HUMAN_SYSTEM:
            continue
        if SystemId.parse(system).knowledge_base is KnowledgeBase.INTERNATIONAL:
            continue
        system_units = by_system[system]
        correct = sum(1 for u in system_units if u.grades[threshold].triage_correct)
        wrong = len(system_units) - correct
        triage_rows.append(
            (system, str(wrong), str(correct), _fmt_pct(correct / len(system_units)))
        )
    tables.append(
        Table(
            name="triage_accuracy",
            title="Nurse/doctor triage accuracy (native and local systems)",
            columns=("agent", "wrong", "correct", "pct_correct"),
            rows=tuple(triage_rows),
        )
    )

    # Per-aspect accuracy and hallucination rate.
    aspect_rows: list[tuple[str, ...]] = []
    hallucination_pct: dict[str, float] = {}
    for system in order:
        system_units = by_system[system]
        cells = _aspect_cells(system_units, threshold)
        halluc = sum(1 for u in system_units if u.grades[threshold].hallucination)
        halluc_rate = halluc / len(system_units)
        if system != HUMAN_SYSTEM:
            hallucination_pct[system] = 100.0 * halluc_rate
        row = [system]
        for aspect in ASPECTS + ("total",):
            correct, graded = cells[aspect]
            row.append("-" if graded == 0 else _fmt_pct(correct / graded))
        row.append("NA" if system == HUMAN_SYSTEM else _fmt_pct(halluc_rate))
        aspect_rows.append(tuple(row))
    tables.append(
        Table(
            name="category_accuracy",
            title=f"Instruction-aspect accuracy and hallucination rate "
            f"(threshold {threshold:g})",
            columns=("agent",) + ASPECTS + ("total", "hallucination_pct"),
            rows=tuple(aspect_rows),
        )
    )

    # Per-aspect comparison versus the reference.
    ref_cells = _aspect_cells(by_system[reference_system], threshold)
    comparison_rows: list[tuple[str, ...]] = []
    for system in order:
        row = [system]
        cells = _aspect_cells(by_system[system], threshold)
        for aspect in ASPECTS + ("total",):
            correct, graded = cells[aspect]
            rc, rt = ref_cells[aspect]
            if system == reference_system:
                row.extend(("-", "-"))
                continue
            if graded == 0 or rt == 0:
                row.extend(("-", "-"))
                continue
            or_sample, _, p = _versus_reference(rc, rt, correct, graded)
            row.extend((_fmt_or(or_sample), _fmt_p(p)))
        comparison_rows.append(tuple(row))
    comparison_columns = ["agent"]
    for aspect in ASPECTS + ("total",):
        comparison_columns.extend((f"{aspect}_or", f"{aspect}_p"))
    tables.append(
        Table(
            name="category_comparison",
            title=f"Instruction-aspect odds ratio and p vs {reference_system} "
            f"(threshold {threshold:g})",
            columns=tuple(comparison_columns),
            rows=tuple(comparison_rows),
        )
    )

    # Pooled-aspect accuracy at the sensitivity thresholds.
    sensitivity_thresholds = [t for t in thresholds if t != threshold] or list(thresholds)
    sensitivity_rows: list[tuple[str, ...]] = []
    for system in order:
        row = [system]
        for t in sensitivity_thresholds:
            correct, graded = _aspect_cells(by_system[system], t)["total"]
            rc, rt = _aspect_cells(by_system[reference_system], t)["total"]
            if system == reference_system:
                row.extend((_fmt_pct(correct / graded), "-", "-"))
                continue
            or_sample, _, p = _versus_reference(rc, rt, correct, graded)
            row.extend((_fmt_pct(correct / graded), _fmt_or(or_sample), _fmt_p(p)))
        sensitivity_rows.append(tuple(row))
    sensitivity_columns = ["agent"]
    for t in sensitivity_thresholds:
        label = f"{int(round(t * 100))}"
        sensitivity_columns.extend((f"acc_{label}_pct", f"or_{label}", f"p_{label}"))
    tables.append(
        Table(
            name="threshold_sensitivity",
            title=f"Pooled instruction accuracy vs {reference_system} at "
            "sensitivity thresholds",
            columns=tuple(sensitivity_columns),
            rows=tuple(sensitivity_rows),
        )
    )

    # Likert quality ratings.
    if score_sheets:
        score_rows = [
            (
                sheet.grader,
                *(f"{value:.2f}" for value in sheet.values()),
            )
            for sheet in score_sheets
        ]
        aggregate = score_aggregate(list(score_sheets))
        score_rows.append(("Average", *(f"{v:.2f}" for v in aggregate.rounded)))
        tables.append(
            Table(
                name="score_ratings",
                title=f"Quality ratings for {reference_system}",
                columns=(
                    "grader",
                    "safety",
                    "consensus",
                    "objectivity",
                    "reproducibility",
                    "explainability",
                ),
                rows=tuple(score_rows),
            )
        )
    else:
        warnings.append("no score sheets supplied; rating table omitted")

    # False positive / false negative rates for the unfit call.
    confusion_rows: list[tuple[str, ...]] = []
    for system in order:
        predicted: list[str] = []
        truth: list[str] = []
        for unit in by_system[system]:
            required = keys[unit.scenario_id].delay_required
            if required == "either":
                continue
            truth.append("unfit" if required == "yes" else "fit")
            predicted.append("unfit" if unit.response.delay_answer == "yes" else "fit")
        if not truth:
            confusion_rows.append((system, "-", "-"))
            continue
        rates = confusion_rates(predicted, truth)
        confusion_rows.append(
            (
                system,
                _fmt_pct(rates.false_positive_rate),
                _fmt_pct(rates.false_negative_rate),
            )
        )
    tables.append(
        Table(
            name="confusion_rates",
            title="False positive / false negative rates for the unfit-for-surgery call",
            columns=("agent", "false_positive_pct", "false_negative_pct"),
            rows=tuple(confusion_rows),
        )
    )

    # Within-agent percentage agreement per category.
    agreement_columns = ["category"]
    agreement_systems = [s for s in (HUMAN_SYSTEM, reference_system) if s in by_system]
    agreement_columns.extend(agreement_systems)
    agreement_rows: list[tuple[str, ...]] = []
    label_getters = {
        "delay_op": lambda r: r.delay_answer,
        "triage": lambda r: r.triage_answer,
        "fasting": lambda r: "|".join(sorted(r.matched_items.get("fasting", ()))),
        "carbo": lambda r: r.carbo_answer,
        "medications": lambda r: "|".join(sorted(r.matched_items.get("medications", ()))),
        "team_instructions": lambda r: "|".join(
            sorted(r.matched_items.get("team_instructions", ()))
        ),
        "optimizations": lambda r: "|".join(
            sorted(r.matched_items.get("optimizations", ()))
        ),
    }
    for category, getter in label_getters.items():
        row = [category]
        for system in agreement_systems:
            if category == "triage" and system == HUMAN_SYSTEM:
                row.append("-")
                continue
            row.append(_fmt_agreement(by_system[system], getter))
        agreement_rows.append(tuple(row))
    tables.append(
        Table(
            name="agreement",
            title="Within-agent percentage agreement per category",
            columns=tuple(agreement_columns),
            rows=tuple(agreement_rows),
        )
    )

    # ASA-stratified fitness accuracy.
    outcomes = [
        (u.system, u.scenario_id, u.grades[threshold].fitness_correct) for u in units
    ]
    stratified = accuracy_by_asa(outcomes, asa_by_scenario)
    asa_rows: list[tuple[str, ...]] = []
    asa_pct: dict[int, dict[str, float]] = {}
    for asa_class, cells in stratified.items():
        asa_pct[asa_class] = {
            system: 100.0 * acc for system, (_, _, acc) in cells.items()
        }
    for system in order:
        row = [system]
        for asa_class in sorted(stratified):
            cell = stratified[asa_class].get(system)
            row.append("-" if cell is None else _fmt_pct(cell[2]))
        asa_rows.append(tuple(row))
    tables.append(
        Table(
            name="asa_accuracy",
            title="Fitness accuracy stratified by ASA class",
            columns=("agent",) + tuple(f"asa_{c}" for c in sorted(stratified)),
            rows=tuple(asa_rows),
        )
    )

    # Mean latencies (LLM systems only; humans carry no latency).
    latency_rows: list[tuple[str, ...]] = []
    for system in order:
        measured = [u for u in by_system[system] if u.generation_ms is not None]
        if not measured:
            continue
        mean_retrieval = sum(u.retrieval_ms or 0.0 for u in measured) / len(measured)
        mean_generation = sum(u.generation_ms or 0.0 for u in measured) / len(measured)
        latency_rows.append((system, f"{mean_retrieval:.1f}", f"{mean_generation:.1f}"))
    tables.append(
        Table(
            name="latency",
            title="Mean recorded latencies per agent (ms)",
            columns=("agent", "mean_retrieval_ms", "mean_generation_ms"),
            rows=tuple(latency_rows),
        )
    )

    # Component counts: per category and per scenario.
    summary = [
        f"records: {len(records)} LLM, {len(units) - len(records)} human",
        f"agents: {len(by_system)}; scenarios: {len({u.scenario_id for u in units})}",
    ]
    per_category = {aspect: 0 for aspect in ASPECTS}
    per_scenario: dict[str, int] = {}
    graded_components = 0
    for unit in units:
        for aspect, value in _aspect_outcomes(unit, threshold).items():
            if value is None:
                continue
            per_category[aspect] += 1
            per_scenario[unit.scenario_id] = per_scenario.get(unit.scenario_id, 0) + 1
            graded_components += 1
        # fitness and triage are graded components too
        per_scenario[unit.scenario_id] = per_scenario.get(unit.scenario_id, 0) + 2
        graded_components += 2
    summary.append(f"graded components: {graded_components}")
    summary.append(
        "components per category: "
        + ", ".join(f"{aspect}={per_category[aspect]}" for aspect in ASPECTS)
        + f", fitness+triage={2 * len(units)}"
    )
    summary.append(
        "components per scenario: "
        + ", ".join(f"{sid}={per_scenario[sid]}" for sid in sorted(per_scenario))
    )

    return Report(
        tables=tables,
        summary=summary,
        warnings=warnings,
        fitness_pct={s: fitness_pct[s] for s in order},
        hallucination_pct=hallucination_pct,
        asa_pct=asa_pct,
        reference_system=reference_system,
    )


def _fmt_agreement(units: Sequence[_Unit], label_of) -> str:
    by_rater: dict[int, dict[str, str]] = {}
    for unit in units:
        by_rater.setdefault(unit.repeat_index, {})[unit.scenario_id] = label_of(
            unit.response
        )
    if len(by_rater) < 2:
        return "-"
    common = set.intersection(*(set(v) for v in by_rater.values()))
    if not common:
        return "-"
    items = sorted(common)
    matrix = RatingMatrix(
        labels=tuple(
            tuple(by_rater[rater][item] for item in items)
            for rater in sorted(by_rater)
        )
    )
    return f"{percent_agreement(matrix):.2f}"


def render_text(report: Report) -> str:
    lines: list[str] = []
    for entry in report.summary:
        lines.append(f"# {entry}")
    for warning in report.warnings:
        lines.append(f"# warning: {warning}")
    for table in report.tables:
        lines.append("")
        lines.append(f"== {table.title} ==")
        widths = [
            max(len(str(cell)) for cell in column)
            for column in zip(table.columns, *table.rows)
        ] if table.rows else [len(c) for c in table.columns]
        header = "  ".join(c.ljust(w) for c, w in zip(table.columns, widths))
        lines.append(header)
        lines.append("-" * len(header))
        for row in table.rows:
            lines.append("  ".join(str(c).ljust(w) for c, w in zip(row, widths)))
    return "\n".join(lines) + "\n"


def write_report(
    report: Report, out_dir: Path | str, *, figures: bool = True
) -> dict[str, Path]:
    """Write report.txt, one TSV per table, and the PNG figures."""
    out_dir = Path(out_dir)
    tables_dir = out_dir / "tables"
    tables_dir.mkdir(parents=True, exist_ok=True)
    written: dict[str, Path] = {}

    text_path = out_dir / "report.txt"
    text_path.write_text(render_text(report), encoding="utf-8")
    written["report"] = text_path

    for table in report.tables:
        path = tables_dir / f"{table.name}.tsv"
        with path.open("w", encoding="utf-8") as fh:
            fh.write("\t".join(table.columns) + "\n")
            for row in table.rows:
                fh.write("\t".join(row) + "\n")
        written[table.name] = path

    if figures:
        from .. import figures as fig

        figures_dir = out_dir / "figures"
        figures_dir.mkdir(parents=True, exist_ok=True)
        written["figure_fitness"] = fig.render_fitness_accuracy(
            report.fitness_pct,
            figures_dir / "fitness_accuracy.png",
            reference=report.reference_system,
        )
        written["figure_hallucination"] = fig.render_hallucination_rates(
            report.hallucination_pct, figures_dir / "hallucination_rates.png"
        )
        if report.asa_pct:
            written["figure_asa"] = fig.render_asa_accuracy(
                report.asa_pct, figures_dir / "asa_accuracy.png"
            )
    return written
