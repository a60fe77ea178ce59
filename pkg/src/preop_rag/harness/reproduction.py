"""Recompute the reported fitness-comparison statistics from reconstructed counts.

The harness ships the reported per-agent fitness accuracy, odds ratio, and
p-value for the evaluation it reproduces, together with a documented count
reconstruction: LLM agents graded on 14 scenarios are rebuilt as
round(pct x 14)/14 against the reference at its native 27/28 rate, and the
pooled human answers (8 clinicians x 14 scenarios = 112 calls, 97 correct)
are compared against the reference rate at the matched denominator,
108/112 (the same 27/28 rate). Both odds-ratio estimators and the exact
two-sided p are recomputed per row and emitted beside the reported values;
discrepancies are preserved, never absorbed.

The reported odds-ratio column is consistent with a fixed reference odds
of about 32 rather than with either estimator shipped here; the emitted
side-by-side table documents that gap. Likewise the reported p for the
LLM-vs-reference rows is not recoverable from 14-scenario counts; only
the human-comparison row reproduces within tolerance.
"""

from __future__ import annotations

from dataclasses import dataclass

from ..stats import Table2x2, fisher_exact
from .report import Table

REFERENCE_AGENT = "GPT4_international"
HUMAN_AGENT = "HumanDoctor"

REFERENCE_CORRECT = 27
REFERENCE_TOTAL = 28
HUMAN_CORRECT = 97
HUMAN_TOTAL = 112
SCENARIO_COUNT = 14

# (agent, reported accuracy %, reported odds ratio, reported p-value)
REPORTED_FITNESS_RESULTS: tuple[tuple[str, float, str, str], ...] = (
    ("GPT4_international", 96.4, "-", "-"),
    ("HumanDoctor", 86.6, "4.84", "0.016"),
    ("Claude_3", 85.7, "5.27", "0.009"),
    ("Claude_3_international", 85.7, "5.27", "0.009"),
    ("Claude_3_local", 85.7, "5.27", "0.009"),
    ("GPT3.5", 85.7, "5.27", "0.009"),
    ("GPT3.5_international", 92.9, "2.44", "0.331"),
    ("GPT3.5_local", 85.7, "5.27", "0.009"),
    ("GPT4", 92.9, "2.44", "0.331"),
    ("GPT4_local", 92.9, "2.44", "0.331"),
    ("GPT4o", 78.6, "8.62", "<0.001"),
    ("GPT4o_international", 92.9, "2.44", "0.331"),
    ("GPT4o_local", 85.7, "5.27", "0.009"),
    ("Gemini-1.5", 64.3, "17.50", "<0.001"),
    ("Gemini-1.5_international", 50.0, "32.00", "<0.001"),
    ("Gemini-1.5_local", 64.3, "17.50", "<0.001"),
    ("Llama2-13b", 78.6, "8.62", "<0.001"),
    ("Llama2-13b_international", 28.6, "81.14", "<0.001"),
    ("Llama2-13b_local", 50.0, "32.00", "<0.001"),
    ("Llama2-70b", 57.1, "23.58", "<0.001"),
    ("Llama2-70b_international", 85.7, "5.27", "0.009"),
    ("Llama2-70b_local", 78.6, "8.62", "<0.001"),
    ("Llama2-7b", 78.6, "8.62", "<0.001"),
    ("Llama2-7b_international", 35.7, "58.51", "<0.001"),
    ("Llama2-7b_local", 50.0, "32.00", "<0.001"),
    ("Llama3-70b", 92.9, "2.44", "0.331"),
    ("Llama3-70b_international", 71.4, "12.62", "<0.001"),
    ("Llama3-70b_local", 71.4, "12.62", "<0.001"),
    ("Llama3-8b", 85.7, "5.27", "0.009"),
    ("Llama3-8b_international", 85.7, "5.27", "0.009"),
    ("Llama3-8b_local", 85.7, "5.27", "0.009"),
)

RECONSTRUCTION_NOTES = (
    f"reference rate fixed at {REFERENCE_CORRECT}/{REFERENCE_TOTAL}; "
    f"LLM agents reconstructed as round(pct x {SCENARIO_COUNT})/{SCENARIO_COUNT}",
    f"human row compared at the matched denominator: reference "
    f"{REFERENCE_CORRECT * 4}/{REFERENCE_TOTAL * 4} vs humans "
    f"{HUMAN_CORRECT}/{HUMAN_TOTAL} "
    f"(the literal {REFERENCE_CORRECT}/{REFERENCE_TOTAL} table gives p=0.194)",
    "reported odds ratios track a fixed reference odds of ~32 and do not match "
    "either estimator shipped here; computed values are emitted beside the "
    "reported ones for comparison",
)


@dataclass(frozen=True)
class ReproducedRow:
    agent: str
    reported_pct: float
    agent_correct: int
    agent_total: int
    reference_correct: int
    reference_total: int
    or_sample: float | None
    or_cmle: float | None
    p_two_sided: float | None
    reported_or: str
    reported_p: str


def reconstruct_counts(agent: str, reported_pct: float) -> tuple[int, int]:
    if agent == REFERENCE_AGENT:
        return REFERENCE_CORRECT, REFERENCE_TOTAL
    if agent == HUMAN_AGENT:
        return HUMAN_CORRECT, HUMAN_TOTAL
    correct = round(reported_pct / 100.0 * SCENARIO_COUNT)
    return correct, SCENARIO_COUNT


def _reference_counts_for(agent: str) -> tuple[int, int]:
    # Same 27/28 rate; the human pool is 112 gradings, so the human row is
    # compared at that denominator.
    if agent == HUMAN_AGENT:
        scale = HUMAN_TOTAL // REFERENCE_TOTAL
        return REFERENCE_CORRECT * scale, REFERENCE_TOTAL * scale
    return REFERENCE_CORRECT, REFERENCE_TOTAL


def reproduce_fitness_rows() -> list[ReproducedRow]:
    rows: list[ReproducedRow] = []
    for agent, pct, reported_or, reported_p in REPORTED_FITNESS_RESULTS:
        correct, total = reconstruct_counts(agent, pct)
        ref_correct, ref_total = _reference_counts_for(agent)
        if agent == REFERENCE_AGENT:
            rows.append(
                ReproducedRow(
                    agent=agent,
                    reported_pct=pct,
                    agent_correct=correct,
                    agent_total=total,
                    reference_correct=ref_correct,
                    reference_total=ref_total,
                    or_sample=None,
                    or_cmle=None,
                    p_two_sided=None,
                    reported_or=reported_or,
                    reported_p=reported_p,
                )
            )
            continue
        result = fisher_exact(
            Table2x2(
                a=ref_correct,
                b=ref_total - ref_correct,
                c=correct,
                d=total - correct,
            )
        )
        rows.append(
            ReproducedRow(
                agent=agent,
                reported_pct=pct,
                agent_correct=correct,
                agent_total=total,
                reference_correct=ref_correct,
                reference_total=ref_total,
                or_sample=result.odds_ratio_sample,
                or_cmle=result.odds_ratio_cmle,
                p_two_sided=result.p_two_sided,
                reported_or=reported_or,
                reported_p=reported_p,
            )
        )
    return rows


def reproduction_table() -> Table:
    from .report import _fmt_or, _fmt_p

    rows = []
    for row in reproduce_fitness_rows():
        rows.append(
            (
                row.agent,
                f"{row.reported_pct:.1f}",
                f"{row.agent_correct}/{row.agent_total}",
                f"{row.reference_correct}/{row.reference_total}",
                _fmt_or(row.or_sample),
                _fmt_or(row.or_cmle),
                _fmt_p(row.p_two_sided),
                row.reported_or,
                row.reported_p,
            )
        )
    return Table(
        name="fitness_reproduction",
        title="Reported fitness comparison, recomputed from reconstructed counts",
        columns=(
            "agent",
            "reported_pct",
            "agent_counts",
            "reference_counts",
            "computed_or_sample",
            "computed_or_cmle",
            "computed_p",
            "reported_or",
            "reported_p",
        ),
        rows=tuple(rows),
    )
