"""Clinical scenarios, answer keys, response extraction, and grading.

A scenario is a de-identified preoperative clinic note plus the structured
attributes the triage rule needs. Its answer key lists, per instruction
category, the required items with synonym patterns (regular expressions,
matched case-insensitively), the expected delay/triage/carbohydrate
answers, and the critical-error patterns whose presence marks a response
as hallucinated.

Grading is threshold-based: an instruction category is correct when the
matched fraction of its required items reaches the threshold; a category
with no required items grades NA and is excluded from aggregation.
Ambiguous fitness calls are encoded as delay_required = "either", which
accepts both yes and no. Any hallucination hit forces every correctness
flag false regardless of the rest of the response.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

CATEGORIES = ("fasting", "medications", "team_instructions", "optimizations")

SURGERY_RISKS = ("low", "intermediate", "high")

GRADING_THRESHOLDS = (0.65, 0.75, 0.85)
DEFAULT_THRESHOLD = 0.75

# Phrase rules for the structured answers. Negated forms are checked first
# so "no need to delay" never reads as a delay request.
_DELAY_NO = (
    r"no need to delay",
    r"no need for(?: a)? delay",
    r"not necessary to delay",
    r"does not need to be delayed",
    r"no delay (?:is |was )?(?:needed|required|necessary)",
    r"proceed with (?:the )?(?:operation|surgery)",
    r"proceed as planned",
)
_DELAY_YES = (
    r"need to delay",
    r"needs? to be delayed",
    r"delay(?:ing)? the (?:operation|surgery)",
    r"postpone(?:ment of)? the (?:operation|surgery)",
    r"should be delayed",
    r"delay (?:is |was )?(?:needed|required|necessary)",
)
_TRIAGE = re.compile(r"seen by (?:a |an |the )?(doctor|nurse)", re.IGNORECASE)
_CARBO_NO = (
    r"not suitable for (?:preoperative )?carbohydrate loading",
    r"carbohydrate loading[^\n]{0,12}?\bno\b",
    r"no (?:preoperative )?carbohydrate loading",
    r"avoid (?:preoperative )?carbohydrate loading",
    r"carbohydrate loading is not",
)
_CARBO_YES = (
    r"suitable for (?:preoperative )?carbohydrate loading",
    r"carbohydrate loading[^\n]{0,12}?\byes\b",
)

__all__ = [
    "CATEGORIES",
    "GRADING_THRESHOLDS",
    "DEFAULT_THRESHOLD",
    "Scenario",
    "KeyItem",
    "AnswerKey",
    "ResponseRecord",
    "Grade",
    "triage_rule",
    "extract_record",
    "grade",
    "parse_scenario",
    "load_scenarios",
    "parse_answer_key",
    "load_answer_keys",
]


@dataclass(frozen=True)
class Scenario:
    id: str
    age: int
    asa_class: int
    surgery_risk: str
    investigations_abnormal: bool
    complication_risk_high: bool
    free_text: str

    def __post_init__(self) -> None:
        if self.age <= 0:
            raise ValueError(f"scenario {self.id!r}: age must be positive")
        if not 1 <= self.asa_class <= 5:
            raise ValueError(f"scenario {self.id!r}: asa_class must be 1-5")
        if self.surgery_risk not in SURGERY_RISKS:
            raise ValueError(
                f"scenario {self.id!r}: surgery_risk must be one of {SURGERY_RISKS}"
            )
        if not self.free_text.strip():
            raise ValueError(f"scenario {self.id!r}: free_text is empty")


@dataclass(frozen=True)
class KeyItem:
    label: str
    patterns: tuple[str, ...]


@dataclass(frozen=True)
class AnswerKey:
    scenario_id: str
    delay_required: str
    triage_expected: str
    carbo_loading: str
    category_items: Mapping[str, tuple[KeyItem, ...]]
    critical_error_patterns: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        if self.delay_required not in ("yes", "no", "either"):
            raise ValueError("delay_required must be yes/no/either")
        if self.triage_expected not in ("doctor", "nurse"):
            raise ValueError("triage_expected must be doctor/nurse")
        if self.carbo_loading not in ("yes", "no"):
            raise ValueError("carbo_loading must be yes/no")
        missing = [c for c in CATEGORIES if c not in self.category_items]
        if missing:
            raise ValueError(f"answer key missing categories: {missing}")


@dataclass(frozen=True)
class ResponseRecord:
    scenario_id: str
    system: str
    repeat_index: int
    delay_answer: str
    triage_answer: str
    carbo_answer: str
    matched_items: Mapping[str, tuple[str, ...]] = field(default_factory=dict)
    hallucination_hits: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        if self.delay_answer not in ("yes", "no", "absent"):
            raise ValueError("delay_answer must be yes/no/absent")
        if self.triage_answer not in ("doctor", "nurse", "absent"):
            raise ValueError("triage_answer must be doctor/nurse/absent")
        if self.carbo_answer not in ("yes", "no", "absent"):
            raise ValueError("carbo_answer must be yes/no/absent")


@dataclass(frozen=True)
class Grade:
    threshold: float
    category_correct: Mapping[str, bool | None]
    fitness_correct: bool
    triage_correct: bool
    carbo_correct: bool
    hallucination: bool
    overall_correct: bool


def triage_rule(scenario: Scenario) -> str:
    """Nurse-eligibility rule: ASA I/II, over 21, no high-risk surgery, no
    high complication risk, and normal investigations; doctor otherwise."""
    nurse_ok = (
        scenario.asa_class <= 2
        and scenario.age > 21
        and scenario.surgery_risk != "high"
        and not scenario.complication_risk_high
        and not scenario.investigations_abnormal
    )
    return "nurse" if nurse_ok else "doctor"


def _first_match(text: str, patterns: Sequence[str]) -> str | None:
    for pattern in patterns:
        if re.search(pattern, text, re.IGNORECASE):
            return pattern
    return None


def extract_record(
    response_text: str,
    key: AnswerKey,
    *,
    system: str = "",
    repeat_index: int = 1,
) -> ResponseRecord:
    """Deterministic pattern-based extraction of a structured record.

    All matching is case-insensitive regex search over the full response.
    Delay and carbohydrate answers check negated phrasings before positive
    ones; the triage answer takes the first "seen by a doctor/nurse" hit.
    Anything unmatched is recorded as absent and graded accordingly.
    """
    if not response_text.strip():
        raise ValueError("empty response text")

    if _first_match(response_text, _DELAY_NO):
        delay = "no"
    elif _first_match(response_text, _DELAY_YES):
        delay = "yes"
    else:
        delay = "absent"

    triage_hit = _TRIAGE.search(response_text)
    triage = triage_hit.group(1).lower() if triage_hit else "absent"

    if _first_match(response_text, _CARBO_NO):
        carbo = "no"
    elif _first_match(response_text, _CARBO_YES):
        carbo = "yes"
    else:
        carbo = "absent"

    matched: dict[str, tuple[str, ...]] = {}
    for category in CATEGORIES:
        hits = [
            item.label
            for item in key.category_items[category]
            if _first_match(response_text, item.patterns)
        ]
        matched[category] = tuple(hits)

    hallucinations = tuple(
        pattern
        for pattern in key.critical_error_patterns
        if re.search(pattern, response_text, re.IGNORECASE)
    )

    return ResponseRecord(
        scenario_id=key.scenario_id,
        system=system,
        repeat_index=repeat_index,
        delay_answer=delay,
        triage_answer=triage,
        carbo_answer=carbo,
        matched_items=matched,
        hallucination_hits=hallucinations,
    )


def grade(record: ResponseRecord, key: AnswerKey, threshold: float) -> Grade:
    """Grade one record at one alignment threshold.

    A category is correct when matched/required >= threshold; a category
    whose key lists no items grades NA (None) and is excluded from the
    overall aggregate, which applies the same threshold rule to the
    per-category outcomes. delay_required = "either" accepts yes and no.
    A hallucination hit forces every correctness flag false.
    """
    if not 0.0 < threshold <= 1.0:
        raise ValueError(f"threshold must be in (0, 1], got {threshold}")
    if record.scenario_id != key.scenario_id:
        raise ValueError(
            f"record for {record.scenario_id!r} graded against key "
            f"{key.scenario_id!r}"
        )

    category_correct: dict[str, bool | None] = {}
    for category in CATEGORIES:
        items = key.category_items[category]
        if not items:
            category_correct[category] = None
            continue
        valid = {item.label for item in items}
        matched = set(record.matched_items.get(category, ())) & valid
        category_correct[category] = len(matched) / len(items) >= threshold

    if key.delay_required == "either":
        fitness = record.delay_answer in ("yes", "no")
    else:
        fitness = record.delay_answer == key.delay_required
    triage = record.triage_answer == key.triage_expected
    carbo = record.carbo_answer == key.carbo_loading

    graded = [v for v in category_correct.values() if v is not None]
    overall = bool(graded) and sum(graded) / len(graded) >= threshold

    hallucination = bool(record.hallucination_hits)
    if hallucination:
        category_correct = {
            c: (None if v is None else False) for c, v in category_correct.items()
        }
        fitness = triage = carbo = overall = False

    return Grade(
        threshold=threshold,
        category_correct=category_correct,
        fitness_correct=fitness,
        triage_correct=triage,
        carbo_correct=carbo,
        hallucination=hallucination,
        overall_correct=overall,
    )


def parse_scenario(path: Path) -> Scenario:
    """Parse a scenario file: `key: value` header block, blank line, note text."""
    raw = Path(path).read_text(encoding="utf-8")
    lines = raw.split("\n")
    header: dict[str, str] = {}
    body_start = len(lines)
    for i, line in enumerate(lines):
        if not line.strip():
            body_start = i + 1
            break
        if ":" not in line:
            raise ValueError(f"{Path(path).name}: malformed header line {line!r}")
        k, v = line.split(":", 1)
        header[k.strip().lower()] = v.strip()
    required = (
        "id",
        "age",
        "asa_class",
        "surgery_risk",
        "investigations_abnormal",
        "complication_risk_high",
    )
    for name in required:
        if name not in header:
            raise ValueError(f"{Path(path).name}: missing header field {name!r}")

    def as_bool(raw_value: str, name: str) -> bool:
        lowered = raw_value.lower()
        if lowered in ("yes", "true", "1"):
            return True
        if lowered in ("no", "false", "0"):
            return False
        raise ValueError(f"{Path(path).name}: invalid boolean for {name!r}: {raw_value!r}")

    return Scenario(
        id=header["id"],
        age=int(header["age"]),
        asa_class=int(header["asa_class"]),
        surgery_risk=header["surgery_risk"].lower(),
        investigations_abnormal=as_bool(
            header["investigations_abnormal"], "investigations_abnormal"
        ),
        complication_risk_high=as_bool(
            header["complication_risk_high"], "complication_risk_high"
        ),
        free_text="\n".join(lines[body_start:]).strip("\n"),
    )


def load_scenarios(directory: Path | str) -> list[Scenario]:
    directory = Path(directory)
    scenarios = [
        parse_scenario(p)
        for p in sorted(directory.iterdir())
        if p.is_file() and not p.name.startswith(".")
    ]
    scenarios.sort(key=lambda s: s.id)
    seen: set[str] = set()
    for scenario in scenarios:
        if scenario.id in seen:
            raise ValueError(f"duplicate scenario id {scenario.id!r}")
        seen.add(scenario.id)
    return scenarios


def parse_answer_key(path: Path) -> AnswerKey:
    """Load one JSON answer key; see the fixtures for the schema."""
    data = json.loads(Path(path).read_text(encoding="utf-8"))
    categories: dict[str, tuple[KeyItem, ...]] = {}
    raw_categories = data.get("categories", {})
    for category in CATEGORIES:
        items = []
        for entry in raw_categories.get(category, []):
            items.append(
                KeyItem(label=entry["label"], patterns=tuple(entry["patterns"]))
            )
        categories[category] = tuple(items)
    return AnswerKey(
        scenario_id=data["scenario_id"],
        delay_required=data["delay_required"],
        triage_expected=data["triage_expected"],
        carbo_loading=data["carbo_loading"],
        category_items=categories,
        critical_error_patterns=tuple(data.get("critical_error_patterns", ())),
    )


def load_answer_keys(directory: Path | str) -> dict[str, AnswerKey]:
    directory = Path(directory)
    keys: dict[str, AnswerKey] = {}
    for path in sorted(directory.iterdir()):
        if not path.is_file() or path.name.startswith("."):
            continue
        key = parse_answer_key(path)
        if key.scenario_id in keys:
            raise ValueError(f"duplicate answer key for {key.scenario_id!r}")
        keys[key.scenario_id] = key
    return keys
