"""Exact contingency-table statistics and rating aggregation.

Implements the comparison battery used by the evaluation harness:

* two-sided Fisher exact test by the point-probability rule (sum the
  hypergeometric probabilities, margins fixed, of every table no more
  probable than the observed one);
* sample and conditional-MLE odds ratios for a 2x2 table, the latter as
  the noncentrality that makes the conditional expectation of the top-left
  cell match the observation;
* percentage agreement across raters (pairwise, averaged over items);
* false-positive / false-negative rates for fit-vs-unfit calls;
* Likert score aggregation and ASA-class accuracy stratification.

All probability work happens in log space via `math.lgamma` so large
tables cannot overflow. Comparisons between point probabilities use a
relative tolerance of 1e-12 so that ties are never lost to rounding.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

import numpy as np

PROB_RELATIVE_TOLERANCE = 1e-12
CMLE_TOLERANCE = 1e-8

SCORE_DIMENSIONS = (
    "safety",
    "consensus",
    "objectivity",
    "reproducibility",
    "explainability",
)

__all__ = [
    "Table2x2",
    "TestResult",
    "RatingMatrix",
    "ScoreSheet",
    "ScoreAggregate",
    "ConfusionRates",
    "SCORE_DIMENSIONS",
    "fisher_exact",
    "odds_ratio_sample",
    "odds_ratio_cmle",
    "percent_agreement",
    "confusion_rates",
    "score_aggregate",
    "accuracy_by_asa",
]


@dataclass(frozen=True)
class Table2x2:
    """Counts with row 1 = reference agent (correct, wrong), row 2 = comparator."""

    a: int
    b: int
    c: int
    d: int

    def __post_init__(self) -> None:
        for name in ("a", "b", "c", "d"):
            value = getattr(self, name)
            if not isinstance(value, int) or value < 0:
                raise ValueError(f"cell {name} must be a nonnegative integer")
        if self.a + self.b < 1:
            raise ValueError("row 1 of the table is all zero")
        if self.c + self.d < 1:
            raise ValueError("row 2 of the table is all zero")

    @property
    def n(self) -> int:
        return self.a + self.b + self.c + self.d


@dataclass(frozen=True)
class TestResult:
    odds_ratio_sample: float
    odds_ratio_cmle: float
    p_two_sided: float


def _log_comb(n: int, k: int) -> float:
    return math.lgamma(n + 1) - math.lgamma(k + 1) - math.lgamma(n - k + 1)


def _support(t: Table2x2) -> tuple[int, int]:
    r1, r2 = t.a + t.b, t.c + t.d
    c1 = t.a + t.c
    return max(0, c1 - r2), min(r1, c1)


def _log_hypergeom_pmf(t: Table2x2) -> tuple[np.ndarray, np.ndarray]:
    """Log point probabilities over the support of cell `a`, margins fixed."""
    r1, r2 = t.a + t.b, t.c + t.d
    c1 = t.a + t.c
    lo, hi = _support(t)
    ks = np.arange(lo, hi + 1)
    log_total = _log_comb(t.n, c1)
    lps = np.array(
        [_log_comb(r1, k) + _log_comb(r2, c1 - k) - log_total for k in ks]
    )
    return ks, lps


def odds_ratio_sample(t: Table2x2) -> float:
    """(a*d)/(b*c); +inf when only b*c is zero, NaN when both products are."""
    num = t.a * t.d
    den = t.b * t.c
    if den == 0:
        return math.nan if num == 0 else math.inf
    return num / den


def fisher_exact(t: Table2x2) -> TestResult:
    """Two-sided Fisher exact test plus both odds-ratio estimators."""
    ks, lps = _log_hypergeom_pmf(t)
    lp_obs = float(lps[ks == t.a][0])
    cutoff = lp_obs + math.log1p(PROB_RELATIVE_TOLERANCE)
    p = float(np.exp(lps[lps <= cutoff]).sum())
    p = min(1.0, max(0.0, p))
    return TestResult(
        odds_ratio_sample=odds_ratio_sample(t),
        odds_ratio_cmle=odds_ratio_cmle(t),
        p_two_sided=p,
    )


def odds_ratio_cmle(t: Table2x2) -> float:
    """Conditional maximum-likelihood odds ratio.

    Finds the noncentrality psi > 0 for which the expectation of cell `a`
    under the Fisher noncentral hypergeometric distribution (all margins
    fixed) equals the observed `a`. The expectation is strictly increasing
    in psi, so the root is located by doubling bracket expansion on
    log(psi) followed by a bisection-safeguarded Newton iteration down to
    a bracket width of 1e-8.

    Returns +inf when `a` sits at its maximum attainable value, 0.0 at its
    minimum, and NaN when the margins make `a` constant.
    """
    lo_a, hi_a = _support(t)
    if lo_a == hi_a:
        return math.nan
    if t.a == hi_a:
        return math.inf
    if t.a == lo_a:
        return 0.0

    r1, r2 = t.a + t.b, t.c + t.d
    c1 = t.a + t.c
    ks = np.arange(lo_a, hi_a + 1, dtype=np.float64)
    logw = np.array(
        [_log_comb(r1, int(k)) + _log_comb(r2, c1 - int(k)) for k in ks]
    )

    def moments(x: float) -> tuple[float, float]:
        logits = logw + ks * x
        logits -= logits.max()
        w = np.exp(logits)
        total = w.sum()
        mean = float((ks * w).sum() / total)
        var = float(((ks - mean) ** 2 * w).sum() / total)
        return mean, var

    target = float(t.a)
    mean0, _ = moments(0.0)
    if mean0 == target:
        return 1.0
    if mean0 < target:
        lo, hi = 0.0, 1.0
        while moments(hi)[0] < target:
            lo, hi = hi, hi * 2.0
    else:
        lo, hi = -1.0, 0.0
        while moments(lo)[0] > target:
            lo, hi = lo * 2.0, lo

    x = 0.5 * (lo + hi)
    for _ in range(200):
        mean, var = moments(x)
        f = mean - target
        if f == 0.0:
            return math.exp(x)
        if f > 0.0:
            hi = x
        else:
            lo = x
        if hi - lo <= CMLE_TOLERANCE:
            break
        candidate = x - f / var if var > 0.0 else None
        if candidate is None or not lo < candidate < hi or candidate == x:
            candidate = 0.5 * (lo + hi)
        x = candidate
    return math.exp(0.5 * (lo + hi))


@dataclass(frozen=True)
class RatingMatrix:
    """Rectangular raters x items grid of categorical labels."""

    labels: tuple[tuple[str, ...], ...]

    def __post_init__(self) -> None:
        if len(self.labels) < 2:
            raise ValueError("at least 2 raters are required")
        widths = {len(row) for row in self.labels}
        if len(widths) != 1:
            raise ValueError("rating matrix must be rectangular")
        if widths == {0}:
            raise ValueError("at least 1 item is required")

    @property
    def rater_count(self) -> int:
        return len(self.labels)

    @property
    def item_count(self) -> int:
        return len(self.labels[0])


def percent_agreement(m: RatingMatrix) -> float:
    """Mean over items of (agreeing rater pairs) / (total rater pairs)."""
    raters = m.rater_count
    pairs = raters * (raters - 1) // 2
    per_item: list[float] = []
    for j in range(m.item_count):
        column = [m.labels[i][j] for i in range(raters)]
        agreeing = sum(
            1
            for x in range(raters)
            for y in range(x + 1, raters)
            if column[x] == column[y]
        )
        per_item.append(agreeing / pairs)
    return sum(per_item) / len(per_item)


@dataclass(frozen=True)
class ConfusionRates:
    false_positive_rate: float | None
    false_negative_rate: float | None


def confusion_rates(
    predicted: Sequence[str], truth: Sequence[str]
) -> ConfusionRates:
    """FP/FN rates for fit-vs-unfit calls; "unfit" means delay required.

    FN rate = truly-unfit cases predicted fit / truly-unfit cases; FP rate
    mirrors it. An empty denominator yields None.
    """
    if len(predicted) != len(truth):
        raise ValueError(
            f"length mismatch: {len(predicted)} predictions vs {len(truth)} truths"
        )
    if not truth:
        raise ValueError("at least one case is required")
    for value in (*predicted, *truth):
        if value not in ("fit", "unfit"):
            raise ValueError(f"labels must be 'fit' or 'unfit', got {value!r}")
    truly_unfit = sum(1 for v in truth if v == "unfit")
    truly_fit = len(truth) - truly_unfit
    missed_unfit = sum(
        1 for p, v in zip(predicted, truth) if v == "unfit" and p != "unfit"
    )
    flagged_fit = sum(
        1 for p, v in zip(predicted, truth) if v == "fit" and p == "unfit"
    )
    return ConfusionRates(
        false_positive_rate=None if truly_fit == 0 else flagged_fit / truly_fit,
        false_negative_rate=None if truly_unfit == 0 else missed_unfit / truly_unfit,
    )


@dataclass(frozen=True)
class ScoreSheet:
    """One grader's 1-5 Likert ratings across the five quality dimensions."""

    grader: str
    safety: float
    consensus: float
    objectivity: float
    reproducibility: float
    explainability: float

    def __post_init__(self) -> None:
        for name in SCORE_DIMENSIONS:
            value = getattr(self, name)
            if not 1.0 <= value <= 5.0:
                raise ValueError(f"{name} must be in [1, 5], got {value}")

    def values(self) -> tuple[float, ...]:
        return tuple(getattr(self, name) for name in SCORE_DIMENSIONS)


@dataclass(frozen=True)
class ScoreAggregate:
    means: tuple[float, ...]
    rounded: tuple[float, ...]


def _round_half_away(value: float, digits: int = 2) -> float:
    from decimal import ROUND_HALF_UP, Decimal

    quantum = Decimal(1).scaleb(-digits)
    return float(Decimal(repr(value)).quantize(quantum, rounding=ROUND_HALF_UP))


def score_aggregate(sheets: Sequence[ScoreSheet]) -> ScoreAggregate:
    """Per-dimension arithmetic means, full precision plus 2-decimal rounding
    (half away from zero)."""
    if not sheets:
        raise ValueError("at least one score sheet is required")
    columns = list(zip(*(sheet.values() for sheet in sheets)))
    means = tuple(sum(col) / len(col) for col in columns)
    return ScoreAggregate(
        means=means, rounded=tuple(_round_half_away(m) for m in means)
    )


def accuracy_by_asa(
    outcomes: Iterable[tuple[str, str, bool]],
    asa_by_scenario: Mapping[str, int],
) -> dict[int, dict[str, tuple[int, int, float]]]:
    """Stratify fitness accuracy by the scenario's ASA class.

    `outcomes` holds (system, scenario_id, correct) triples. Returns
    {asa_class: {system: (correct, total, accuracy)}} for the strata that
    actually contain scenarios.
    """
    table: dict[int, dict[str, list[int]]] = {}
    for system, scenario_id, correct in outcomes:
        if scenario_id not in asa_by_scenario:
            raise ValueError(f"unknown scenario {scenario_id!r} in outcomes")
        asa = asa_by_scenario[scenario_id]
        cell = table.setdefault(asa, {}).setdefault(system, [0, 0])
        cell[0] += int(bool(correct))
        cell[1] += 1
    return {
        asa: {
            system: (correct, total, correct / total)
            for system, (correct, total) in sorted(cells.items())
        }
        for asa, cells in sorted(table.items())
    }
