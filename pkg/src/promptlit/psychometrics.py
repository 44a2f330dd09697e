"""Statistics for item analysis, rater agreement, and paired comparisons.

Item difficulty and discrimination follow the classical-test-theory
definitions (proportion correct; 27% extreme-groups contrast). The paired
tests carry exact small-sample branches with documented cutovers to the
usual large-sample approximations.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

import numpy as np
from scipy.special import stdtr

from .assessment import AssessmentItem, ItemKind, ResponseMatrix
from .domain import CANONICAL_DIMENSION_ORDER, GradeReport, RubricDimension

# Classification thresholds for a usable item.
DIFFICULTY_RANGE = (0.3, 0.7)
MIN_DISCRIMINATION = 0.2

# Extreme-groups fraction for the discrimination index.
EXTREME_GROUP_PERCENT = 27

# Largest discordant-pair count handled by the exact McNemar branch.
MCNEMAR_EXACT_MAX = 25

# Largest non-zero-difference count handled by the exact Wilcoxon branch.
WILCOXON_EXACT_MAX = 20


class EmptyColumn(ValueError):
    pass


class TooFewStudents(ValueError):
    pass


class ZeroTotalVariance(ValueError):
    pass


class MissingCells(ValueError):
    pass


class LengthMismatch(ValueError):
    pass


class DegenerateMarginals(ValueError):
    pass


class ConstantVector(ValueError):
    pass


class InvalidRating(ValueError):
    pass


class CoverageMismatch(ValueError):
    def __init__(self, missing_pairs: list[tuple]):
        self.missing_pairs = missing_pairs
        shown = ", ".join(map(str, missing_pairs[:10]))
        more = "" if len(missing_pairs) <= 10 else f" (+{len(missing_pairs) - 10} more)"
        super().__init__(f"predicted/human coverage differs on: {shown}{more}")


@dataclass(frozen=True)
class TestResult:
    statistic: float
    p_value: float
    n: int
    method: str  # "exact" | "approximate"

    def __post_init__(self) -> None:
        if not 0.0 <= self.p_value <= 1.0:
            raise ValueError(f"p_value out of [0, 1]: {self.p_value}")


@dataclass(frozen=True)
class CorrelationResult:
    r: float
    p_value: float
    n: int


@dataclass(frozen=True)
class ItemStats:
    item_id: str
    kind: ItemKind
    difficulty: float
    discrimination: float
    in_desired_range: bool


# ---------------------------------------------------------------------------
# Item analysis
# ---------------------------------------------------------------------------


def difficulty_index(column: np.ndarray | Sequence[float]) -> float:
    """Proportion correct among non-missing responses."""
    col = np.asarray(column, dtype=np.float64)
    finite = col[np.isfinite(col)]
    if finite.size == 0:
        raise EmptyColumn("no non-missing cells")
    return float(finite.sum() / finite.size)


def extreme_group_size(n_students: int) -> int:
    # ceil(0.27 * n) in integer arithmetic; float ceil misrounds e.g. n=100.
    return (EXTREME_GROUP_PERCENT * n_students + 99) // 100


def discrimination_index(matrix: ResponseMatrix, item_id: str) -> float:
    """Upper-minus-lower 27% extreme-groups contrast on one item.

    Students are ranked by total score (missing cells score 0); ties are
    broken by their stable row order.
    """
    n = len(matrix.student_ids)
    if n < 4:
        raise TooFewStudents(f"need >= 4 students, have {n}")
    totals = np.nansum(matrix.cells, axis=1)
    g = extreme_group_size(n)
    upper = np.argsort(-totals, kind="stable")[:g]
    lower = np.argsort(totals, kind="stable")[:g]
    col = matrix.column(item_id)
    u = float(np.nansum(col[upper]))
    l = float(np.nansum(col[lower]))
    return (u - l) / g


def cronbach_alpha(matrix: ResponseMatrix | np.ndarray) -> float:
    """Internal-consistency coefficient over a complete score matrix.

    Population variances are used in both numerator and denominator; the
    convention cancels as long as it is consistent.
    """
    cells = matrix.cells if isinstance(matrix, ResponseMatrix) else np.asarray(matrix, dtype=np.float64)
    if cells.ndim != 2 or cells.shape[0] < 2 or cells.shape[1] < 2:
        raise ValueError("need at least 2 students and 2 items")
    if np.isnan(cells).any():
        raise MissingCells("alpha requires a complete matrix; filter missing rows first")
    k = cells.shape[1]
    item_vars = cells.var(axis=0)
    total_var = cells.sum(axis=1).var()
    if total_var == 0:
        raise ZeroTotalVariance("total scores have zero variance")
    return float(k / (k - 1) * (1.0 - item_vars.sum() / total_var))


def classify_items(
    matrix: ResponseMatrix, bank: Mapping[str, AssessmentItem]
) -> tuple[list[ItemStats], dict[ItemKind, float]]:
    """Per-item stats plus, per item kind, the fraction in the desired range."""
    stats: list[ItemStats] = []
    for item_id in matrix.item_ids:
        diff = difficulty_index(matrix.column(item_id))
        disc = discrimination_index(matrix, item_id)
        in_range = (
            DIFFICULTY_RANGE[0] <= diff <= DIFFICULTY_RANGE[1]
            and disc >= MIN_DISCRIMINATION
        )
        stats.append(
            ItemStats(
                item_id=item_id,
                kind=bank[item_id].kind,
                difficulty=diff,
                discrimination=disc,
                in_desired_range=in_range,
            )
        )
    summary: dict[ItemKind, float] = {}
    for kind in ItemKind:
        of_kind = [s for s in stats if s.kind is kind]
        if of_kind:
            summary[kind] = sum(s.in_desired_range for s in of_kind) / len(of_kind)
    return stats, summary


# ---------------------------------------------------------------------------
# Agreement and paired tests
# ---------------------------------------------------------------------------


def cohen_kappa(rater_a: Sequence, rater_b: Sequence) -> float:
    """Chance-corrected agreement between two categorical ratings.

    Perfect agreement returns 1.0 even when the chance agreement is 1; a
    degenerate marginal with imperfect agreement is an error.
    """
    a = list(rater_a)
    b = list(rater_b)
    if len(a) != len(b):
        raise LengthMismatch(f"lengths differ: {len(a)} vs {len(b)}")
    if not a:
        raise LengthMismatch("need at least one rating")
    n = len(a)
    p_o = sum(x == y for x, y in zip(a, b)) / n
    if p_o == 1.0:
        return 1.0
    categories = set(a) | set(b)
    p_e = sum((a.count(c) / n) * (b.count(c) / n) for c in categories)
    if p_e == 1.0:
        raise DegenerateMarginals("chance agreement is 1 with imperfect agreement")
    return (p_o - p_e) / (1.0 - p_e)


def mcnemar_test(b: int, c: int) -> TestResult:
    """Paired test on binary outcomes; b and c are the discordant counts.

    Exact two-sided binomial on min(b, c) while b + c <= 25, else chi-square
    with continuity correction. No discordant pairs at all gives p = 1.
    """
    if b < 0 or c < 0:
        raise ValueError("discordant counts must be >= 0")
    n = b + c
    m = min(b, c)
    if n == 0:
        return TestResult(statistic=0.0, p_value=1.0, n=0, method="exact")
    if n <= MCNEMAR_EXACT_MAX:
        # 2 * P(X <= m) with X ~ Binomial(n, 1/2), capped at 1; integer
        # arithmetic keeps the tail sum exact.
        tail = sum(math.comb(n, k) for k in range(m + 1))
        p = min(1.0, 2.0 * tail / 2.0**n)
        return TestResult(statistic=float(m), p_value=p, n=n, method="exact")
    stat = (abs(b - c) - 1.0) ** 2 / n
    # Chi-square survival with 1 dof.
    p = math.erfc(math.sqrt(stat / 2.0))
    return TestResult(statistic=stat, p_value=min(1.0, p), n=n, method="approximate")


def _average_ranks(values: np.ndarray) -> np.ndarray:
    """Ranks 1..n with ties sharing their average rank."""
    order = np.argsort(values, kind="stable")
    ranks = np.empty(len(values), dtype=np.float64)
    i = 0
    while i < len(values):
        j = i
        while j + 1 < len(values) and values[order[j + 1]] == values[order[i]]:
            j += 1
        ranks[order[i : j + 1]] = (i + j) / 2.0 + 1.0
        i = j + 1
    return ranks


def _signed_rank_tail(ranks: np.ndarray, m: float) -> float:
    """P(W <= m) where W sums a uniformly random subset of the ranks.

    Subset-sum counting over doubled ranks (ties make ranks half-integral).
    """
    r2 = np.rint(2.0 * ranks).astype(np.int64)
    total2 = int(r2.sum())
    counts = np.zeros(total2 + 1, dtype=np.float64)
    counts[0] = 1.0
    for r in r2:
        shifted = counts.copy()
        shifted[r:] += counts[: total2 + 1 - r]
        counts = shifted
    m2 = int(math.floor(2.0 * m + 1e-9))
    return float(counts[: m2 + 1].sum() / 2.0 ** len(ranks))


def wilcoxon_signed_rank(pre: Sequence[float], post: Sequence[float]) -> TestResult:
    """Paired signed-rank test; zero differences are dropped.

    Exact two-sided p over all sign assignments while the non-zero count is
    <= 20, else the normal approximation with tie correction.
    """
    x = np.asarray(pre, dtype=np.float64)
    y = np.asarray(post, dtype=np.float64)
    if x.shape != y.shape or x.ndim != 1:
        raise LengthMismatch(f"paired vectors must match: {x.shape} vs {y.shape}")
    if x.size == 0:
        raise LengthMismatch("need at least one pair")
    d = y - x
    d = d[d != 0]
    n = d.size
    if n == 0:
        return TestResult(statistic=0.0, p_value=1.0, n=0, method="exact")
    ranks = _average_ranks(np.abs(d))
    w_plus = float(ranks[d > 0].sum())
    total = float(ranks.sum())
    w_min = min(w_plus, total - w_plus)
    if n <= WILCOXON_EXACT_MAX:
        p = min(1.0, 2.0 * _signed_rank_tail(ranks, w_min))
        return TestResult(statistic=w_min, p_value=p, n=n, method="exact")
    mu = n * (n + 1) / 4.0
    _, tie_counts = np.unique(np.abs(d), return_counts=True)
    tie_term = float(((tie_counts**3) - tie_counts).sum()) / 48.0
    sigma2 = n * (n + 1) * (2 * n + 1) / 24.0 - tie_term
    if sigma2 <= 0:
        return TestResult(statistic=w_min, p_value=1.0, n=n, method="approximate")
    z = (w_plus - mu) / math.sqrt(sigma2)
    p = min(1.0, math.erfc(abs(z) / math.sqrt(2.0)))
    return TestResult(statistic=w_min, p_value=p, n=n, method="approximate")


def pearson_correlation(x: Sequence[float], y: Sequence[float]) -> CorrelationResult:
    """Product-moment correlation with a two-sided t-distribution p-value."""
    xv = np.asarray(x, dtype=np.float64)
    yv = np.asarray(y, dtype=np.float64)
    if xv.shape != yv.shape or xv.ndim != 1:
        raise LengthMismatch(f"vectors must match: {xv.shape} vs {yv.shape}")
    n = xv.size
    if n < 3:
        raise LengthMismatch("need at least 3 pairs")
    dx = xv - xv.mean()
    dy = yv - yv.mean()
    sxx = float(dx @ dx)
    syy = float(dy @ dy)
    if sxx == 0 or syy == 0:
        raise ConstantVector("correlation undefined for a constant vector")
    r = float(dx @ dy) / math.sqrt(sxx * syy)
    r = max(-1.0, min(1.0, r))
    if abs(r) == 1.0:
        return CorrelationResult(r=r, p_value=0.0, n=n)
    t = r * math.sqrt((n - 2) / (1.0 - r * r))
    p = 2.0 * float(stdtr(n - 2, -abs(t)))
    return CorrelationResult(r=r, p_value=min(1.0, p), n=n)


# ---------------------------------------------------------------------------
# Grader evaluation
# ---------------------------------------------------------------------------

RATING_SCALE = (0.0, 0.5, 1.0)


@dataclass(frozen=True)
class GraderEvalReport:
    pass_fail_accuracy: Mapping[RubricDimension, float]
    pass_fail_counts: Mapping[RubricDimension, tuple[int, int]]  # (matches, total)
    explanation_accuracy: Mapping[RubricDimension, float]
    overall_explanation_accuracy: float | None

    def to_dict(self) -> dict:
        return {
            "pass_fail_accuracy": {
                d.value: self.pass_fail_accuracy[d]
                for d in CANONICAL_DIMENSION_ORDER
                if d in self.pass_fail_accuracy
            },
            "pass_fail_counts": {
                d.value: list(self.pass_fail_counts[d])
                for d in CANONICAL_DIMENSION_ORDER
                if d in self.pass_fail_counts
            },
            "explanation_accuracy": {
                d.value: self.explanation_accuracy[d]
                for d in CANONICAL_DIMENSION_ORDER
                if d in self.explanation_accuracy
            },
            "overall_explanation_accuracy": self.overall_explanation_accuracy,
        }


def _attempt_key(report: GradeReport) -> tuple[str, str, int]:
    if report.attempt is None:
        raise ValueError("grader evaluation needs reports with attempt refs")
    a = report.attempt
    return (a.session_id, a.scenario_id, a.attempt_index)


def grader_pass_fail_accuracy(
    predicted: Iterable[GradeReport], human: Iterable[GradeReport]
) -> tuple[dict[RubricDimension, float], dict[RubricDimension, tuple[int, int]]]:
    """Per-dimension agreement between predicted and human verdicts.

    Both inputs must cover identical (attempt, dimension) pairs.
    """
    pred_pairs: dict[tuple, bool] = {}
    for report in predicted:
        key = _attempt_key(report)
        for dim, verdict in report.verdicts.items():
            pred_pairs[(key, dim)] = verdict.passed
    human_pairs: dict[tuple, bool] = {}
    for report in human:
        key = _attempt_key(report)
        for dim, verdict in report.verdicts.items():
            human_pairs[(key, dim)] = verdict.passed

    missing = sorted(
        set(pred_pairs) ^ set(human_pairs),
        key=lambda pair: (pair[0], pair[1].value),
    )
    if missing:
        raise CoverageMismatch([(k, d.value) for k, d in missing])
    if not pred_pairs:
        raise CoverageMismatch([("no pairs", "")])

    matches: dict[RubricDimension, int] = {}
    totals: dict[RubricDimension, int] = {}
    for (key, dim), predicted_pass in pred_pairs.items():
        totals[dim] = totals.get(dim, 0) + 1
        if predicted_pass == human_pairs[(key, dim)]:
            matches[dim] = matches.get(dim, 0) + 1
    accuracy = {dim: matches.get(dim, 0) / totals[dim] for dim in totals}
    counts = {dim: (matches.get(dim, 0), totals[dim]) for dim in totals}
    return accuracy, counts


def explanation_accuracy(
    ratings: Mapping[RubricDimension, Sequence[float]],
) -> tuple[dict[RubricDimension, float], float]:
    """Mean 1 / 0.5 / 0 rating per dimension plus the pooled overall mean."""
    per_dim: dict[RubricDimension, float] = {}
    pooled: list[float] = []
    for dim, values in ratings.items():
        vals = [float(v) for v in values]
        for v in vals:
            if v not in RATING_SCALE:
                raise InvalidRating(f"rating {v!r} for {dim.value} not in {{0, 0.5, 1}}")
        if not vals:
            continue
        per_dim[dim] = sum(vals) / len(vals)
        pooled.extend(vals)
    if not pooled:
        raise InvalidRating("no ratings supplied")
    # Overall is the pooled mean over all rated pairs; with unbalanced
    # dimension counts it is not the mean of the per-dimension means.
    return per_dim, sum(pooled) / len(pooled)


def grader_eval_report(
    predicted: Iterable[GradeReport],
    human: Iterable[GradeReport],
    ratings: Mapping[RubricDimension, Sequence[float]] | None = None,
) -> GraderEvalReport:
    accuracy, counts = grader_pass_fail_accuracy(predicted, human)
    if ratings:
        per_dim, overall = explanation_accuracy(ratings)
    else:
        per_dim, overall = {}, None
    return GraderEvalReport(
        pass_fail_accuracy=accuracy,
        pass_fail_counts=counts,
        explanation_accuracy=per_dim,
        overall_explanation_accuracy=overall,
    )
