"""Analysis battery over a deployment store.

Three entry points, all pure functions of the store contents: item analysis
(difficulty/discrimination/alpha over a test form), grader evaluation
(auto verdicts against human labels), and the learning battery (paired
dimension comparisons across practices, confidence shift, prior-use
correlation).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Mapping, Sequence

import numpy as np

from .assessment import (
    AssessmentForm,
    AssessmentItem,
    ItemKind,
    ResponseMatrix,
    build_response_matrix,
)
from .domain import (
    GradeReport,
    GraderKind,
    PromptAttempt,
    RubricDimension,
    Scenario,
    Verdict,
    grade_report_from_dict,
)
from .flow import EventKind, SessionEvent
from .psychometrics import (
    CorrelationResult,
    GraderEvalReport,
    ItemStats,
    TestResult,
    ZeroTotalVariance,
    classify_items,
    cronbach_alpha,
    grader_eval_report,
    mcnemar_test,
    pearson_correlation,
    wilcoxon_signed_rank,
)
from .store import Store

# Dimensions graded in every practice scenario; the cross-practice paired
# comparisons run over these.
COMMON_DIMENSIONS = (
    RubricDimension.RELEVANCE,
    RubricDimension.CLARITY_OF_PURPOSE,
    RubricDimension.CONCISENESS,
    RubricDimension.BACKGROUND_CONTEXT,
)

PRIOR_USE_ITEM = "l1"
CONFIDENCE_ITEM = "l4"


class AnalysisPrecondition(ValueError):
    """The store lacks the data an analysis needs."""


def select_analysis_sessions(store: Store) -> dict[str, str]:
    """Pick one session per student: the most advanced, latest-started one."""
    best: dict[str, tuple[int, float, str]] = {}
    for session_id in store.session_ids():
        state = store.state(session_id)
        started = store.events(session_id)[0].timestamp
        candidate = (state.phase_rank(), started, session_id)
        if state.student_id not in best or candidate > best[state.student_id]:
            best[state.student_id] = candidate
    return {student: sid for student, (_, _, sid) in sorted(best.items())}


def _events_of(store: Store, session_id: str, kind: EventKind) -> list[SessionEvent]:
    return [e for e in store.events(session_id) if e.kind is kind]


# ---------------------------------------------------------------------------
# Item analysis
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ItemAnalysisReport:
    form_id: str
    occasion: str
    n_students: int
    stats: list[ItemStats]
    summary: Mapping[ItemKind, float]
    alpha: float | None
    alpha_note: str = ""

    def to_dict(self) -> dict[str, Any]:
        return {
            "form_id": self.form_id,
            "occasion": self.occasion,
            "n_students": self.n_students,
            "items": [
                {
                    "item_id": s.item_id,
                    "kind": s.kind.value,
                    "difficulty": s.difficulty,
                    "discrimination": s.discrimination,
                    "in_desired_range": s.in_desired_range,
                }
                for s in self.stats
            ],
            "fraction_in_desired_range": {k.value: v for k, v in self.summary.items()},
            "cronbach_alpha": self.alpha,
            "alpha_note": self.alpha_note,
        }


def collect_test_matrix(
    store: Store,
    form: AssessmentForm,
    bank: Mapping[str, AssessmentItem],
    occasion: str,
) -> ResponseMatrix:
    selected = select_analysis_sessions(store)
    cohort: list[tuple[str, Mapping[str, Any]]] = []
    for student_id, session_id in selected.items():
        for event in _events_of(store, session_id, EventKind.TEST_ANSWERED):
            if event.payload.get("occasion") == occasion and event.payload.get("form_id") == form.id:
                cohort.append((student_id, dict(event.payload.get("answers", {}))))
                break
    if not cohort:
        raise AnalysisPrecondition(
            f"no {occasion}-test responses for form {form.id!r} in the store"
        )
    oe_scores = {
        (label.student_id, label.item_id): label.score
        for label in store.oe_labels
        if label.occasion == occasion
    }
    return build_response_matrix(form, bank, cohort, oe_scores)


def matrix_from_csv(path: str) -> ResponseMatrix:
    """Load a students x items matrix from CSV: a student_id column followed
    by one 0/1 column per item; empty cells mark missing responses."""
    import csv as csv_mod

    with open(path, "r", encoding="utf-8") as fh:
        reader = csv_mod.reader(fh)
        header = next(reader, None)
        rows = list(reader)
    if not header or header[0] != "student_id" or len(header) < 2 or not rows:
        raise AnalysisPrecondition(f"{path}: expected a student_id column plus item columns")
    cells = np.full((len(rows), len(header) - 1), np.nan)
    for r, row in enumerate(rows):
        for c, value in enumerate(row[1:]):
            if value.strip() != "":
                cells[r, c] = float(value)
    return ResponseMatrix(
        student_ids=tuple(row[0] for row in rows),
        item_ids=tuple(header[1:]),
        cells=cells,
    )


def item_analysis_from_matrix(
    matrix: ResponseMatrix,
    bank: Mapping[str, AssessmentItem],
    label: str = "matrix",
) -> ItemAnalysisReport:
    unknown = [i for i in matrix.item_ids if i not in bank]
    if unknown:
        raise AnalysisPrecondition(f"matrix columns not in the item bank: {unknown}")
    stats, summary = classify_items(matrix, bank)
    complete = matrix.complete_rows()
    alpha: float | None = None
    note = ""
    if len(complete.student_ids) >= 2:
        try:
            alpha = cronbach_alpha(complete)
        except ZeroTotalVariance:
            note = "alpha undefined: zero total-score variance"
    else:
        note = "alpha skipped: fewer than 2 complete rows"
    return ItemAnalysisReport(
        form_id=label,
        occasion="matrix",
        n_students=len(matrix.student_ids),
        stats=stats,
        summary=summary,
        alpha=alpha,
        alpha_note=note,
    )


def item_analysis(
    store: Store,
    form: AssessmentForm,
    bank: Mapping[str, AssessmentItem],
    occasion: str = "post",
) -> ItemAnalysisReport:
    matrix = collect_test_matrix(store, form, bank, occasion)
    stats, summary = classify_items(matrix, bank)
    complete = matrix.complete_rows()
    alpha: float | None = None
    note = ""
    if len(complete.student_ids) >= 2:
        try:
            alpha = cronbach_alpha(complete)
            if len(complete.student_ids) < len(matrix.student_ids):
                note = (
                    f"alpha over {len(complete.student_ids)} complete rows of "
                    f"{len(matrix.student_ids)}"
                )
        except ZeroTotalVariance:
            note = "alpha undefined: zero total-score variance"
    else:
        note = "alpha skipped: fewer than 2 complete rows"
    return ItemAnalysisReport(
        form_id=form.id,
        occasion=occasion,
        n_students=len(matrix.student_ids),
        stats=stats,
        summary=summary,
        alpha=alpha,
        alpha_note=note,
    )


# ---------------------------------------------------------------------------
# Grader evaluation
# ---------------------------------------------------------------------------


def _auto_reports(store: Store) -> dict[tuple[str, str, int], GradeReport]:
    """Latest auto (llm/mock) grade per (session, scenario, attempt)."""
    out: dict[tuple[str, str, int], GradeReport] = {}
    for event in store.all_events():
        if event.kind is not EventKind.GRADE_RECEIVED:
            continue
        report = grade_report_from_dict(event.payload["report"])
        if report.grader_kind is GraderKind.HUMAN or report.attempt is None:
            continue
        key = (report.attempt.session_id, report.attempt.scenario_id, report.attempt.attempt_index)
        out[key] = report
    return out


def _human_reports(store: Store) -> tuple[
    dict[tuple[str, str, int], GradeReport],
    dict[RubricDimension, list[float]],
]:
    """Assemble GradeReports from human labels, plus explanation ratings."""
    grouped: dict[tuple[str, str, int], dict[RubricDimension, Verdict]] = {}
    ratings: dict[RubricDimension, list[float]] = {}
    for label in store.grade_labels:
        key = (label.session_id, label.scenario_id, label.attempt_index)
        dim = RubricDimension(label.dimension)
        grouped.setdefault(key, {})[dim] = Verdict(
            passed=label.passed, explanation=label.explanation or "human label"
        )
        if label.explanation_rating is not None:
            ratings.setdefault(dim, []).append(float(label.explanation_rating))
    reports = {
        key: GradeReport(
            scenario_id=key[1],
            verdicts=verdicts,
            grader_kind=GraderKind.HUMAN,
            template_version="human",
            attempt=PromptAttempt(
                session_id=key[0],
                scenario_id=key[1],
                attempt_index=key[2],
                prompt_text="(labeled attempt)",
                timestamp=0.0,
            ),
        )
        for key, verdicts in grouped.items()
    }
    return reports, ratings


def grader_evaluation(store: Store) -> GraderEvalReport:
    """Auto verdicts vs human labels on the labeled attempts."""
    human, ratings = _human_reports(store)
    if not human:
        raise AnalysisPrecondition("no human grade labels in the store")
    auto = _auto_reports(store)
    predicted: list[GradeReport] = []
    for key, human_report in human.items():
        auto_report = auto.get(key)
        if auto_report is None:
            continue  # surfaces as CoverageMismatch below
        # Restrict to the labeled dimensions so partial labeling stays usable.
        verdicts = {
            d: v for d, v in auto_report.verdicts.items() if d in human_report.verdicts
        }
        predicted.append(
            GradeReport(
                scenario_id=auto_report.scenario_id,
                verdicts=verdicts,
                grader_kind=auto_report.grader_kind,
                template_version=auto_report.template_version,
                attempt=human_report.attempt,
            )
        )
    return grader_eval_report(predicted, list(human.values()), ratings)


# ---------------------------------------------------------------------------
# Learning battery
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class LearningReport:
    question_dimension_means: Mapping[str, Mapping[RubricDimension, float]]
    mcnemar: Mapping[RubricDimension, TestResult]
    mcnemar_n: int
    wilcoxon: TestResult | None
    confidence_mean_delta: float | None
    confidence_pct_change: float | None
    wilcoxon_n: int
    pearson: CorrelationResult | None
    grade_source: str
    notes: tuple[str, ...] = field(default_factory=tuple)

    def to_dict(self) -> dict[str, Any]:
        def test_dict(t: TestResult | None) -> dict[str, Any] | None:
            if t is None:
                return None
            return {"statistic": t.statistic, "p_value": t.p_value, "n": t.n, "method": t.method}

        return {
            "question_dimension_means": {
                q: {d.value: round(v, 6) for d, v in dims.items()}
                for q, dims in self.question_dimension_means.items()
            },
            "mcnemar_q1_to_q3": {
                d.value: test_dict(self.mcnemar[d])
                for d in COMMON_DIMENSIONS
                if d in self.mcnemar
            },
            "mcnemar_n": self.mcnemar_n,
            "wilcoxon_confidence": test_dict(self.wilcoxon),
            "confidence_mean_delta": self.confidence_mean_delta,
            "confidence_pct_change": self.confidence_pct_change,
            "wilcoxon_n": self.wilcoxon_n,
            "pearson_prior_use_vs_q1": None
            if self.pearson is None
            else {"r": self.pearson.r, "p_value": self.pearson.p_value, "n": self.pearson.n},
            "grade_source": self.grade_source,
            "notes": list(self.notes),
        }


def _dimension_scores(
    store: Store,
    session_id: str,
    scenario_id: str,
    source: str,
) -> dict[RubricDimension, int] | None:
    """0/1 per dimension for the student's last attempt on one scenario."""
    prompts = [
        e
        for e in _events_of(store, session_id, EventKind.PROMPT_SUBMITTED)
        if e.payload.get("scenario_id") == scenario_id
    ]
    if not prompts:
        return None
    last_attempt = max(int(e.payload["attempt_index"]) for e in prompts)

    if source in ("human", "auto_fallback"):
        labels = {
            RubricDimension(l.dimension): int(l.passed)
            for l in store.grade_labels
            if l.session_id == session_id
            and l.scenario_id == scenario_id
            and l.attempt_index == last_attempt
        }
        if labels:
            return labels
        if source == "human":
            return None
    for event in reversed(_events_of(store, session_id, EventKind.GRADE_RECEIVED)):
        report = grade_report_from_dict(event.payload["report"])
        if (
            report.attempt is not None
            and report.attempt.scenario_id == scenario_id
            and report.attempt.attempt_index == last_attempt
        ):
            return {d: int(v.passed) for d, v in report.verdicts.items()}
    return None


def learning_battery(
    store: Store,
    scenarios: Sequence[Scenario],
    source: str = "auto_fallback",
) -> LearningReport:
    """Cross-practice dimension comparisons, confidence shift, and the
    prior-use correlation, over one selected session per student.

    `source` picks where dimension scores come from: "human" labels only,
    "auto" grades only, or "auto_fallback" (human when labeled, else auto).
    """
    if source not in ("human", "auto", "auto_fallback"):
        raise ValueError(f"unknown grade source {source!r}")
    selected = select_analysis_sessions(store)
    if not selected:
        raise AnalysisPrecondition("store has no sessions")
    notes: list[str] = []

    # per student: question index -> {dimension -> 0/1}
    scores: dict[str, dict[int, dict[RubricDimension, int]]] = {}
    for student_id, session_id in selected.items():
        per_q: dict[int, dict[RubricDimension, int]] = {}
        for q_index, scenario in enumerate(scenarios):
            dims = _dimension_scores(store, session_id, scenario.id, source)
            if dims is not None:
                per_q[q_index] = dims
        if per_q:
            scores[student_id] = per_q

    if not scores:
        raise AnalysisPrecondition("no graded attempts available for the learning battery")

    means: dict[str, dict[RubricDimension, float]] = {}
    for q_index, scenario in enumerate(scenarios):
        collected: dict[RubricDimension, list[int]] = {}
        for per_q in scores.values():
            for dim, value in per_q.get(q_index, {}).items():
                collected.setdefault(dim, []).append(value)
        means[f"Q{q_index + 1}"] = {
            d: float(np.mean(vals)) for d, vals in collected.items() if vals
        }

    first_q, last_q = 0, len(scenarios) - 1
    mcnemar_results: dict[RubricDimension, TestResult] = {}
    paired_students = [
        s for s, per_q in scores.items() if first_q in per_q and last_q in per_q
    ]
    for dim in COMMON_DIMENSIONS:
        b = c = 0
        for student in paired_students:
            q1 = scores[student][first_q].get(dim)
            q3 = scores[student][last_q].get(dim)
            if q1 is None or q3 is None:
                continue
            if q1 == 1 and q3 == 0:
                b += 1
            elif q1 == 0 and q3 == 1:
                c += 1
        mcnemar_results[dim] = mcnemar_test(b, c)

    # Confidence shift: the re-asked survey item, pre vs post.
    pre_conf: dict[str, int] = {}
    post_conf: dict[str, int] = {}
    prior_use: dict[str, int] = {}
    for student_id, session_id in selected.items():
        for event in _events_of(store, session_id, EventKind.SURVEY_ANSWERED):
            answers = event.payload.get("answers", {})
            if event.payload.get("survey") == "pre":
                if CONFIDENCE_ITEM in answers:
                    pre_conf[student_id] = int(answers[CONFIDENCE_ITEM])
                if PRIOR_USE_ITEM in answers:
                    prior_use[student_id] = int(answers[PRIOR_USE_ITEM])
            elif event.payload.get("survey") == "post" and CONFIDENCE_ITEM in answers:
                post_conf[student_id] = int(answers[CONFIDENCE_ITEM])

    both = sorted(set(pre_conf) & set(post_conf))
    wilcoxon = None
    mean_delta = None
    pct_change = None
    if both:
        pre_values = [pre_conf[s] for s in both]
        post_values = [post_conf[s] for s in both]
        wilcoxon = wilcoxon_signed_rank(pre_values, post_values)
        mean_delta = float(np.mean([p2 - p1 for p1, p2 in zip(pre_values, post_values)]))
        pct_change = float(
            (np.mean(post_values) - np.mean(pre_values)) / np.mean(pre_values) * 100.0
        )
    else:
        notes.append("no paired pre/post confidence responses")

    # Prior AI use vs average score on the first practice question.
    pearson = None
    q1_avg: dict[str, float] = {}
    for student, per_q in scores.items():
        if first_q in per_q and per_q[first_q]:
            q1_avg[student] = float(np.mean(list(per_q[first_q].values())))
    paired = sorted(set(prior_use) & set(q1_avg))
    if len(paired) >= 3:
        try:
            pearson = pearson_correlation(
                [prior_use[s] for s in paired], [q1_avg[s] for s in paired]
            )
        except ValueError as exc:
            notes.append(f"prior-use correlation unavailable: {exc}")
    else:
        notes.append("fewer than 3 students with prior-use and Q1 scores")

    return LearningReport(
        question_dimension_means=means,
        mcnemar=mcnemar_results,
        mcnemar_n=len(paired_students),
        wilcoxon=wilcoxon,
        confidence_mean_delta=mean_delta,
        confidence_pct_change=pct_change,
        wilcoxon_n=len(both),
        pearson=pearson,
        grade_source=source,
        notes=tuple(notes),
    )
