"""Plain-text rendering of analysis reports.

Every renderer has a JSON twin on the report object itself; these tables
are the human-readable layout with dimensions in canonical order.
"""

from __future__ import annotations

from .analyses import COMMON_DIMENSIONS, ItemAnalysisReport, LearningReport
from .domain import CANONICAL_DIMENSION_ORDER
from .psychometrics import GraderEvalReport

_SHORT_NAMES = {
    "Relevance": "Relevance",
    "ClarityOfPurpose": "Purpose",
    "Conciseness": "Conciseness",
    "BackgroundContext": "Background",
    "RequestElaboration": "Elaboration",
    "NoDirectAnswer": "No Answer",
}


def _fmt(value: float | None, width: int = 11) -> str:
    if value is None:
        return "-".rjust(width)
    return f"{value:.2f}".rjust(width)


def render_grader_table(report: GraderEvalReport) -> str:
    """Accuracy per dimension plus overall explanation accuracy."""
    dims = [d for d in CANONICAL_DIMENSION_ORDER]
    header = "".join(_SHORT_NAMES[d.value].rjust(13) for d in dims) + "Overall".rjust(13)
    lines = ["Auto-grader evaluation", "=" * len("Auto-grader evaluation"), ""]
    lines.append(" " * 40 + header)
    row = "Accuracy of Pass/Fail Classification (1/0)".ljust(40)
    row += "".join(
        _fmt(report.pass_fail_accuracy.get(d), 13) for d in dims
    ) + _fmt(None, 13)
    lines.append(row)
    row = "Explanation Accuracy (1/0.5/0)".ljust(40)
    row += "".join(
        _fmt(report.explanation_accuracy.get(d), 13) for d in dims
    ) + _fmt(report.overall_explanation_accuracy, 13)
    lines.append(row)
    lines.append("")
    lines.append("Counts (matches/total):")
    for d in dims:
        if d in report.pass_fail_counts:
            matches, total = report.pass_fail_counts[d]
            lines.append(f"  {_SHORT_NAMES[d.value]:<12} {matches}/{total}")
    lines.append("")
    lines.append(
        "Note: overall explanation accuracy is the pooled mean over all rated"
        " pairs, not the mean of the per-dimension means."
    )
    return "\n".join(lines)


def render_item_table(report: ItemAnalysisReport) -> str:
    title = f"Item analysis: {report.form_id} ({report.occasion}-test, n={report.n_students})"
    lines = [title, "=" * len(title), ""]
    lines.append(f"{'item':<8}{'kind':<6}{'difficulty':>12}{'discrimination':>16}{'in range':>10}")
    for s in report.stats:
        lines.append(
            f"{s.item_id:<8}{s.kind.value:<6}{s.difficulty:>12.3f}"
            f"{s.discrimination:>16.3f}{('yes' if s.in_desired_range else 'no'):>10}"
        )
    lines.append("")
    for kind, fraction in report.summary.items():
        lines.append(f"{fraction:.0%} of {kind.value} items fall in the desired range")
    if report.alpha is not None:
        lines.append(f"Cronbach's alpha: {report.alpha:.3f}")
    if report.alpha_note:
        lines.append(f"({report.alpha_note})")
    return "\n".join(lines)


def render_learning_table(report: LearningReport) -> str:
    title = f"Learning battery (grade source: {report.grade_source})"
    lines = [title, "=" * len(title), ""]
    dims = list(CANONICAL_DIMENSION_ORDER)
    lines.append("Mean dimension score by practice question:")
    header = "    " + "".join(_SHORT_NAMES[d.value].rjust(13) for d in dims)
    lines.append(header)
    for q, per_dim in report.question_dimension_means.items():
        row = f"{q:<4}" + "".join(_fmt(per_dim.get(d), 13) for d in dims)
        lines.append(row)
    lines.append("")
    lines.append(f"McNemar Q1 vs Q3 (n={report.mcnemar_n} paired students):")
    for d in COMMON_DIMENSIONS:
        t = report.mcnemar.get(d)
        if t is None:
            continue
        lines.append(
            f"  {_SHORT_NAMES[d.value]:<12} p = {t.p_value:.3f}"
            f"  (discordant n={t.n}, {t.method})"
        )
    lines.append("")
    if report.wilcoxon is not None:
        pct = (
            f", mean shift {report.confidence_pct_change:+.1f}%"
            if report.confidence_pct_change is not None
            else ""
        )
        lines.append(
            f"Confidence pre vs post (Wilcoxon, n={report.wilcoxon_n}): "
            f"p = {report.wilcoxon.p_value:.4g}{pct}"
        )
    if report.pearson is not None:
        lines.append(
            f"Prior AI use vs first-question score (Pearson, n={report.pearson.n}): "
            f"r = {report.pearson.r:.3f}, p = {report.pearson.p_value:.3f}"
        )
    for note in report.notes:
        lines.append(f"note: {note}")
    return "\n".join(lines)
