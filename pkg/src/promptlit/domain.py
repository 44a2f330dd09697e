"""Core domain types: rubric dimensions, scenarios, prompt attempts, grade reports.

Everything here is an immutable value object; validation happens once at load
time and the validated objects are safe to share across threads.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Any, Iterable, Mapping

import yaml


class RubricDimension(str, Enum):
    RELEVANCE = "Relevance"
    CLARITY_OF_PURPOSE = "ClarityOfPurpose"
    CONCISENESS = "Conciseness"
    BACKGROUND_CONTEXT = "BackgroundContext"
    REQUEST_ELABORATION = "RequestElaboration"
    NO_DIRECT_ANSWER = "NoDirectAnswer"


# Canonical display/report order for the six dimensions. All reports, wire
# payloads, and tables list dimensions in this order so output stays
# diff-stable.
CANONICAL_DIMENSION_ORDER: tuple[RubricDimension, ...] = (
    RubricDimension.RELEVANCE,
    RubricDimension.CLARITY_OF_PURPOSE,
    RubricDimension.CONCISENESS,
    RubricDimension.BACKGROUND_CONTEXT,
    RubricDimension.REQUEST_ELABORATION,
    RubricDimension.NO_DIRECT_ANSWER,
)

GENERAL_DEFINITIONS: dict[RubricDimension, str] = {
    RubricDimension.RELEVANCE: "The prompt relates to the topic of the scenario.",
    RubricDimension.CLARITY_OF_PURPOSE: "The prompt states a specific, clear purpose.",
    RubricDimension.CONCISENESS: "The prompt itself is brief and to the point.",
    RubricDimension.BACKGROUND_CONTEXT: (
        "The prompt explains why the question is being asked, such as giving "
        "background or context."
    ),
    RubricDimension.REQUEST_ELABORATION: (
        "The prompt asks for elaboration, extension, or explanation rather "
        "than only a direct response."
    ),
    RubricDimension.NO_DIRECT_ANSWER: (
        "The prompt does not ask for the solution to the problem or for the "
        "final answers themselves."
    ),
}


class LearningObjective(str, Enum):
    AI_CAPACITY = "AICapacity"
    CONTEXTS_TO_USE_AI = "ContextsToUseAI"
    EFFECTIVE_PROMPT_FORMATION = "EffectivePromptFormation"


class GraderKind(str, Enum):
    LLM = "llm"
    MOCK = "mock"
    HUMAN = "human"


def canonical_dimensions(dims: Iterable[RubricDimension]) -> tuple[RubricDimension, ...]:
    """Order a set of dimensions by the canonical table order."""
    wanted = set(dims)
    return tuple(d for d in CANONICAL_DIMENSION_ORDER if d in wanted)


@dataclass(frozen=True)
class Scenario:
    id: str
    subject: str
    title: str
    narrative: str
    learning_objective: LearningObjective
    applicable_dimensions: tuple[RubricDimension, ...]
    topic_terms: frozenset[str]
    # Per-scenario override of each dimension's description; falls back to
    # the general definition when a dimension has no entry.
    dimension_notes: Mapping[RubricDimension, str] = field(default_factory=dict)

    def dimension_note(self, dim: RubricDimension) -> str:
        return self.dimension_notes.get(dim, GENERAL_DEFINITIONS[dim])


def scenario_dimensions(scenario: Scenario) -> tuple[RubricDimension, ...]:
    """The scenario's graded dimensions, always in canonical order."""
    return canonical_dimensions(scenario.applicable_dimensions)


@dataclass(frozen=True)
class PromptAttempt:
    session_id: str
    scenario_id: str
    attempt_index: int
    prompt_text: str
    timestamp: float

    def __post_init__(self) -> None:
        if self.attempt_index < 1:
            raise ValueError(f"attempt_index must be >= 1, got {self.attempt_index}")
        if not self.prompt_text.strip():
            raise ValueError("prompt_text must be non-empty after trimming")


@dataclass(frozen=True)
class Verdict:
    passed: bool
    explanation: str

    def __post_init__(self) -> None:
        if not isinstance(self.passed, bool):
            raise ValueError(f"verdict must be boolean, got {self.passed!r}")
        if not self.explanation.strip():
            raise ValueError("explanation must be non-empty")


@dataclass(frozen=True)
class GradeReport:
    scenario_id: str
    verdicts: Mapping[RubricDimension, Verdict]
    grader_kind: GraderKind
    template_version: str
    attempt: PromptAttempt | None = None

    def ordered_verdicts(self) -> list[tuple[RubricDimension, Verdict]]:
        return [
            (d, self.verdicts[d]) for d in CANONICAL_DIMENSION_ORDER if d in self.verdicts
        ]


def check_grade_report(report: GradeReport, scenario: Scenario) -> None:
    """Assert the report's verdict keys match the scenario's dimensions exactly."""
    expected = set(scenario_dimensions(scenario))
    got = set(report.verdicts)
    if got != expected:
        missing = sorted(d.value for d in expected - got)
        extra = sorted(d.value for d in got - expected)
        raise ValueError(f"verdict keys mismatch: missing={missing} extra={extra}")


# ---------------------------------------------------------------------------
# Scenario bundle validation
# ---------------------------------------------------------------------------


class BundleValidationError(Exception):
    """Raised when a content bundle violates its schema; carries all errors."""

    def __init__(self, errors: list[str]):
        self.errors = errors
        super().__init__("; ".join(errors))


def _as_str(value: Any, path: str, errors: list[str], *, required: bool = True) -> str:
    if value is None:
        if required:
            errors.append(f"{path}: missing")
        return ""
    if not isinstance(value, str) or not value.strip():
        errors.append(f"{path}: must be a non-empty string")
        return ""
    return value


def _parse_dimension(raw: Any, path: str, errors: list[str]) -> RubricDimension | None:
    try:
        return RubricDimension(raw)
    except ValueError:
        errors.append(f"{path}: unknown dimension {raw!r}")
        return None


def _parse_scenario(raw: Any, path: str, errors: list[str]) -> Scenario | None:
    if not isinstance(raw, Mapping):
        errors.append(f"{path}: must be a mapping")
        return None

    sid = _as_str(raw.get("id"), f"{path}.id", errors)
    subject = _as_str(raw.get("subject"), f"{path}.subject", errors)
    title = _as_str(raw.get("title"), f"{path}.title", errors)
    narrative = _as_str(raw.get("narrative"), f"{path}.narrative", errors)

    lo_raw = raw.get("learning_objective")
    objective = None
    try:
        objective = LearningObjective(lo_raw)
    except ValueError:
        errors.append(f"{path}.learning_objective: unknown objective {lo_raw!r}")

    dims_raw = raw.get("applicable_dimensions")
    dims: list[RubricDimension] = []
    if not isinstance(dims_raw, (list, tuple)) or not dims_raw:
        errors.append(f"{path}.applicable_dimensions: must be a non-empty list")
    else:
        for i, d in enumerate(dims_raw):
            dim = _parse_dimension(d, f"{path}.applicable_dimensions[{i}]", errors)
            if dim is not None:
                if dim in dims:
                    errors.append(
                        f"{path}.applicable_dimensions[{i}]: duplicate dimension {dim.value}"
                    )
                else:
                    dims.append(dim)

    terms_raw = raw.get("topic_terms")
    terms: list[str] = []
    if not isinstance(terms_raw, (list, tuple)) or not terms_raw:
        errors.append(f"{path}.topic_terms: must be a non-empty list")
    else:
        for i, t in enumerate(terms_raw):
            if not isinstance(t, str) or not t.strip():
                errors.append(f"{path}.topic_terms[{i}]: must be a non-empty string")
            else:
                terms.append(t.strip().lower())

    notes: dict[RubricDimension, str] = {}
    notes_raw = raw.get("dimension_notes", {})
    if notes_raw and not isinstance(notes_raw, Mapping):
        errors.append(f"{path}.dimension_notes: must be a mapping")
    elif isinstance(notes_raw, Mapping):
        for key, text in notes_raw.items():
            dim = _parse_dimension(key, f"{path}.dimension_notes.{key}", errors)
            if dim is None:
                continue
            if dim not in dims:
                errors.append(
                    f"{path}.dimension_notes.{key}: note for inapplicable dimension"
                )
                continue
            notes[dim] = _as_str(text, f"{path}.dimension_notes.{key}", errors)

    if errors:
        return None
    assert objective is not None
    return Scenario(
        id=sid,
        subject=subject.strip().lower(),
        title=title,
        narrative=narrative,
        learning_objective=objective,
        applicable_dimensions=canonical_dimensions(dims),
        topic_terms=frozenset(terms),
        dimension_notes=notes,
    )


def validate_scenario_config(doc: Any) -> list[Scenario]:
    """Validate a parsed scenario bundle document into Scenario objects.

    Raises BundleValidationError listing every violation with its path.
    """
    errors: list[str] = []
    if not isinstance(doc, Mapping):
        raise BundleValidationError(["bundle: document must be a mapping"])
    raw_list = doc.get("scenarios")
    if not isinstance(raw_list, list) or not raw_list:
        raise BundleValidationError(["scenarios: must be a non-empty list"])

    scenarios: list[Scenario] = []
    seen_ids: set[str] = set()
    for idx, raw in enumerate(raw_list):
        local: list[str] = []
        scenario = _parse_scenario(raw, f"scenarios[{idx}]", local)
        errors.extend(local)
        if scenario is None:
            continue
        if scenario.id in seen_ids:
            errors.append(f"scenarios[{idx}].id: duplicate scenario id {scenario.id!r}")
            continue
        seen_ids.add(scenario.id)
        scenarios.append(scenario)

    if errors:
        raise BundleValidationError(errors)
    return scenarios


def scenario_to_dict(scenario: Scenario) -> dict[str, Any]:
    return {
        "id": scenario.id,
        "subject": scenario.subject,
        "title": scenario.title,
        "narrative": scenario.narrative,
        "learning_objective": scenario.learning_objective.value,
        "applicable_dimensions": [d.value for d in scenario.applicable_dimensions],
        "topic_terms": sorted(scenario.topic_terms),
        "dimension_notes": {
            d.value: note for d, note in sorted(scenario.dimension_notes.items(), key=lambda kv: kv[0].value)
        },
    }


def scenarios_to_bundle(scenarios: Iterable[Scenario]) -> dict[str, Any]:
    return {"version": 1, "scenarios": [scenario_to_dict(s) for s in scenarios]}


def load_scenario_bundle(path: str | Path) -> list[Scenario]:
    with open(path, "r", encoding="utf-8") as fh:
        doc = yaml.safe_load(fh)
    return validate_scenario_config(doc)


def grade_report_to_dict(report: GradeReport) -> dict[str, Any]:
    payload: dict[str, Any] = {
        "scenario_id": report.scenario_id,
        "grader_kind": report.grader_kind.value,
        "template_version": report.template_version,
        "verdicts": {
            dim.value: {"pass": v.passed, "explanation": v.explanation}
            for dim, v in report.ordered_verdicts()
        },
    }
    if report.attempt is not None:
        payload["attempt"] = {
            "session_id": report.attempt.session_id,
            "scenario_id": report.attempt.scenario_id,
            "attempt_index": report.attempt.attempt_index,
            "prompt_text": report.attempt.prompt_text,
            "timestamp": report.attempt.timestamp,
        }
    return payload


def grade_report_from_dict(payload: Mapping[str, Any]) -> GradeReport:
    attempt = None
    if payload.get("attempt"):
        a = payload["attempt"]
        attempt = PromptAttempt(
            session_id=a["session_id"],
            scenario_id=a["scenario_id"],
            attempt_index=int(a["attempt_index"]),
            prompt_text=a["prompt_text"],
            timestamp=float(a["timestamp"]),
        )
    verdicts = {
        RubricDimension(k): Verdict(passed=bool(v["pass"]), explanation=v["explanation"])
        for k, v in payload["verdicts"].items()
    }
    return GradeReport(
        scenario_id=payload["scenario_id"],
        verdicts=verdicts,
        grader_kind=GraderKind(payload["grader_kind"]),
        template_version=payload["template_version"],
        attempt=attempt,
    )


def canonical_json(payload: Any) -> str:
    """Stable JSON encoding used for checksums and byte-reproducible exports."""
    return json.dumps(payload, sort_keys=True, ensure_ascii=False, separators=(",", ":"))
