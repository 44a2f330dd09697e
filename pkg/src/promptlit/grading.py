"""Grading pipeline: request construction, structured-output parsing, the
repair loop, and a deterministic rule-based mock grader for offline use.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass
from importlib import resources
from string import Template
from typing import Callable, Mapping

from .domain import (
    GradeReport,
    GraderKind,
    PromptAttempt,
    RubricDimension,
    Scenario,
    Verdict,
    scenario_dimensions,
)
from .gateway import (
    ChatMessage,
    ChatReply,
    ChatRequest,
    GatewayConfig,
    ResponseFormat,
    Role,
    Transport,
    send_chat,
)

GRADING_TEMPLATE_VERSION = "grading/v1"
CHAT_TEMPLATE_VERSION = "chat/v1"
MOCK_RULES_VERSION = "mock/v1"

DEFAULT_GRADING_MODEL = "gpt-4o"

# Total gateway calls per grade_prompt invocation: 1 initial + 2 repairs.
MAX_REPAIR_ATTEMPTS = 2


def _load_template(name: str) -> Template:
    text = resources.files("promptlit.assets").joinpath("templates", name).read_text("utf-8")
    return Template(text)


class EmptyPrompt(ValueError):
    """Student prompt is empty after trimming."""


class GradeParseError(Exception):
    """Assistant output failed schema validation; `dimension` names the key."""

    def __init__(self, message: str, dimension: str | None = None):
        self.dimension = dimension
        super().__init__(message)


class Unparseable(GradeParseError):
    pass


class MissingDimension(GradeParseError):
    pass


class ExtraDimension(GradeParseError):
    pass


class NonBooleanVerdict(GradeParseError):
    pass


class EmptyExplanation(GradeParseError):
    pass


class GradingFailed(Exception):
    """Repair attempts exhausted; wraps the final parse error."""

    def __init__(self, last_error: GradeParseError, calls: int):
        self.last_error = last_error
        self.calls = calls
        super().__init__(f"grading failed after {calls} calls: {last_error}")


@dataclass(frozen=True)
class GradingSchema:
    scenario: Scenario
    expected_keys: tuple[RubricDimension, ...]

    @classmethod
    def for_scenario(cls, scenario: Scenario) -> "GradingSchema":
        return cls(scenario=scenario, expected_keys=scenario_dimensions(scenario))


def build_grading_request(
    scenario: Scenario,
    prompt_text: str,
    *,
    model_name: str = DEFAULT_GRADING_MODEL,
) -> ChatRequest:
    """System message carries the scenario, per-dimension descriptions, and
    the structured-output contract; the student prompt goes through verbatim.
    """
    if not prompt_text.strip():
        raise EmptyPrompt("prompt_text must be non-empty")
    keys = scenario_dimensions(scenario)
    dimension_specs = "\n".join(
        f"- {d.value}: {scenario.dimension_note(d)}" for d in keys
    )
    schema_example = ",\n".join(
        f'  "{d.value}": {{"pass": true, "explanation": "..."}}' for d in keys
    )
    system = _load_template("grading_system_v1.txt").substitute(
        narrative=scenario.narrative.strip(),
        dimension_specs=dimension_specs,
        schema_example=schema_example,
        keys=", ".join(d.value for d in keys),
    )
    return ChatRequest(
        messages=(
            ChatMessage(Role.SYSTEM, system),
            ChatMessage(Role.USER, prompt_text),
        ),
        model_name=model_name,
        response_format_hint=ResponseFormat.STRUCTURED,
        temperature=0.0,
    )


def build_chat_request(
    scenario: Scenario,
    prompt_text: str,
    *,
    model_name: str = DEFAULT_GRADING_MODEL,
) -> ChatRequest:
    """Plain free-text request framing the assistant as a study helper."""
    if not prompt_text.strip():
        raise EmptyPrompt("prompt_text must be non-empty")
    system = _load_template("chat_system_v1.txt").substitute(subject=scenario.subject)
    return ChatRequest(
        messages=(
            ChatMessage(Role.SYSTEM, system),
            ChatMessage(Role.USER, prompt_text),
        ),
        model_name=model_name,
        response_format_hint=ResponseFormat.FREE_TEXT,
        temperature=0.7,
    )


_FENCED_JSON = re.compile(r"```(?:json)?\s*(\{.*?\})\s*```", re.DOTALL)


def _extract_json_object(raw: str) -> dict:
    """Pull the grading object out of the assistant text.

    Prefers a fenced ```json block; falls back to the first balanced
    top-level {...} region.
    """
    match = _FENCED_JSON.search(raw)
    candidates: list[str] = []
    if match:
        candidates.append(match.group(1))
    start = raw.find("{")
    if start != -1:
        depth = 0
        in_string = False
        escaped = False
        for i in range(start, len(raw)):
            ch = raw[i]
            if in_string:
                if escaped:
                    escaped = False
                elif ch == "\\":
                    escaped = True
                elif ch == '"':
                    in_string = False
                continue
            if ch == '"':
                in_string = True
            elif ch == "{":
                depth += 1
            elif ch == "}":
                depth -= 1
                if depth == 0:
                    candidates.append(raw[start : i + 1])
                    break
    for candidate in candidates:
        try:
            obj = json.loads(candidate)
        except json.JSONDecodeError:
            continue
        if isinstance(obj, dict):
            return obj
    raise Unparseable("no JSON object found in assistant output")


def parse_grade_report(
    raw: str,
    schema: GradingSchema,
    grader_kind: GraderKind,
    *,
    attempt: PromptAttempt | None = None,
    template_version: str = GRADING_TEMPLATE_VERSION,
) -> GradeReport:
    """Validate assistant output against the schema into a GradeReport.

    Key-set equality, boolean verdicts, and non-empty explanations are all
    enforced; every error names the offending dimension.
    """
    obj = _extract_json_object(raw)

    expected = {d.value for d in schema.expected_keys}
    for key in obj:
        if key not in expected:
            raise ExtraDimension(f"unexpected dimension key {key!r}", dimension=str(key))

    verdicts: dict[RubricDimension, Verdict] = {}
    for dim in schema.expected_keys:
        if dim.value not in obj:
            raise MissingDimension(f"missing dimension {dim.value}", dimension=dim.value)
        entry = obj[dim.value]
        if not isinstance(entry, Mapping):
            raise NonBooleanVerdict(
                f"verdict for {dim.value} is not an object", dimension=dim.value
            )
        passed = entry.get("pass")
        if not isinstance(passed, bool):
            raise NonBooleanVerdict(
                f"verdict for {dim.value} is not boolean: {passed!r}", dimension=dim.value
            )
        explanation = entry.get("explanation")
        if not isinstance(explanation, str) or not explanation.strip():
            raise EmptyExplanation(
                f"empty explanation for {dim.value}", dimension=dim.value
            )
        verdicts[dim] = Verdict(passed=passed, explanation=explanation)

    return GradeReport(
        scenario_id=schema.scenario.id,
        verdicts=verdicts,
        grader_kind=grader_kind,
        template_version=template_version,
        attempt=attempt,
    )


def render_grade_report(report: GradeReport) -> str:
    """The inverse of parse_grade_report: a fenced JSON grading block."""
    obj = {
        dim.value: {"pass": v.passed, "explanation": v.explanation}
        for dim, v in report.ordered_verdicts()
    }
    return "```json\n" + json.dumps(obj, indent=2, ensure_ascii=False) + "\n```"


def grade_prompt(
    scenario: Scenario,
    prompt_text: str,
    transport: Transport,
    config: GatewayConfig,
    *,
    attempt: PromptAttempt | None = None,
    model_name: str = DEFAULT_GRADING_MODEL,
    **send_kwargs,
) -> GradeReport:
    """Build, send, and parse a grading call.

    On a parse failure the assistant reply and the error are appended to the
    conversation and the model is re-asked, at most MAX_REPAIR_ATTEMPTS
    times; gateway errors propagate unchanged.
    """
    schema = GradingSchema.for_scenario(scenario)
    request = build_grading_request(scenario, prompt_text, model_name=model_name)
    calls = 0
    last_error: GradeParseError | None = None
    for _ in range(1 + MAX_REPAIR_ATTEMPTS):
        reply: ChatReply = send_chat(request, config, transport, **send_kwargs)
        calls += 1
        try:
            return parse_grade_report(
                reply.content, schema, GraderKind.LLM, attempt=attempt
            )
        except GradeParseError as exc:
            last_error = exc
            repair = (
                f"Your previous reply could not be used: {exc}. "
                "Reply again with only the fenced JSON object, using exactly "
                f"these keys: {', '.join(d.value for d in schema.expected_keys)}."
            )
            request = request.with_appended(
                ChatMessage(Role.ASSISTANT, reply.content or "(empty)"),
                ChatMessage(Role.USER, repair),
            )
    assert last_error is not None
    raise GradingFailed(last_error, calls)


# ---------------------------------------------------------------------------
# Mock grader: fixed keyword rules, documented in the README. A test double
# for offline deployments, not a model of the LLM grader's judgments.
# ---------------------------------------------------------------------------

_WORD = re.compile(r"[a-z0-9']+")

REQUEST_VERBS = frozenset({"explain", "teach", "quiz", "help", "list", "describe"})
ELABORATION_CUES = frozenset({"why", "how", "steps", "explain", "example"})
CONTEXT_CUES = ("i am", "i learned", "my class", "for my")
ANSWER_SEEKING_PATTERNS = (
    "what is the answer",
    "solve for",
    "what are x and y",
    "give me the answer",
)
CONCISENESS_MAX_WORDS = 60


def _stem(token: str) -> str:
    for suffix in ("ing", "ed"):
        if token.endswith(suffix) and len(token) > len(suffix) + 2:
            return token[: -len(suffix)]
    if token.endswith(("xes", "ches", "shes", "zes", "sses")) and len(token) > 4:
        return token[:-2]
    if token.endswith("s") and not token.endswith("ss") and len(token) > 3:
        return token[:-1]
    return token


def _normalize(text: str) -> str:
    return " ".join(_WORD.findall(text.lower()))


def _stemmed_tokens(text: str) -> set[str]:
    return {_stem(t) for t in _WORD.findall(text.lower())}


def _has_topic_term(prompt: str, scenario: Scenario) -> bool:
    tokens = _stemmed_tokens(prompt)
    return any(_stem(term.lower()) in tokens for term in scenario.topic_terms)


RulePredicate = Callable[[str, Scenario], tuple[bool, str]]


def _rule_relevance(prompt: str, scenario: Scenario) -> tuple[bool, str]:
    if _has_topic_term(prompt, scenario):
        return True, "The prompt mentions a topic keyword from the scenario."
    return False, "The prompt does not mention any of the scenario's topic keywords."


def _rule_clarity(prompt: str, scenario: Scenario) -> tuple[bool, str]:
    tokens = _stemmed_tokens(prompt)
    has_verb = any(_stem(v) in tokens for v in REQUEST_VERBS)
    has_topic = _has_topic_term(prompt, scenario)
    if has_verb and has_topic:
        return True, "The prompt pairs a request verb with a scenario topic keyword."
    if not has_verb:
        return False, "The prompt has no request verb (explain, teach, quiz, help, list, describe)."
    return False, "The prompt has a request verb but no scenario topic keyword."


def _rule_conciseness(prompt: str, scenario: Scenario) -> tuple[bool, str]:
    n_words = len(prompt.split())
    if n_words <= CONCISENESS_MAX_WORDS:
        return True, f"The prompt is {n_words} words, within the {CONCISENESS_MAX_WORDS}-word limit."
    return False, f"The prompt is {n_words} words, over the {CONCISENESS_MAX_WORDS}-word limit."


def _rule_background(prompt: str, scenario: Scenario) -> tuple[bool, str]:
    normalized = _normalize(prompt)
    for cue in CONTEXT_CUES:
        if cue in normalized:
            return True, f'The prompt gives first-person context ("{cue}").'
    return False, "The prompt gives no first-person background or context cue."


def _rule_elaboration(prompt: str, scenario: Scenario) -> tuple[bool, str]:
    tokens = _stemmed_tokens(prompt)
    for cue in ELABORATION_CUES:
        if _stem(cue) in tokens:
            return True, f'The prompt asks for elaboration ("{cue}").'
    return False, "The prompt does not ask for elaboration, steps, or an explanation."


def _rule_no_direct_answer(prompt: str, scenario: Scenario) -> tuple[bool, str]:
    normalized = _normalize(prompt)
    for pattern in ANSWER_SEEKING_PATTERNS:
        if pattern in normalized:
            return False, f'The prompt asks for the answer directly ("{pattern}").'
    return True, "The prompt does not ask for the answer directly."


DEFAULT_MOCK_RULES: dict[RubricDimension, RulePredicate] = {
    RubricDimension.RELEVANCE: _rule_relevance,
    RubricDimension.CLARITY_OF_PURPOSE: _rule_clarity,
    RubricDimension.CONCISENESS: _rule_conciseness,
    RubricDimension.BACKGROUND_CONTEXT: _rule_background,
    RubricDimension.REQUEST_ELABORATION: _rule_elaboration,
    RubricDimension.NO_DIRECT_ANSWER: _rule_no_direct_answer,
}


def mock_grade(
    scenario: Scenario,
    prompt_text: str,
    rules: Mapping[RubricDimension, RulePredicate] = DEFAULT_MOCK_RULES,
    *,
    attempt: PromptAttempt | None = None,
) -> GradeReport:
    """Grade with the deterministic rule table; total over every prompt."""
    verdicts: dict[RubricDimension, Verdict] = {}
    for dim in scenario_dimensions(scenario):
        passed, explanation = rules[dim](prompt_text, scenario)
        verdicts[dim] = Verdict(passed=passed, explanation=explanation)
    return GradeReport(
        scenario_id=scenario.id,
        verdicts=verdicts,
        grader_kind=GraderKind.MOCK,
        template_version=MOCK_RULES_VERSION,
        attempt=attempt,
    )


def mock_chat_reply(scenario: Scenario, prompt_text: str) -> str:
    """Canned subject-tagged chatbot answer for offline deployments."""
    tokens = _stemmed_tokens(prompt_text)
    mentioned = sorted(
        term for term in scenario.topic_terms if _stem(term.lower()) in tokens
    )
    if mentioned:
        focus = f"Since you asked about {mentioned[0]}, here is a short overview."
    else:
        focus = "Here is a short overview related to this practice topic."
    return (
        f"[{scenario.subject} helper] {focus} "
        "This offline study helper gives a brief canned answer: review your "
        "class materials, break the idea into smaller parts, and try to "
        "restate it in your own words. Ask a follow-up question about any "
        "part that is still unclear."
    )
