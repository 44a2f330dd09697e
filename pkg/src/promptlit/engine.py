"""Session orchestration shared by the HTTP service, the CLI, and the
cohort simulator. Each method validates input, emits the matching events,
and returns plain JSON-ready data.
"""

from __future__ import annotations

import csv
import io
import time
import uuid
from dataclasses import dataclass, field
from typing import Any, Callable, Mapping

from . import analyses, reports
from .assessment import AssessmentForm, AssessmentItem, ItemKind
from .content import SurveyBundle
from .domain import (
    GENERAL_DEFINITIONS,
    CANONICAL_DIMENSION_ORDER,
    GradeReport,
    PromptAttempt,
    Scenario,
    grade_report_from_dict,
    grade_report_to_dict,
)
from .flow import (
    EventKind,
    IllegalTransition,
    Phase,
    SessionState,
    Step,
    apply,
    legal_event_kinds,
    new_event,
)
from .gateway import GatewayConfig, Transport, send_chat
from .grading import (
    EmptyPrompt,
    build_chat_request,
    grade_prompt,
    mock_chat_reply,
    mock_grade,
)
from .psychometrics import CoverageMismatch
from .store import Store

GRADER_BACKENDS = ("mock", "live")


class InvalidInput(ValueError):
    pass


@dataclass
class EngineConfig:
    grader_backend: str = "mock"
    chat_backend: str = "mock"
    active_form_id: str = "form-v1"
    model_name: str = "gpt-4o"
    gateway: GatewayConfig = field(default_factory=GatewayConfig)

    def __post_init__(self) -> None:
        if self.grader_backend not in GRADER_BACKENDS:
            raise ValueError(f"grader_backend must be one of {GRADER_BACKENDS}")
        if self.chat_backend not in GRADER_BACKENDS:
            raise ValueError(f"chat_backend must be one of {GRADER_BACKENDS}")


class Engine:
    def __init__(
        self,
        scenarios: list[Scenario],
        bank: Mapping[str, AssessmentItem],
        forms: Mapping[str, AssessmentForm],
        survey: SurveyBundle,
        store: Store,
        config: EngineConfig | None = None,
        *,
        transport: Transport | None = None,
        clock: Callable[[], float] = time.time,
        session_id_factory: Callable[[], str] | None = None,
    ):
        self.scenarios = scenarios
        self.scenario_by_id = {s.id: s for s in scenarios}
        self.bank = dict(bank)
        self.forms = dict(forms)
        self.survey = survey
        self.store = store
        self.config = config or EngineConfig()
        self.transport = transport
        self.clock = clock
        self._session_id_factory = session_id_factory or (lambda: uuid.uuid4().hex[:12])
        if self.config.active_form_id not in self.forms:
            raise ValueError(f"active form {self.config.active_form_id!r} not in bundle")

    @property
    def active_form(self) -> AssessmentForm:
        return self.forms[self.config.active_form_id]

    # -- content payloads ----------------------------------------------------

    def scenarios_payload(self) -> dict[str, Any]:
        return {
            "dimension_order": [d.value for d in CANONICAL_DIMENSION_ORDER],
            "dimension_definitions": {
                d.value: GENERAL_DEFINITIONS[d] for d in CANONICAL_DIMENSION_ORDER
            },
            "scenarios": [
                {
                    "id": s.id,
                    "subject": s.subject,
                    "title": s.title,
                    "narrative": s.narrative,
                    "learning_objective": s.learning_objective.value,
                    "applicable_dimensions": [d.value for d in s.applicable_dimensions],
                    "dimension_notes": {
                        d.value: s.dimension_note(d) for d in s.applicable_dimensions
                    },
                }
                for s in self.scenarios
            ],
        }

    def assessment_payload(self) -> dict[str, Any]:
        # Answer keys stay server-side.
        form = self.active_form
        return {
            "form_id": form.id,
            "version": form.version.value,
            "items": [
                {
                    "id": item.id,
                    "kind": item.kind.value,
                    "stem": item.stem,
                    "options": list(item.options),
                }
                for item in (self.bank[i] for i in form.item_ids)
            ],
        }

    def survey_payload(self) -> dict[str, Any]:
        return {
            "pre_survey": [{"id": i.id, "stem": i.stem} for i in self.survey.pre_survey],
            "post_survey": [{"id": i.id, "stem": i.stem} for i in self.survey.post_survey],
            "reflection": [{"id": i.id, "stem": i.stem} for i in self.survey.reflection],
            "warmup": [
                {"id": w.id, "kind": w.kind, "stem": w.stem, "options": list(w.options), "hint": w.hint}
                for w in self.survey.warmup
            ],
        }

    # -- session lifecycle ----------------------------------------------------

    def start_session(self, student_id: str) -> dict[str, Any]:
        if not student_id or not student_id.strip():
            raise InvalidInput("student_id must be non-empty")
        session_id = self._session_id_factory()
        self.store.start_session(student_id.strip(), session_id)
        return self.session_view(session_id)

    def session_view(self, session_id: str) -> dict[str, Any]:
        state = self.store.state(session_id)
        view: dict[str, Any] = {
            "session_id": state.session_id,
            "student_id": state.student_id,
            "phase": state.phase.value,
            "step": state.step.value if state.step else None,
            "scenario_index": state.scenario_index,
            "attempts": list(state.attempts),
            "legal_events": [k.value for k in legal_event_kinds(state)],
        }
        if state.phase is Phase.PRACTICE:
            assert state.scenario_index is not None
            scenario = self.scenarios[state.scenario_index]
            view["scenario_id"] = scenario.id
            view["last_response"] = self._last_for_scenario(
                session_id, EventKind.RESPONSE_RECEIVED, state.scenario_index
            )
            grade = self._last_for_scenario(
                session_id, EventKind.GRADE_RECEIVED, state.scenario_index
            )
            view["last_grade"] = grade["report"] if grade else None
            if view["last_response"] is not None:
                view["last_response"] = view["last_response"]["text"]
        return view

    def _last_for_scenario(
        self, session_id: str, kind: EventKind, scenario_index: int
    ) -> dict[str, Any] | None:
        for event in reversed(self.store.events(session_id)):
            if event.kind is kind and event.payload.get("scenario_index") == scenario_index:
                return dict(event.payload)
        return None

    def _append(self, state: SessionState, kind: EventKind, payload: Mapping[str, Any]) -> SessionState:
        event = new_event(state, kind, payload, timestamp=self.clock())
        return self.store.append_event(event)

    # -- steps ----------------------------------------------------------------

    def submit_survey(self, session_id: str, survey: str, answers: Mapping[str, Any]) -> dict[str, Any]:
        state = self.store.state(session_id)
        if survey not in ("pre", "post"):
            raise InvalidInput("survey must be 'pre' or 'post'")
        expected = self.survey.pre_survey if survey == "pre" else self.survey.post_survey
        clean: dict[str, int] = {}
        for item in expected:
            value = answers.get(item.id)
            if not isinstance(value, int) or isinstance(value, bool) or not 1 <= value <= 5:
                raise InvalidInput(f"survey answer {item.id} must be an integer in 1..5")
            clean[item.id] = value
        extra = set(answers) - {i.id for i in expected}
        if extra:
            raise InvalidInput(f"unknown survey items: {sorted(extra)}")
        self._append(state, EventKind.SURVEY_ANSWERED, {"survey": survey, "answers": clean})
        return self.session_view(session_id)

    def submit_test(self, session_id: str, answers: Mapping[str, Any]) -> dict[str, Any]:
        state = self.store.state(session_id)
        occasion = {Phase.PRE_TEST: "pre", Phase.POST_TEST: "post"}.get(state.phase)
        if occasion is None:
            # let the state machine produce the canonical 409
            occasion = "pre"
        form = self.active_form
        clean: dict[str, Any] = {}
        for item_id, value in answers.items():
            if item_id not in form.item_ids:
                raise InvalidInput(f"unknown item {item_id!r} for form {form.id}")
            item = self.bank[item_id]
            if item.kind is ItemKind.MCQ:
                if not isinstance(value, int) or isinstance(value, bool) or not 0 <= value < len(item.options):
                    raise InvalidInput(f"answer for {item_id} must be an option index")
            elif item.kind is ItemKind.TF:
                if not isinstance(value, bool):
                    raise InvalidInput(f"answer for {item_id} must be true/false")
            elif item.kind is ItemKind.OE:
                if not isinstance(value, str) or not value.strip():
                    raise InvalidInput(f"answer for {item_id} must be non-empty text")
            clean[item_id] = value
        self._append(
            state,
            EventKind.TEST_ANSWERED,
            {"occasion": occasion, "form_id": form.id, "answers": clean},
        )
        return self.session_view(session_id)

    def answer_warmup(self, session_id: str, item_id: str, answer: Any) -> dict[str, Any]:
        state = self.store.state(session_id)
        warmup = {w.id: w for w in self.survey.warmup}
        if item_id not in warmup:
            raise InvalidInput(f"unknown warmup item {item_id!r}")
        item = warmup[item_id]
        self._append(
            state, EventKind.WARMUP_ANSWERED, {"item_id": item_id, "answer": answer}
        )
        correct = answer == item.correct
        view = self.session_view(session_id)
        view["warmup_result"] = {
            "item_id": item_id,
            "correct": correct,
            "feedback": item.feedback if correct else item.hint,
        }
        return view

    def submit_prompt(self, session_id: str, text: str) -> dict[str, Any]:
        state = self.store.state(session_id)
        if not text or not text.strip():
            raise EmptyPrompt("prompt text must be non-empty")
        if state.phase is not Phase.PRACTICE or state.scenario_index is None:
            raise IllegalTransition(
                state, new_event(state, EventKind.PROMPT_SUBMITTED, {}, self.clock())
            )
        i = state.scenario_index
        scenario = self.scenarios[i]
        attempt_index = state.attempts[i] + 1
        submit_event = new_event(
            state,
            EventKind.PROMPT_SUBMITTED,
            {
                "scenario_index": i,
                "scenario_id": scenario.id,
                "attempt_index": attempt_index,
                "prompt_text": text,
            },
            timestamp=self.clock(),
        )
        # dry-run before the chatbot call so a gateway failure leaves the
        # session untouched and the student can simply generate again
        apply(state, submit_event)
        response_text = self._chat_response(scenario, text)
        state = self.store.append_event(submit_event)
        self._append(
            state,
            EventKind.RESPONSE_RECEIVED,
            {"scenario_index": i, "text": response_text},
        )
        view = self.session_view(session_id)
        view["attempt_index"] = attempt_index
        view["response_text"] = response_text
        return view

    def _chat_response(self, scenario: Scenario, text: str) -> str:
        if self.config.chat_backend == "mock":
            return mock_chat_reply(scenario, text)
        request = build_chat_request(scenario, text, model_name=self.config.model_name)
        reply = send_chat(request, self.config.gateway, self.transport)
        return reply.content

    def check_prompt(self, session_id: str) -> dict[str, Any]:
        state = self.store.state(session_id)
        if (
            state.phase is not Phase.PRACTICE
            or state.scenario_index is None
            or state.step is not Step.RESPONSE_SHOWN
        ):
            raise IllegalTransition(
                state, new_event(state, EventKind.GRADE_RECEIVED, {}, self.clock())
            )
        i = state.scenario_index
        scenario = self.scenarios[i]
        prompt_event = self._last_for_scenario(session_id, EventKind.PROMPT_SUBMITTED, i)
        assert prompt_event is not None  # ResponseShown implies a submitted prompt
        attempt = PromptAttempt(
            session_id=session_id,
            scenario_id=scenario.id,
            attempt_index=int(prompt_event["attempt_index"]),
            prompt_text=str(prompt_event["prompt_text"]),
            timestamp=self.clock(),
        )
        report = self._grade(scenario, attempt)
        self._append(
            state,
            EventKind.GRADE_RECEIVED,
            {"scenario_index": i, "report": grade_report_to_dict(report)},
        )
        view = self.session_view(session_id)
        view["report"] = grade_report_to_dict(report)
        return view

    def _grade(self, scenario: Scenario, attempt: PromptAttempt) -> GradeReport:
        if self.config.grader_backend == "mock":
            return mock_grade(scenario, attempt.prompt_text, attempt=attempt)
        transport = self.transport
        return grade_prompt(
            scenario,
            attempt.prompt_text,
            transport,
            self.config.gateway,
            attempt=attempt,
            model_name=self.config.model_name,
        )

    def advance(self, session_id: str, action: str) -> dict[str, Any]:
        state = self.store.state(session_id)
        if action not in ("retry", "next"):
            raise InvalidInput("action must be 'retry' or 'next'")
        if state.phase is Phase.WARMUP and action == "next":
            scenario = self.scenarios[0]
            self._append(
                state,
                EventKind.SCENARIO_ENTERED,
                {"scenario_index": 0, "scenario_id": scenario.id},
            )
        elif action == "retry":
            self._append(state, EventKind.RETRY_CHOSEN, {"scenario_index": state.scenario_index})
        else:
            self._append(state, EventKind.ADVANCE_CHOSEN, {"scenario_index": state.scenario_index})
        return self.session_view(session_id)

    def submit_reflection(self, session_id: str, answers: Mapping[str, Any]) -> dict[str, Any]:
        state = self.store.state(session_id)
        clean: dict[str, str] = {}
        for item in self.survey.reflection:
            value = answers.get(item.id, "")
            if not isinstance(value, str):
                raise InvalidInput(f"reflection answer {item.id} must be text")
            clean[item.id] = value
        extra = set(answers) - {i.id for i in self.survey.reflection}
        if extra:
            raise InvalidInput(f"unknown reflection items: {sorted(extra)}")
        self._append(state, EventKind.REFLECTION_SUBMITTED, {"answers": clean})
        return self.session_view(session_id)

    # -- exports & analyses -----------------------------------------------------

    EXPORT_KINDS = ("attempts", "grades", "responses", "surveys", "reflections")

    def export_csv(self, kind: str) -> str:
        if kind not in self.EXPORT_KINDS:
            raise InvalidInput(f"unknown export kind {kind!r}; expected one of {self.EXPORT_KINDS}")
        out = io.StringIO()
        writer = csv.writer(out, lineterminator="\n")
        if kind == "attempts":
            writer.writerow(
                ["student_id", "session_id", "scenario_id", "attempt_index", "prompt_text", "timestamp"]
            )
            for sid, event in self._iter_events(EventKind.PROMPT_SUBMITTED):
                writer.writerow(
                    [
                        self.store.state(sid).student_id,
                        sid,
                        event.payload["scenario_id"],
                        event.payload["attempt_index"],
                        event.payload["prompt_text"],
                        event.timestamp,
                    ]
                )
        elif kind == "grades":
            writer.writerow(
                [
                    "student_id", "session_id", "scenario_id", "attempt_index",
                    "dimension", "pass", "explanation", "grader_kind", "template_version",
                ]
            )
            for sid, event in self._iter_events(EventKind.GRADE_RECEIVED):
                report = grade_report_from_dict(event.payload["report"])
                attempt = report.attempt
                for dim, verdict in report.ordered_verdicts():
                    writer.writerow(
                        [
                            self.store.state(sid).student_id,
                            sid,
                            report.scenario_id,
                            attempt.attempt_index if attempt else "",
                            dim.value,
                            int(verdict.passed),
                            verdict.explanation,
                            report.grader_kind.value,
                            report.template_version,
                        ]
                    )
        elif kind == "responses":
            writer.writerow(
                ["student_id", "session_id", "occasion", "form_id", "item_id", "response", "score"]
            )
            for sid, event in self._iter_events(EventKind.TEST_ANSWERED):
                form_id = event.payload["form_id"]
                form = self.forms.get(form_id)
                for item_id, value in sorted(event.payload["answers"].items()):
                    item = self.bank.get(item_id)
                    score = ""
                    if item is not None and item.kind in (ItemKind.MCQ, ItemKind.TF):
                        score = int(value == item.correct)
                    writer.writerow(
                        [
                            self.store.state(sid).student_id,
                            sid,
                            event.payload["occasion"],
                            form_id if form else form_id,
                            item_id,
                            value,
                            score,
                        ]
                    )
        elif kind == "surveys":
            writer.writerow(["student_id", "session_id", "survey", "item_id", "value"])
            for sid, event in self._iter_events(EventKind.SURVEY_ANSWERED):
                for item_id, value in sorted(event.payload["answers"].items()):
                    writer.writerow(
                        [self.store.state(sid).student_id, sid, event.payload["survey"], item_id, value]
                    )
        elif kind == "reflections":
            writer.writerow(["student_id", "session_id", "question_id", "answer_text"])
            for sid, event in self._iter_events(EventKind.REFLECTION_SUBMITTED):
                for item_id, value in sorted(event.payload["answers"].items()):
                    writer.writerow([self.store.state(sid).student_id, sid, item_id, value])
        return out.getvalue()

    def _iter_events(self, kind: EventKind):
        for session_id in self.store.session_ids():
            for event in self.store.events(session_id):
                if event.kind is kind:
                    yield session_id, event

    def ingest_labels(self, payload: Mapping[str, Any]) -> dict[str, int]:
        from .store import GradeLabel, OeScoreLabel

        counts = {"grade_labels": 0, "oe_scores": 0}
        for raw in payload.get("grade_labels", []):
            label = GradeLabel(
                session_id=str(raw["session_id"]),
                scenario_id=str(raw["scenario_id"]),
                attempt_index=int(raw["attempt_index"]),
                dimension=str(raw["dimension"]),
                passed=bool(raw["pass"]),
                explanation=str(raw.get("explanation", "human label")),
                explanation_rating=raw.get("explanation_rating"),
            )
            if label.explanation_rating is not None and float(label.explanation_rating) not in (0.0, 0.5, 1.0):
                raise InvalidInput(
                    f"explanation_rating must be 1, 0.5, or 0; got {label.explanation_rating!r}"
                )
            self.store.add_label(label)
            counts["grade_labels"] += 1
        for raw in payload.get("oe_scores", []):
            score = int(raw["score"])
            if score not in (0, 1):
                raise InvalidInput(f"oe score must be 0 or 1, got {raw['score']!r}")
            occasion = str(raw["occasion"])
            if occasion not in ("pre", "post"):
                raise InvalidInput("oe score occasion must be 'pre' or 'post'")
            self.store.add_label(
                OeScoreLabel(
                    student_id=str(raw["student_id"]),
                    item_id=str(raw["item_id"]),
                    occasion=occasion,
                    score=score,
                )
            )
            counts["oe_scores"] += 1
        return counts

    def analysis_report(
        self, form_id: str | None = None, occasion: str = "post", source: str = "auto_fallback"
    ) -> dict[str, Any]:
        form = self.forms[form_id] if form_id else self.active_form
        out: dict[str, Any] = {"form_id": form.id}
        try:
            item_report = analyses.item_analysis(self.store, form, self.bank, occasion)
            out["item_analysis"] = item_report.to_dict()
            out["item_analysis_text"] = reports.render_item_table(item_report)
        except (analyses.AnalysisPrecondition, ValueError) as exc:
            out["item_analysis"] = {"error": str(exc)}
        try:
            grader = analyses.grader_evaluation(self.store)
            out["grader_eval"] = grader.to_dict()
            out["grader_eval_text"] = reports.render_grader_table(grader)
        except (analyses.AnalysisPrecondition, CoverageMismatch) as exc:
            out["grader_eval"] = {"error": str(exc)}
        try:
            learning = analyses.learning_battery(self.store, self.scenarios, source)
            out["learning"] = learning.to_dict()
            out["learning_text"] = reports.render_learning_table(learning)
        except analyses.AnalysisPrecondition as exc:
            out["learning"] = {"error": str(exc)}
        return out
