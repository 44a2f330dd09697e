"""Event-sourced state machine for one student session.

The journey is: pre-survey, pre-test, warm-up, three scenario practices
(each a show/submit/respond/grade loop with optional retries), post-test,
post-survey, reflection, done. State is a pure left-fold of events; illegal
transitions are rejected without mutating anything.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from enum import Enum
from typing import Any, Iterable, Mapping

from .domain import PromptAttempt

NUM_SCENARIOS = 3


class Phase(str, Enum):
    PRE_SURVEY = "PreSurvey"
    PRE_TEST = "PreTest"
    WARMUP = "Warmup"
    PRACTICE = "Practice"
    POST_TEST = "PostTest"
    POST_SURVEY = "PostSurvey"
    REFLECTION = "Reflection"
    DONE = "Done"


class Step(str, Enum):
    SCENARIO_SHOWN = "ScenarioShown"
    PROMPT_SUBMITTED = "PromptSubmitted"
    RESPONSE_SHOWN = "ResponseShown"
    GRADED = "Graded"


class EventKind(str, Enum):
    STARTED = "Started"
    SURVEY_ANSWERED = "SurveyAnswered"
    TEST_ANSWERED = "TestAnswered"
    WARMUP_ANSWERED = "WarmupAnswered"
    SCENARIO_ENTERED = "ScenarioEntered"
    PROMPT_SUBMITTED = "PromptSubmitted"
    RESPONSE_RECEIVED = "ResponseReceived"
    GRADE_RECEIVED = "GradeReceived"
    RETRY_CHOSEN = "RetryChosen"
    ADVANCE_CHOSEN = "AdvanceChosen"
    REFLECTION_SUBMITTED = "ReflectionSubmitted"


@dataclass(frozen=True)
class SessionEvent:
    session_id: str
    sequence_no: int
    kind: EventKind
    payload: Mapping[str, Any]
    timestamp: float


@dataclass(frozen=True)
class SessionState:
    session_id: str
    student_id: str
    phase: Phase
    scenario_index: int | None
    step: Step | None
    attempts: tuple[int, ...]
    next_seq: int

    def phase_rank(self) -> int:
        """Total order over phases; apply() never decreases it."""
        base = {
            Phase.PRE_SURVEY: 0,
            Phase.PRE_TEST: 1,
            Phase.WARMUP: 2,
            Phase.PRACTICE: 3,
            Phase.POST_TEST: 3 + NUM_SCENARIOS,
            Phase.POST_SURVEY: 4 + NUM_SCENARIOS,
            Phase.REFLECTION: 5 + NUM_SCENARIOS,
            Phase.DONE: 6 + NUM_SCENARIOS,
        }[self.phase]
        if self.phase is Phase.PRACTICE:
            assert self.scenario_index is not None
            return base + self.scenario_index
        return base


class TransitionError(Exception):
    pass


class IllegalTransition(TransitionError):
    def __init__(self, state: SessionState, event: SessionEvent, reason: str = ""):
        self.from_phase = state.phase
        self.event_kind = event.kind
        detail = f" ({reason})" if reason else ""
        super().__init__(
            f"event {event.kind.value} is illegal in phase {state.phase.value}"
            f"{'' if state.step is None else ' step ' + state.step.value}{detail}"
        )


class SequenceGap(TransitionError):
    def __init__(self, expected: int, got: int):
        self.expected = expected
        self.got = got
        super().__init__(f"expected sequence_no {expected}, got {got}")


class NoStartEvent(TransitionError):
    pass


def start_session(
    student_id: str,
    session_id: str,
    timestamp: float,
) -> tuple[SessionState, SessionEvent]:
    """Fresh session in PreSurvey plus the Started event to append."""
    event = SessionEvent(
        session_id=session_id,
        sequence_no=1,
        kind=EventKind.STARTED,
        payload={"student_id": student_id},
        timestamp=timestamp,
    )
    state = SessionState(
        session_id=session_id,
        student_id=student_id,
        phase=Phase.PRE_SURVEY,
        scenario_index=None,
        step=None,
        attempts=(0,) * NUM_SCENARIOS,
        next_seq=2,
    )
    return state, event


def new_event(
    state: SessionState,
    kind: EventKind,
    payload: Mapping[str, Any],
    timestamp: float,
) -> SessionEvent:
    """An event stamped with the state's next sequence number."""
    return SessionEvent(
        session_id=state.session_id,
        sequence_no=state.next_seq,
        kind=kind,
        payload=dict(payload),
        timestamp=timestamp,
    )


def _require_index(state: SessionState, event: SessionEvent) -> int:
    got = event.payload.get("scenario_index")
    if got != state.scenario_index:
        raise IllegalTransition(
            state, event, f"scenario_index {got!r} does not match {state.scenario_index!r}"
        )
    assert state.scenario_index is not None
    return state.scenario_index


def _require_tag(state: SessionState, event: SessionEvent, key: str, expected: str) -> None:
    if event.payload.get(key) != expected:
        raise IllegalTransition(
            state, event, f"{key} must be {expected!r}, got {event.payload.get(key)!r}"
        )


def apply(state: SessionState, event: SessionEvent) -> SessionState:
    """Deterministic transition; raises without mutation on illegal input."""
    if event.sequence_no != state.next_seq:
        raise SequenceGap(state.next_seq, event.sequence_no)
    nxt = _transition(state, event)
    return replace(nxt, next_seq=state.next_seq + 1)


def _transition(state: SessionState, event: SessionEvent) -> SessionState:
    kind = event.kind
    phase = state.phase

    if kind is EventKind.SURVEY_ANSWERED:
        if phase is Phase.PRE_SURVEY:
            _require_tag(state, event, "survey", "pre")
            return replace(state, phase=Phase.PRE_TEST)
        if phase is Phase.POST_SURVEY:
            _require_tag(state, event, "survey", "post")
            return replace(state, phase=Phase.REFLECTION)
        raise IllegalTransition(state, event)

    if kind is EventKind.TEST_ANSWERED:
        if phase is Phase.PRE_TEST:
            _require_tag(state, event, "occasion", "pre")
            return replace(state, phase=Phase.WARMUP)
        if phase is Phase.POST_TEST:
            _require_tag(state, event, "occasion", "post")
            return replace(state, phase=Phase.POST_SURVEY)
        raise IllegalTransition(state, event)

    if kind is EventKind.WARMUP_ANSWERED:
        if phase is Phase.WARMUP:
            return state
        raise IllegalTransition(state, event)

    if kind is EventKind.SCENARIO_ENTERED:
        if phase is Phase.WARMUP:
            if event.payload.get("scenario_index") != 0:
                raise IllegalTransition(state, event, "first scenario has index 0")
            return replace(state, phase=Phase.PRACTICE, scenario_index=0, step=Step.SCENARIO_SHOWN)
        raise IllegalTransition(state, event)

    if kind is EventKind.PROMPT_SUBMITTED:
        if phase is Phase.PRACTICE and state.step is Step.SCENARIO_SHOWN:
            i = _require_index(state, event)
            expected_attempt = state.attempts[i] + 1
            if event.payload.get("attempt_index") != expected_attempt:
                raise IllegalTransition(
                    state, event, f"attempt_index must be {expected_attempt}"
                )
            attempts = list(state.attempts)
            attempts[i] = expected_attempt
            return replace(state, step=Step.PROMPT_SUBMITTED, attempts=tuple(attempts))
        raise IllegalTransition(state, event)

    if kind is EventKind.RESPONSE_RECEIVED:
        if phase is Phase.PRACTICE and state.step is Step.PROMPT_SUBMITTED:
            _require_index(state, event)
            return replace(state, step=Step.RESPONSE_SHOWN)
        raise IllegalTransition(state, event)

    if kind is EventKind.GRADE_RECEIVED:
        if phase is Phase.PRACTICE and state.step is Step.RESPONSE_SHOWN:
            _require_index(state, event)
            return replace(state, step=Step.GRADED)
        raise IllegalTransition(state, event)

    if kind is EventKind.RETRY_CHOSEN:
        if phase is Phase.PRACTICE and state.step is Step.GRADED:
            _require_index(state, event)
            return replace(state, step=Step.SCENARIO_SHOWN)
        raise IllegalTransition(state, event)

    if kind is EventKind.ADVANCE_CHOSEN:
        if phase is Phase.PRACTICE and state.step is Step.GRADED:
            i = _require_index(state, event)
            if i + 1 < NUM_SCENARIOS:
                return replace(state, scenario_index=i + 1, step=Step.SCENARIO_SHOWN)
            return replace(state, phase=Phase.POST_TEST, scenario_index=None, step=None)
        raise IllegalTransition(state, event)

    if kind is EventKind.REFLECTION_SUBMITTED:
        if phase is Phase.REFLECTION:
            return replace(state, phase=Phase.DONE)
        raise IllegalTransition(state, event)

    # Started is consumed by replay()/start_session(), never by apply().
    raise IllegalTransition(state, event)


def replay(events: Iterable[SessionEvent]) -> SessionState:
    """Left-fold of apply over an ordered event log."""
    iterator = iter(events)
    first = next(iterator, None)
    if first is None:
        raise NoStartEvent("empty event log")
    if first.kind is not EventKind.STARTED:
        raise NoStartEvent(f"log starts with {first.kind.value}, not Started")
    if first.sequence_no != 1:
        raise SequenceGap(1, first.sequence_no)
    state, _ = start_session(
        student_id=str(first.payload.get("student_id", "")),
        session_id=first.session_id,
        timestamp=first.timestamp,
    )
    for event in iterator:
        state = apply(state, event)
    return state


def last_attempt_per_scenario(events: Iterable[SessionEvent]) -> dict[str, PromptAttempt]:
    """Highest-attempt prompt per scenario id; untouched scenarios absent."""
    latest: dict[str, PromptAttempt] = {}
    for event in events:
        if event.kind is not EventKind.PROMPT_SUBMITTED:
            continue
        attempt = PromptAttempt(
            session_id=event.session_id,
            scenario_id=str(event.payload["scenario_id"]),
            attempt_index=int(event.payload["attempt_index"]),
            prompt_text=str(event.payload["prompt_text"]),
            timestamp=event.timestamp,
        )
        current = latest.get(attempt.scenario_id)
        if current is None or attempt.attempt_index > current.attempt_index:
            latest[attempt.scenario_id] = attempt
    return latest


def legal_event_kinds(state: SessionState) -> tuple[EventKind, ...]:
    """Event kinds apply() would accept in this state (payloads permitting)."""
    phase, step = state.phase, state.step
    if phase in (Phase.PRE_SURVEY, Phase.POST_SURVEY):
        return (EventKind.SURVEY_ANSWERED,)
    if phase in (Phase.PRE_TEST, Phase.POST_TEST):
        return (EventKind.TEST_ANSWERED,)
    if phase is Phase.WARMUP:
        return (EventKind.WARMUP_ANSWERED, EventKind.SCENARIO_ENTERED)
    if phase is Phase.PRACTICE:
        return {
            Step.SCENARIO_SHOWN: (EventKind.PROMPT_SUBMITTED,),
            Step.PROMPT_SUBMITTED: (EventKind.RESPONSE_RECEIVED,),
            Step.RESPONSE_SHOWN: (EventKind.GRADE_RECEIVED,),
            Step.GRADED: (EventKind.RETRY_CHOSEN, EventKind.ADVANCE_CHOSEN),
        }[step]
    if phase is Phase.REFLECTION:
        return (EventKind.REFLECTION_SUBMITTED,)
    return ()


# --- serialization (snapshots and the persisted log) -----------------------


def event_to_dict(event: SessionEvent) -> dict[str, Any]:
    return {
        "session_id": event.session_id,
        "sequence_no": event.sequence_no,
        "kind": event.kind.value,
        "payload": dict(event.payload),
        "timestamp": event.timestamp,
    }


def event_from_dict(raw: Mapping[str, Any]) -> SessionEvent:
    return SessionEvent(
        session_id=raw["session_id"],
        sequence_no=int(raw["sequence_no"]),
        kind=EventKind(raw["kind"]),
        payload=dict(raw["payload"]),
        timestamp=float(raw["timestamp"]),
    )


def state_to_dict(state: SessionState) -> dict[str, Any]:
    return {
        "session_id": state.session_id,
        "student_id": state.student_id,
        "phase": state.phase.value,
        "scenario_index": state.scenario_index,
        "step": state.step.value if state.step else None,
        "attempts": list(state.attempts),
        "next_seq": state.next_seq,
    }


def state_from_dict(raw: Mapping[str, Any]) -> SessionState:
    return SessionState(
        session_id=raw["session_id"],
        student_id=raw["student_id"],
        phase=Phase(raw["phase"]),
        scenario_index=raw["scenario_index"],
        step=Step(raw["step"]) if raw["step"] else None,
        attempts=tuple(raw["attempts"]),
        next_seq=int(raw["next_seq"]),
    )
