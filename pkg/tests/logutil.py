"""Random legal event-log generation for the flow tests."""

from __future__ import annotations

import random
from typing import Any

from promptlit.flow import (
    EventKind,
    Phase,
    SessionEvent,
    SessionState,
    apply,
    legal_event_kinds,
    new_event,
    start_session,
)

SCENARIO_IDS = ("s1-biology-cells", "s2-geography-water-cycle", "s3-math-linear-equations")


def payload_for(state: SessionState, kind: EventKind) -> dict[str, Any]:
    """A payload apply() accepts for this (state, kind)."""
    i = state.scenario_index
    if kind is EventKind.SURVEY_ANSWERED:
        return {"survey": "pre" if state.phase is Phase.PRE_SURVEY else "post", "answers": {"l4": 3}}
    if kind is EventKind.TEST_ANSWERED:
        return {
            "occasion": "pre" if state.phase is Phase.PRE_TEST else "post",
            "form_id": "form-v1",
            "answers": {},
        }
    if kind is EventKind.WARMUP_ANSWERED:
        return {"item_id": "w1", "answer": True}
    if kind is EventKind.SCENARIO_ENTERED:
        return {"scenario_index": 0, "scenario_id": SCENARIO_IDS[0]}
    if kind is EventKind.PROMPT_SUBMITTED:
        # outside practice the event is rejected on phase grounds; a
        # placeholder index keeps the payload well-formed
        idx = i if i is not None else 0
        return {
            "scenario_index": i,
            "scenario_id": SCENARIO_IDS[idx],
            "attempt_index": state.attempts[idx] + 1,
            "prompt_text": f"prompt {state.attempts[idx] + 1} for {SCENARIO_IDS[idx]}",
        }
    if kind is EventKind.RESPONSE_RECEIVED:
        return {"scenario_index": i, "text": "a canned response"}
    if kind is EventKind.GRADE_RECEIVED:
        return {"scenario_index": i, "report": {}}
    if kind in (EventKind.RETRY_CHOSEN, EventKind.ADVANCE_CHOSEN):
        return {"scenario_index": i}
    if kind is EventKind.REFLECTION_SUBMITTED:
        return {"answers": {"r1": "text"}}
    return {}


def random_legal_log(rng: random.Random, max_events: int = 120) -> list[SessionEvent]:
    """A random walk over the legal transition relation from a fresh session."""
    session_id = f"rand-{rng.randrange(10**9):09d}"
    state, started = start_session("stu-" + session_id, session_id, timestamp=0.0)
    events = [started]
    while state.phase is not Phase.DONE and len(events) < max_events:
        choices = legal_event_kinds(state)
        # Bias against endless warmup/retry loops so most logs reach Done.
        weights = [3 if k not in (EventKind.WARMUP_ANSWERED, EventKind.RETRY_CHOSEN) else 1 for k in choices]
        kind = rng.choices(choices, weights=weights, k=1)[0]
        event = new_event(state, kind, payload_for(state, kind), timestamp=float(len(events)))
        state = apply(state, event)
        events.append(event)
    return events
