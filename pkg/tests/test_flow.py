from __future__ import annotations

import random

import pytest

from logutil import payload_for, random_legal_log
from promptlit.flow import (
    NUM_SCENARIOS,
    EventKind,
    IllegalTransition,
    NoStartEvent,
    Phase,
    SequenceGap,
    SessionEvent,
    Step,
    apply,
    last_attempt_per_scenario,
    legal_event_kinds,
    new_event,
    replay,
    start_session,
    state_from_dict,
    state_to_dict,
)


def fresh():
    return start_session("stu-1", "sess-1", timestamp=0.0)[0]


def step_through(state, *kinds):
    for kind in kinds:
        event = new_event(state, kind, payload_for(state, kind), 0.0)
        state = apply(state, event)
    return state


TO_PRACTICE = (
    EventKind.SURVEY_ANSWERED,
    EventKind.TEST_ANSWERED,
    EventKind.SCENARIO_ENTERED,
)


def test_start_session_initial_state():
    state = fresh()
    assert state.phase is Phase.PRE_SURVEY
    assert state.attempts == (0,) * NUM_SCENARIOS
    assert state.next_seq == 2


def test_two_sessions_for_same_student_are_independent():
    s1, _ = start_session("stu", "a", 0.0)
    s2, _ = start_session("stu", "b", 0.0)
    s1b = step_through(s1, EventKind.SURVEY_ANSWERED)
    assert s1b.phase is Phase.PRE_TEST
    assert s2.phase is Phase.PRE_SURVEY


def test_practice_step_loop():
    state = step_through(fresh(), *TO_PRACTICE)
    assert (state.phase, state.scenario_index, state.step) == (
        Phase.PRACTICE,
        0,
        Step.SCENARIO_SHOWN,
    )
    state = step_through(state, EventKind.PROMPT_SUBMITTED)
    assert state.step is Step.PROMPT_SUBMITTED
    assert state.attempts == (1, 0, 0)
    state = step_through(state, EventKind.RESPONSE_RECEIVED, EventKind.GRADE_RECEIVED)
    assert state.step is Step.GRADED


def test_grade_before_response_is_illegal():
    state = step_through(fresh(), *TO_PRACTICE, EventKind.PROMPT_SUBMITTED)
    event = new_event(state, EventKind.GRADE_RECEIVED, {"scenario_index": 0, "report": {}}, 0.0)
    with pytest.raises(IllegalTransition):
        apply(state, event)


def test_retry_returns_to_prompt_expected_with_attempt_bump():
    state = step_through(
        fresh(),
        *TO_PRACTICE,
        EventKind.PROMPT_SUBMITTED,
        EventKind.RESPONSE_RECEIVED,
        EventKind.GRADE_RECEIVED,
        EventKind.RETRY_CHOSEN,
    )
    assert (state.phase, state.scenario_index, state.step) == (
        Phase.PRACTICE,
        0,
        Step.SCENARIO_SHOWN,
    )
    assert EventKind.PROMPT_SUBMITTED in legal_event_kinds(state)
    state = step_through(state, EventKind.PROMPT_SUBMITTED)
    assert state.attempts == (2, 0, 0)


def test_advance_from_last_scenario_reaches_post_test():
    state = step_through(fresh(), *TO_PRACTICE)
    for _ in range(NUM_SCENARIOS):
        state = step_through(
            state,
            EventKind.PROMPT_SUBMITTED,
            EventKind.RESPONSE_RECEIVED,
            EventKind.GRADE_RECEIVED,
            EventKind.ADVANCE_CHOSEN,
        )
    assert state.phase is Phase.POST_TEST


def test_full_journey_to_done():
    state = step_through(fresh(), *TO_PRACTICE)
    for _ in range(NUM_SCENARIOS):
        state = step_through(
            state,
            EventKind.PROMPT_SUBMITTED,
            EventKind.RESPONSE_RECEIVED,
            EventKind.GRADE_RECEIVED,
            EventKind.ADVANCE_CHOSEN,
        )
    state = step_through(
        state,
        EventKind.TEST_ANSWERED,
        EventKind.SURVEY_ANSWERED,
        EventKind.REFLECTION_SUBMITTED,
    )
    assert state.phase is Phase.DONE
    assert legal_event_kinds(state) == ()


def test_sequence_gap_rejected():
    state = fresh()
    event = SessionEvent("sess-1", 5, EventKind.SURVEY_ANSWERED, {"survey": "pre"}, 0.0)
    with pytest.raises(SequenceGap):
        apply(state, event)


def test_wrong_scenario_index_rejected():
    state = step_through(fresh(), *TO_PRACTICE)
    payload = payload_for(state, EventKind.PROMPT_SUBMITTED) | {"scenario_index": 2}
    with pytest.raises(IllegalTransition):
        apply(state, new_event(state, EventKind.PROMPT_SUBMITTED, payload, 0.0))


def test_wrong_attempt_index_rejected():
    state = step_through(fresh(), *TO_PRACTICE)
    payload = payload_for(state, EventKind.PROMPT_SUBMITTED) | {"attempt_index": 7}
    with pytest.raises(IllegalTransition):
        apply(state, new_event(state, EventKind.PROMPT_SUBMITTED, payload, 0.0))


def test_wrong_survey_tag_rejected():
    state = fresh()
    event = new_event(state, EventKind.SURVEY_ANSWERED, {"survey": "post", "answers": {}}, 0.0)
    with pytest.raises(IllegalTransition):
        apply(state, event)


# -- replay -------------------------------------------------------------------


def test_replay_empty_log():
    with pytest.raises(NoStartEvent):
        replay([])


def test_replay_requires_started_first():
    state = fresh()
    event = new_event(state, EventKind.SURVEY_ANSWERED, {"survey": "pre"}, 0.0)
    with pytest.raises(NoStartEvent):
        replay([event])


def test_replay_golden_session_reaches_done(golden_session):
    state = replay(golden_session)
    assert state.phase is Phase.DONE
    assert state.attempts == (2, 1, 1)


def test_replay_prefix_property(golden_session):
    # truncate right after the first GradeReceived
    cut = next(
        i for i, e in enumerate(golden_session) if e.kind is EventKind.GRADE_RECEIVED
    )
    state = replay(golden_session[: cut + 1])
    assert (state.phase, state.scenario_index, state.step) == (
        Phase.PRACTICE,
        0,
        Step.GRADED,
    )


def test_replay_determinism_random_logs():
    rng = random.Random(99)
    for _ in range(200):
        log = random_legal_log(rng)
        assert replay(log) == replay(log)


def test_phase_rank_monotone_over_random_logs():
    rng = random.Random(7)
    for _ in range(100):
        log = random_legal_log(rng)
        state, _ = start_session(
            str(log[0].payload["student_id"]), log[0].session_id, 0.0
        )
        rank = state.phase_rank()
        for event in log[1:]:
            state = apply(state, event)
            assert state.phase_rank() >= rank
            rank = state.phase_rank()


def test_apply_never_mutates_on_failure():
    state = step_through(fresh(), *TO_PRACTICE)
    before = state_to_dict(state)
    with pytest.raises(IllegalTransition):
        apply(state, new_event(state, EventKind.REFLECTION_SUBMITTED, {}, 0.0))
    assert state_to_dict(state) == before


def test_state_roundtrip_serialization():
    rng = random.Random(3)
    for _ in range(50):
        state = replay(random_legal_log(rng))
        assert state_from_dict(state_to_dict(state)) == state


# -- last_attempt_per_scenario ---------------------------------------------------


def test_last_attempt_per_scenario(golden_session):
    latest = last_attempt_per_scenario(golden_session)
    assert set(latest) == {
        "s1-biology-cells",
        "s2-geography-water-cycle",
        "s3-math-linear-equations",
    }
    assert latest["s1-biology-cells"].attempt_index == 2
    assert latest["s1-biology-cells"].prompt_text.startswith("I learned about cells")
    assert latest["s2-geography-water-cycle"].attempt_index == 1


def test_last_attempt_empty_log():
    assert last_attempt_per_scenario([]) == {}


def test_last_attempt_three_retries():
    state = step_through(fresh(), *TO_PRACTICE)
    events = []
    for _ in range(3):
        for kind in (
            EventKind.PROMPT_SUBMITTED,
            EventKind.RESPONSE_RECEIVED,
            EventKind.GRADE_RECEIVED,
        ):
            event = new_event(state, kind, payload_for(state, kind), 0.0)
            state = apply(state, event)
            events.append(event)
        retry = new_event(
            state, EventKind.RETRY_CHOSEN, payload_for(state, EventKind.RETRY_CHOSEN), 0.0
        )
        state = apply(state, retry)
        events.append(retry)
    latest = last_attempt_per_scenario(events)
    assert latest["s1-biology-cells"].attempt_index == 3
