"""Deterministic synthetic cohort driven through the full practice flow.

Everything is a pure function of (student count, seed): the clock is
simulated, session ids are derived, prompts come from a fixed template pool
that exercises both the pass and fail branch of every mock-grader rule.
"""

from __future__ import annotations

import random
from pathlib import Path
from typing import Any, Callable

from . import content
from .assessment import ItemKind
from .domain import Scenario
from .engine import Engine, EngineConfig
from .store import Store


class SimClock:
    """Monotonic fake clock; one second per tick from a fixed epoch."""

    def __init__(self, start: float = 1_750_000_000.0):
        self._now = start

    def __call__(self) -> float:
        self._now += 1.0
        return self._now


def _terms(scenario: Scenario) -> list[str]:
    return sorted(scenario.topic_terms)


# Each template maps a scenario to one prompt; the comment names the mock
# rules it is built to pass (+) or fail (-).
def _t_good_full(s: Scenario) -> str:  # + all six
    t = _terms(s)
    return (
        f"I am learning about {t[0]} and I want to understand it better. "
        f"Can you explain how {t[min(1, len(t) - 1)]} works and give an example?"
    )


def _t_no_background(s: Scenario) -> str:  # - background
    t = _terms(s)
    return f"Explain {t[0]} and why it matters, please."


def _t_answer_seeking(s: Scenario) -> str:  # - no-direct-answer, - background
    t = _terms(s)
    return f"What is the answer to this {t[0]} problem? Solve for x and tell me."


def _t_verbose(s: Scenario) -> str:  # - conciseness
    t = _terms(s)
    filler = (
        "and I was wondering, since there are so many different things to "
        "think about here, whether you could possibly maybe take some time "
    )
    return (
        f"I am working on {t[0]} for my class and I wanted to ask you a rather "
        "long and winding question because I find it hard to be brief "
        + filler * 3
        + f"to explain {t[0]} with many examples and details about everything involved."
    )


def _t_irrelevant(s: Scenario) -> str:  # - relevance, - clarity
    return "Tell me something interesting about famous football teams."


def _t_no_verb(s: Scenario) -> str:  # - clarity (no request verb)
    t = _terms(s)
    return f"{t[0].capitalize()} and {t[min(1, len(t) - 1)]} for my homework."


def _t_quiz_me(s: Scenario) -> str:  # + all six
    t = _terms(s)
    return (
        f"I learned {t[0]} in my class yesterday. Quiz me with a few questions "
        f"about {t[min(1, len(t) - 1)]} and explain why each answer is right."
    )


def _t_how_steps(s: Scenario) -> str:  # + elaboration via steps
    t = _terms(s)
    return f"How should I approach {t[0]}? List the steps, this is for my homework."


def _t_direct_xy(s: Scenario) -> str:  # - no-direct-answer
    return "What are x and y? Give me the answer quickly please."


def _t_minimal(s: Scenario) -> str:  # - background, - elaboration
    t = _terms(s)
    return f"Help me with {t[0]}."


PROMPT_TEMPLATES: list[Callable[[Scenario], str]] = [
    _t_good_full,
    _t_no_background,
    _t_answer_seeking,
    _t_verbose,
    _t_irrelevant,
    _t_no_verb,
    _t_quiz_me,
    _t_how_steps,
    _t_direct_xy,
    _t_minimal,
]

OE_ANSWERS = [
    "It can explain ideas and make practice questions, but it cannot know my exam.",
    "Using it to review before a quiz is fine because I still do the thinking.",
    "Asking it to write my essay is not fine because that is not my own work.",
    "The prompt is too vague, so the answer will not match the quiz topics.",
    "I just learned the water cycle and have a quiz tomorrow; ask me five questions and explain my mistakes.",
]

REFLECTION_ANSWERS = [
    "I learned to add background to my questions.",
    "I liked seeing how different prompts change the answer.",
    "Typing long prompts was the hardest part.",
    "I will ask for explanations instead of answers.",
    "More subjects would be nice.",
    "Nothing else, it was fun.",
]


def run_simulation(
    store_dir: str | Path,
    n_students: int,
    seed: int,
    *,
    form_id: str = "form-v1",
    export_dir: str | Path | None = None,
) -> dict[str, Any]:
    if n_students < 1:
        raise ValueError("need at least one student")
    clock = SimClock()
    store = Store(store_dir, clock=clock)
    scenarios = content.load_scenarios()
    bank, forms = content.load_items()
    survey = content.load_survey()
    counter = {"n": 0}

    def session_ids() -> str:
        counter["n"] += 1
        return f"sim{seed}-sess{counter['n']:04d}"

    engine = Engine(
        scenarios,
        bank,
        forms,
        survey,
        store,
        EngineConfig(grader_backend="mock", chat_backend="mock", active_form_id=form_id),
        clock=clock,
        session_id_factory=session_ids,
    )

    rng = random.Random(seed)
    attempts_made = 0
    for i in range(n_students):
        student_id = f"sim{seed}-stu{i:03d}"
        view = engine.start_session(student_id)
        session_id = view["session_id"]

        pre_answers = {item.id: rng.randint(1, 5) for item in survey.pre_survey}
        engine.submit_survey(session_id, "pre", pre_answers)

        engine.submit_test(session_id, _test_answers(engine, rng, skill=0.55))

        for item in survey.warmup:
            engine.answer_warmup(session_id, item.id, _warmup_answer(item, rng))
        engine.advance(session_id, "next")

        for scenario in scenarios:
            n_attempts = rng.randint(1, 3)
            for attempt in range(n_attempts):
                template = rng.choice(PROMPT_TEMPLATES)
                engine.submit_prompt(session_id, template(scenario))
                engine.check_prompt(session_id)
                attempts_made += 1
                last = attempt == n_attempts - 1
                engine.advance(session_id, "next" if last else "retry")

        engine.submit_test(session_id, _test_answers(engine, rng, skill=0.7))

        post_answers = {
            item.id: min(5, pre_answers.get(item.id, 3) + rng.randint(0, 2))
            for item in survey.post_survey
        }
        engine.submit_survey(session_id, "post", post_answers)

        reflection = {
            item.id: rng.choice(REFLECTION_ANSWERS) for item in survey.reflection
        }
        engine.submit_reflection(session_id, reflection)

    written: list[str] = []
    if export_dir is not None:
        export_path = Path(export_dir)
        export_path.mkdir(parents=True, exist_ok=True)
        for kind in Engine.EXPORT_KINDS:
            target = export_path / f"{kind}.csv"
            target.write_text(engine.export_csv(kind), "utf-8")
            written.append(str(target))

    return {
        "students": n_students,
        "seed": seed,
        "sessions": counter["n"],
        "attempts": attempts_made,
        "exports": written,
    }


def _warmup_answer(item: content.WarmupItem, rng: random.Random) -> Any:
    if rng.random() < 0.8:
        return item.correct
    if item.kind == "TF":
        return not item.correct
    return (int(item.correct) + 1) % max(len(item.options), 1)


def _test_answers(engine: Engine, rng: random.Random, skill: float) -> dict[str, Any]:
    answers: dict[str, Any] = {}
    for item_id in engine.active_form.item_ids:
        item = engine.bank[item_id]
        if item.kind is ItemKind.MCQ:
            if rng.random() < skill:
                answers[item_id] = item.correct
            else:
                wrong = [i for i in range(len(item.options)) if i != item.correct]
                answers[item_id] = rng.choice(wrong)
        elif item.kind is ItemKind.TF:
            correct = rng.random() < skill
            answers[item_id] = item.correct if correct else (not item.correct)
        else:
            answers[item_id] = rng.choice(OE_ANSWERS)
    return answers
