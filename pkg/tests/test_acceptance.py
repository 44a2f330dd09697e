"""Acceptance criteria, one test per criterion, each printing a PASS/FAIL
line. The whole suite runs offline against the mock transport and mock
grader; the optional live smoke test is gated behind PROMPTLIT_LIVE_SMOKE.
"""

from __future__ import annotations

import csv
import json
import os
import random
import time
from contextlib import contextmanager
from pathlib import Path

import numpy as np
import pytest
from click.testing import CliRunner

from logutil import payload_for, random_legal_log
from oracles import popcounts, wilcoxon_exact_oracle
from promptlit.assessment import AssessmentItem, Abstraction, ItemKind, ResponseMatrix
from promptlit.cli import main as cli_main
from promptlit.domain import (
    GraderKind,
    LearningObjective,
    RubricDimension as D,
    check_grade_report,
)
from promptlit.flow import (
    NUM_SCENARIOS,
    EventKind,
    IllegalTransition,
    Phase,
    SessionState,
    Step,
    apply,
    legal_event_kinds,
    new_event,
    replay,
)
from promptlit.gateway import GatewayConfig, StubTransport
from promptlit.grading import (
    GradeParseError,
    GradingFailed,
    GradingSchema,
    grade_prompt,
    parse_grade_report,
)
from promptlit.psychometrics import (
    classify_items,
    cohen_kappa,
    cronbach_alpha,
    mcnemar_test,
    pearson_correlation,
    wilcoxon_signed_rank,
)

FIXTURES = Path(__file__).parent / "fixtures"


@contextmanager
def criterion(name: str):
    try:
        yield
    except BaseException:
        print(f"ACCEPTANCE {name}: FAIL")
        raise
    print(f"ACCEPTANCE {name}: PASS")


# -- 1. statistics exactness ---------------------------------------------------------


def test_mcnemar_exact_oracle_equivalence():
    with criterion("mcnemar-exact-oracle"):
        assert mcnemar_test(5, 0).p_value == pytest.approx(0.0625, abs=1e-12)
        assert mcnemar_test(10, 3).p_value == pytest.approx(0.0923, abs=1e-4)

        started = time.perf_counter()
        for n in range(0, 21):
            if n == 0:
                assert mcnemar_test(0, 0).p_value == 1.0
                continue
            k = popcounts(n)
            tail_counts = np.bincount(k, minlength=n + 1).cumsum()
            for b in range(n + 1):
                c = n - b
                m = min(b, c)
                lo = int(tail_counts[m])
                hi = int(tail_counts[n] - (tail_counts[n - m - 1] if n - m - 1 >= 0 else 0))
                oracle_p = min(1.0, (lo + hi) / 2.0**n)
                got = mcnemar_test(b, c)
                assert got.method == "exact"
                assert abs(got.p_value - oracle_p) <= 1e-12, (b, c)
        elapsed = time.perf_counter() - started
        assert elapsed < 1.0, f"exhaustive oracle sweep took {elapsed:.2f}s"


def test_wilcoxon_exact_oracle_equivalence():
    with criterion("wilcoxon-exact-oracle"):
        rng = random.Random(20240607)
        checked = 0
        while checked < 500:
            n = rng.randint(1, 12)
            pre = [rng.randint(1, 6) for _ in range(n)]
            post = [rng.randint(1, 6) for _ in range(n)]
            diffs = [b - a for a, b in zip(pre, post)]
            if not any(diffs):
                continue
            got = wilcoxon_signed_rank(pre, post)
            assert got.method == "exact"
            expected = wilcoxon_exact_oracle(diffs)
            assert abs(got.p_value - expected) <= 1e-9, (pre, post)
            checked += 1


def test_cronbach_alpha_criteria():
    with criterion("cronbach-alpha"):
        fixture = np.array([[1, 1, 1], [1, 1, 0], [0, 1, 0], [0, 0, 0]], dtype=float)
        assert cronbach_alpha(fixture) == pytest.approx(0.75, abs=1e-9)

        twin = np.array([[1, 1], [0, 0], [1, 1], [0, 0], [1, 1], [0, 0]], dtype=float)
        assert cronbach_alpha(twin) == pytest.approx(1.0, abs=1e-12)

        rng = np.random.default_rng(777)
        independent = (rng.random((10_000, 10)) < 0.5).astype(float)
        assert abs(cronbach_alpha(independent)) < 0.1


def test_kappa_criteria():
    with criterion("cohen-kappa"):
        assert cohen_kappa([1, 1, 0, 0], [1, 0, 0, 0]) == pytest.approx(0.5, abs=1e-9)
        assert cohen_kappa([1, 0, 1, 0, 1], [1, 0, 1, 0, 1]) == 1.0


def test_pearson_criteria():
    with criterion("pearson"):
        assert pearson_correlation([1, 2, 3, 4], [1, 3, 2, 4]).r == pytest.approx(0.8, abs=1e-9)
        rng = np.random.default_rng(778)
        for _ in range(200):
            n = int(rng.integers(3, 40))
            x = rng.normal(size=n)
            y = rng.normal(size=n)
            if np.ptp(x) == 0 or np.ptp(y) == 0:
                continue
            base = pearson_correlation(x.tolist(), y.tolist()).r
            a = float(rng.uniform(0.25, 4.0))
            b = float(rng.uniform(-5.0, 5.0))
            assert pearson_correlation((a * x + b).tolist(), y.tolist()).r == pytest.approx(
                base, abs=1e-9
            )
            assert pearson_correlation((-a * x + b).tolist(), y.tolist()).r == pytest.approx(
                -base, abs=1e-9
            )


# -- 2. item analysis golden fixture ----------------------------------------------


def load_fixture_matrix() -> ResponseMatrix:
    with open(FIXTURES / "item_matrix_30.csv") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        rows = list(reader)
    item_ids = header[1:]
    cells = np.array([[float(v) for v in row[1:]] for row in rows])
    return ResponseMatrix(
        student_ids=tuple(row[0] for row in rows),
        item_ids=tuple(item_ids),
        cells=cells,
    )


def test_item_analysis_matches_golden(item_bundle):
    with criterion("item-analysis-golden"):
        bank, _ = item_bundle
        matrix = load_fixture_matrix()
        golden = json.loads((FIXTURES / "golden_item_stats.json").read_text())
        stats, summary = classify_items(matrix, bank)
        assert len(stats) == 15
        for s in stats:
            expected = golden[s.item_id]
            assert s.difficulty == expected["difficulty"], s.item_id
            assert s.discrimination == expected["discrimination"], s.item_id
            assert s.in_desired_range == expected["in_desired_range"], s.item_id
        # the fixture exercises a closed difficulty boundary
        assert any(s.difficulty == 0.3 and s.in_desired_range for s in stats)
        assert set(summary) == {ItemKind.TF, ItemKind.OE}

        # the same numbers through the operator CLI
        result = CliRunner().invoke(
            cli_main,
            ["analyze", "items", "--matrix", str(FIXTURES / "item_matrix_30.csv")],
            catch_exceptions=False,
        )
        assert result.exit_code == 0
        for s in stats:
            assert f"{s.difficulty:>12.3f}" in result.output


def boundary_matrix(item_ones: set[int]) -> ResponseMatrix:
    """90 students, 89 filler columns forcing strictly decreasing base
    totals, plus one engineered item column."""
    n = 90
    fillers = np.zeros((n, n - 1))
    for i in range(n):
        fillers[i, : n - 1 - i] = 1.0
    item = np.array([1.0 if i in item_ones else 0.0 for i in range(n)])
    cells = np.column_stack([item, fillers])
    return ResponseMatrix(
        student_ids=tuple(f"s{i:02d}" for i in range(n)),
        item_ids=("probe",) + tuple(f"f{j}" for j in range(n - 1)),
        cells=cells,
    )


def boundary_bank(matrix: ResponseMatrix) -> dict[str, AssessmentItem]:
    return {
        item_id: AssessmentItem(
            id=item_id,
            kind=ItemKind.TF,
            stem="probe",
            learning_objective=LearningObjective.AI_CAPACITY,
            abstraction=Abstraction.ABSTRACT,
            correct=True,
        )
        for item_id in matrix.item_ids
    }


def probe_stats(item_ones: set[int]):
    matrix = boundary_matrix(item_ones)
    stats, _ = classify_items(matrix, boundary_bank(matrix))
    return next(s for s in stats if s.item_id == "probe")


def test_classification_closed_boundaries():
    with criterion("item-classification-boundaries"):
        # difficulty exactly 0.3 and discrimination exactly 0.2: in range
        ones = set(range(0, 10)) | set(range(40, 52)) | set(range(85, 90))
        s = probe_stats(ones)
        assert s.difficulty == 0.3 and s.discrimination == 0.2
        assert s.in_desired_range is True

        # difficulty exactly 0.7, strong discrimination: in range
        s = probe_stats(set(range(0, 63)))
        assert s.difficulty == 0.7 and s.in_desired_range is True

        # difficulty just above the upper bound: out
        s = probe_stats(set(range(0, 81)))
        assert s.difficulty == 0.9 and s.in_desired_range is False

        # discrimination just below the bound: out
        ones = set(range(0, 10)) | set(range(30, 50)) | set(range(84, 90))
        s = probe_stats(ones)
        assert s.discrimination == pytest.approx(0.16, abs=1e-12)
        assert 0.3 <= s.difficulty <= 0.7
        assert s.in_desired_range is False

        # difficulty just below the lower bound: out
        ones = set(range(0, 10)) | set(range(40, 51)) | set(range(85, 90))
        s = probe_stats(ones)
        assert s.difficulty == pytest.approx(26 / 90, abs=1e-12)
        assert s.in_desired_range is False


# -- 3. grader-eval harness --------------------------------------------------------


def test_grader_eval_harness_via_cli(engine_factory, tmp_path):
    from test_analyses import FLIPS, RATING_MIX, drive_to_scenario3_graded, rating_for

    with criterion("grader-eval-harness"):
        store_dir = tmp_path / "grader-store"
        engine = engine_factory(store_dir=str(store_dir))
        session_ids = drive_to_scenario3_graded(engine, 100)
        s3 = engine.scenarios[2]

        from promptlit.domain import grade_report_from_dict
        from promptlit.flow import EventKind as EK

        grade_labels = []
        for i, sid in enumerate(session_ids):
            event = [e for e in engine.store.events(sid) if e.kind is EK.GRADE_RECEIVED][-1]
            report = grade_report_from_dict(event.payload["report"])
            for dim, verdict in report.verdicts.items():
                flip = i < FLIPS[dim]
                grade_labels.append(
                    {
                        "session_id": sid,
                        "scenario_id": s3.id,
                        "attempt_index": 1,
                        "dimension": dim.value,
                        "pass": (not verdict.passed) if flip else verdict.passed,
                        "explanation_rating": rating_for(dim, i),
                    }
                )
        engine.ingest_labels({"grade_labels": grade_labels})

        out = tmp_path / "grader.json"
        result = CliRunner().invoke(
            cli_main,
            ["analyze", "grader", "--store", str(store_dir), "--out", str(out)],
            catch_exceptions=False,
        )
        assert result.exit_code == 0
        report = json.loads(out.read_text())

        for dim, flips in FLIPS.items():
            assert report["pass_fail_counts"][dim.value] == [100 - flips, 100]
            assert report["pass_fail_accuracy"][dim.value] == (100 - flips) / 100
        assert report["pass_fail_accuracy"]["NoDirectAnswer"] == 0.88

        # layout: all six dimensions plus the overall explanation accuracy
        assert list(report["pass_fail_accuracy"]) == [d.value for d in D]
        for dim, (ones, halves, zeros) in RATING_MIX.items():
            assert report["explanation_accuracy"][dim.value] == pytest.approx(
                (ones + 0.5 * halves) / 100, abs=1e-12
            )
        pooled = sum(o + 0.5 * h for o, h, _ in RATING_MIX.values()) / 600
        assert report["overall_explanation_accuracy"] == pytest.approx(pooled, abs=1e-12)
        for label in ("Relevance", "Overall", "Explanation Accuracy"):
            assert label in result.output


# -- 4. practice flow ---------------------------------------------------------------


def test_replay_determinism_1000_logs():
    with criterion("flow-replay-determinism"):
        rng = random.Random(20240608)
        for _ in range(1000):
            log = random_legal_log(rng)
            first = replay(log)
            second = replay(log)
            assert first == second
            if log[-1].kind is EventKind.REFLECTION_SUBMITTED:
                assert first.phase is Phase.DONE


def all_states() -> list[SessionState]:
    states = []
    for phase in Phase:
        if phase is Phase.PRACTICE:
            for i in range(NUM_SCENARIOS):
                for step in Step:
                    states.append(
                        SessionState(
                            session_id="enum",
                            student_id="stu",
                            phase=phase,
                            scenario_index=i,
                            step=step,
                            attempts=(1, 1, 0),
                            next_seq=9,
                        )
                    )
        else:
            states.append(
                SessionState(
                    session_id="enum",
                    student_id="stu",
                    phase=phase,
                    scenario_index=None,
                    step=None,
                    attempts=(1, 1, 0),
                    next_seq=9,
                )
            )
    return states


def test_illegal_transitions_exhaustive():
    with criterion("flow-illegal-transitions"):
        states = all_states()
        assert len(states) == 7 + 3 * 4  # seven simple phases + practice grid
        for state in states:
            legal = set(legal_event_kinds(state))
            for kind in EventKind:
                if kind is EventKind.STARTED:
                    # Started is never applicable mid-session
                    with pytest.raises(IllegalTransition):
                        apply(state, new_event(state, kind, {"student_id": "x"}, 0.0))
                    continue
                event = new_event(state, kind, payload_for(state, kind), 0.0)
                if kind in legal:
                    next_state = apply(state, event)
                    assert next_state.phase_rank() >= state.phase_rank()
                else:
                    with pytest.raises(IllegalTransition):
                        apply(state, event)
            # payload-level guards inside the legal kinds
            if state.phase is Phase.PRACTICE:
                for kind in legal:
                    bad = dict(payload_for(state, kind))
                    bad["scenario_index"] = (state.scenario_index + 1) % NUM_SCENARIOS
                    with pytest.raises(IllegalTransition):
                        apply(state, new_event(state, kind, bad, 0.0))


def test_simulate_byte_reproducible_50_students(tmp_path):
    with criterion("simulate-reproducible"):
        exports = []
        for label in ("runA", "runB"):
            export_dir = tmp_path / label / "exports"
            result = CliRunner().invoke(
                cli_main,
                [
                    "simulate", "--students", "50", "--seed", "7",
                    "--store", str(tmp_path / label / "store"),
                    "--export-dir", str(export_dir),
                ],
                catch_exceptions=False,
            )
            assert result.exit_code == 0
            exports.append(
                {p.name: p.read_bytes() for p in sorted(export_dir.iterdir())}
            )
        assert exports[0] == exports[1]
        assert len(exports[0]) == 5
        attempts_csv = exports[0]["attempts.csv"].decode()
        assert attempts_csv.count("\n") > 150  # 50 students x 3+ attempts


# -- 5. grading contract -------------------------------------------------------------


def mutate(raw: str, obj: dict, rng: random.Random) -> str:
    choice = rng.randrange(9)
    data = json.loads(json.dumps(obj))
    if choice == 0 and data:
        data.pop(rng.choice(list(data)))
    elif choice == 1:
        data["Politeness"] = {"pass": True, "explanation": "extra"}
    elif choice == 2 and data:
        key = rng.choice(list(data))
        data[key]["pass"] = rng.choice(["maybe", 1, 0, None, "true", [], {}])
    elif choice == 3 and data:
        key = rng.choice(list(data))
        data[key]["explanation"] = rng.choice(["", "   ", None, 7])
    elif choice == 4 and data:
        key = rng.choice(list(data))
        data[key] = rng.choice(["yes", 1, [], None])
    elif choice == 5:
        return raw[: rng.randrange(len(raw))]
    elif choice == 6:
        return "I think the prompt is great! " + rng.choice(["", raw[::-1]])
    elif choice == 7 and data:
        key = rng.choice(list(data))
        entry = data[key]
        data[key] = {"passed": entry.get("pass"), "explanation": entry.get("explanation")}
    # choice == 8: unchanged valid block (must parse fine)
    return "```json\n" + json.dumps(data) + "\n```"


def test_grading_schema_fuzz_10k(scenarios):
    with criterion("grading-schema-fuzz"):
        rng = random.Random(20240609)
        schemas = [GradingSchema.for_scenario(s) for s in scenarios]
        for i in range(10_000):
            schema = schemas[i % 3]
            obj = {
                d.value: {
                    "pass": rng.random() < 0.5,
                    "explanation": f"because {rng.randrange(1000)}",
                }
                for d in schema.expected_keys
            }
            raw = "```json\n" + json.dumps(obj) + "\n```"
            mutated = mutate(raw, obj, rng)
            try:
                report = parse_grade_report(mutated, schema, GraderKind.LLM)
            except GradeParseError:
                continue
            check_grade_report(report, schema.scenario)
            for verdict in report.verdicts.values():
                assert isinstance(verdict.passed, bool)
                assert verdict.explanation.strip()


def test_repair_loop_bounded(scenarios):
    with criterion("grading-repair-bound"):
        stub = StubTransport(["junk"] * 5)
        with pytest.raises(GradingFailed) as exc:
            grade_prompt(
                scenarios[0], "Explain cells", stub, GatewayConfig(), sleeper=lambda s: None
            )
        assert stub.calls == 3
        assert exc.value.calls == 3


# -- 6. paper-shape checks ------------------------------------------------------------


def test_shipped_content_shapes(scenarios, item_bundle):
    with criterion("shipped-content-shapes"):
        dims = [set(s.applicable_dimensions) for s in scenarios]
        assert len(scenarios) == 3
        assert dims[0] == {D.RELEVANCE, D.CLARITY_OF_PURPOSE, D.CONCISENESS, D.BACKGROUND_CONTEXT}
        assert dims[1] == dims[0] | {D.REQUEST_ELABORATION}
        assert dims[2] == dims[1] | {D.NO_DIRECT_ANSWER}

        bank, forms = item_bundle
        v1_items = [bank[i] for i in forms["form-v1"].item_ids]
        assert len(v1_items) == 6
        for item in v1_items:
            assert item.kind is ItemKind.MCQ
            assert len(item.options) == 3
            assert isinstance(item.correct, int) and 0 <= item.correct < 3

        v2_items = [bank[i] for i in forms["form-v2"].item_ids]
        tf = [i for i in v2_items if i.kind is ItemKind.TF]
        oe = [i for i in v2_items if i.kind is ItemKind.OE]
        assert len(tf) == 10 and len(oe) == 5
        lo = LearningObjective
        assert [i.learning_objective for i in tf] == [lo.AI_CAPACITY] * 6 + [lo.CONTEXTS_TO_USE_AI] * 4
        assert [i.learning_objective for i in oe] == [
            lo.AI_CAPACITY, lo.CONTEXTS_TO_USE_AI, lo.CONTEXTS_TO_USE_AI,
            lo.EFFECTIVE_PROMPT_FORMATION, lo.EFFECTIVE_PROMPT_FORMATION,
        ]
        assert any(i.abstraction is Abstraction.ABSTRACT for i in v2_items)


# -- optional live smoke --------------------------------------------------------------


@pytest.mark.skipif(
    not os.environ.get("PROMPTLIT_LIVE_SMOKE"),
    reason="live smoke test runs only with PROMPTLIT_LIVE_SMOKE=1 and a real API key",
)
def test_live_smoke_one_prompt(scenarios):
    from promptlit.gateway import HttpTransport

    config = GatewayConfig(
        base_url=os.environ.get("PROMPTLIT_BASE_URL", "https://api.openai.com/v1"),
        api_key_env_var=os.environ.get("PROMPTLIT_API_KEY_VAR", "PROMPTLIT_API_KEY"),
    )
    report = grade_prompt(
        scenarios[0],
        "I learned about cells yesterday and want to go deeper. "
        "Can you explain what organelles do, with one example?",
        HttpTransport(),
        config,
        model_name=os.environ.get("PROMPTLIT_MODEL", "gpt-4o"),
    )
    check_grade_report(report, scenarios[0])
    print("live grade:", {d.value: v.passed for d, v in report.ordered_verdicts()})
