from __future__ import annotations

import copy

import pytest
import yaml

from promptlit.domain import (
    CANONICAL_DIMENSION_ORDER,
    BundleValidationError,
    GradeReport,
    GraderKind,
    PromptAttempt,
    RubricDimension,
    Scenario,
    Verdict,
    check_grade_report,
    scenario_dimensions,
    scenarios_to_bundle,
    validate_scenario_config,
)

D = RubricDimension


def bundle_doc(scenarios):
    return yaml.safe_load(yaml.safe_dump(scenarios_to_bundle(scenarios)))


def test_six_unique_dimensions_with_definitions():
    assert len(CANONICAL_DIMENSION_ORDER) == 6
    assert len(set(CANONICAL_DIMENSION_ORDER)) == 6
    from promptlit.domain import GENERAL_DEFINITIONS

    for dim in CANONICAL_DIMENSION_ORDER:
        assert GENERAL_DEFINITIONS[dim].strip()


def test_shipped_scenarios_match_table_checkmarks(scenarios):
    dims = [set(s.applicable_dimensions) for s in scenarios]
    assert dims[0] == {D.RELEVANCE, D.CLARITY_OF_PURPOSE, D.CONCISENESS, D.BACKGROUND_CONTEXT}
    assert dims[1] == dims[0] | {D.REQUEST_ELABORATION}
    assert dims[2] == dims[1] | {D.NO_DIRECT_ANSWER}
    # strict monotone chain
    assert dims[0] < dims[1] < dims[2]


def test_scenario_dimensions_canonical_order(scenarios):
    for scenario in scenarios:
        ordered = scenario_dimensions(scenario)
        positions = [CANONICAL_DIMENSION_ORDER.index(d) for d in ordered]
        assert positions == sorted(positions)
    assert scenario_dimensions(scenarios[2]) == CANONICAL_DIMENSION_ORDER


def test_singleton_dimension_passthrough(scenarios):
    s = scenarios[0]
    single = Scenario(
        id="x",
        subject=s.subject,
        title="t",
        narrative="n",
        learning_objective=s.learning_objective,
        applicable_dimensions=(D.RELEVANCE,),
        topic_terms=frozenset({"cell"}),
    )
    assert scenario_dimensions(single) == (D.RELEVANCE,)


def test_roundtrip_revalidates_identical(scenarios):
    again = validate_scenario_config(bundle_doc(scenarios))
    assert again == scenarios


def test_unknown_dimension_rejected(scenarios):
    doc = bundle_doc(scenarios)
    doc["scenarios"][0]["applicable_dimensions"].append("Politeness")
    with pytest.raises(BundleValidationError) as exc:
        validate_scenario_config(doc)
    assert any("unknown dimension" in e and "Politeness" in e for e in exc.value.errors)


def test_duplicate_scenario_id_rejected(scenarios):
    doc = bundle_doc(scenarios)
    doc["scenarios"][1]["id"] = doc["scenarios"][0]["id"]
    with pytest.raises(BundleValidationError) as exc:
        validate_scenario_config(doc)
    assert any("duplicate scenario id" in e for e in exc.value.errors)


def test_empty_narrative_rejected(scenarios):
    doc = bundle_doc(scenarios)
    doc["scenarios"][2]["narrative"] = "  "
    with pytest.raises(BundleValidationError) as exc:
        validate_scenario_config(doc)
    assert any("narrative" in e for e in exc.value.errors)


def test_errors_carry_paths(scenarios):
    doc = bundle_doc(scenarios)
    doc["scenarios"][1]["applicable_dimensions"] = []
    doc["scenarios"][2]["topic_terms"] = []
    with pytest.raises(BundleValidationError) as exc:
        validate_scenario_config(doc)
    joined = "\n".join(exc.value.errors)
    assert "scenarios[1].applicable_dimensions" in joined
    assert "scenarios[2].topic_terms" in joined


def test_validation_does_not_mutate_input(scenarios):
    doc = bundle_doc(scenarios)
    frozen = copy.deepcopy(doc)
    validate_scenario_config(doc)
    assert doc == frozen


def test_prompt_attempt_guards():
    with pytest.raises(ValueError):
        PromptAttempt("s", "sc", 0, "text", 0.0)
    with pytest.raises(ValueError):
        PromptAttempt("s", "sc", 1, "   ", 0.0)


def test_grade_report_key_set_checked(scenarios):
    s1 = scenarios[0]
    verdicts = {d: Verdict(True, "ok") for d in s1.applicable_dimensions}
    report = GradeReport(
        scenario_id=s1.id, verdicts=verdicts, grader_kind=GraderKind.MOCK, template_version="mock/v1"
    )
    check_grade_report(report, s1)

    short = dict(verdicts)
    short.pop(D.BACKGROUND_CONTEXT)
    bad = GradeReport(
        scenario_id=s1.id, verdicts=short, grader_kind=GraderKind.MOCK, template_version="mock/v1"
    )
    with pytest.raises(ValueError, match="BackgroundContext"):
        check_grade_report(bad, s1)


def test_verdict_guards():
    with pytest.raises(ValueError):
        Verdict(passed=True, explanation="   ")
    with pytest.raises(ValueError):
        Verdict(passed="yes", explanation="fine")  # type: ignore[arg-type]
