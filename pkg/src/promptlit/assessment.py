"""Item bank, objective scoring, and response-matrix construction.

Two shipped forms: the original six-MCQ form and the iterated form of ten
true/false plus five open-ended items. Open-ended items are captured but
only enter matrices once human 0/1 scores are supplied.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Any, Mapping, Sequence

import numpy as np
import yaml

from .domain import BundleValidationError, LearningObjective

MISSING = np.nan


class ItemKind(str, Enum):
    MCQ = "MCQ"
    TF = "TF"
    OE = "OE"
    LIKERT5 = "Likert5"


class Abstraction(str, Enum):
    CONCRETE = "concrete_scenario"
    ABSTRACT = "abstract"


class FormVersion(str, Enum):
    ORIGINAL_V1 = "original_v1"
    ITERATED_V2 = "iterated_v2"


OBJECTIVE_KINDS = (ItemKind.MCQ, ItemKind.TF)

MCQ_OPTION_COUNT = 3


class KindMismatch(TypeError):
    """Objective scoring applied to an item without an answer key."""


class UnknownItem(KeyError):
    pass


class OutOfRange(ValueError):
    pass


@dataclass(frozen=True)
class AssessmentItem:
    id: str
    kind: ItemKind
    stem: str
    learning_objective: LearningObjective
    abstraction: Abstraction = Abstraction.CONCRETE
    options: tuple[str, ...] = ()
    correct: int | bool | None = None


@dataclass(frozen=True)
class AssessmentForm:
    id: str
    version: FormVersion
    item_ids: tuple[str, ...]

    def objective_items(self, bank: Mapping[str, AssessmentItem]) -> list[AssessmentItem]:
        return [bank[i] for i in self.item_ids if bank[i].kind in OBJECTIVE_KINDS]

    def oe_items(self, bank: Mapping[str, AssessmentItem]) -> list[AssessmentItem]:
        return [bank[i] for i in self.item_ids if bank[i].kind is ItemKind.OE]


@dataclass(frozen=True)
class FormScore:
    total: float
    max_score: int
    per_objective: Mapping[LearningObjective, float]
    missing: tuple[str, ...]


# The iterated form's required LO layout: positions within each kind.
V2_TF_COUNT = 10
V2_OE_COUNT = 5
V2_TF_LO = [LearningObjective.AI_CAPACITY] * 6 + [LearningObjective.CONTEXTS_TO_USE_AI] * 4
V2_OE_LO = (
    [LearningObjective.AI_CAPACITY]
    + [LearningObjective.CONTEXTS_TO_USE_AI] * 2
    + [LearningObjective.EFFECTIVE_PROMPT_FORMATION] * 2
)


def _parse_item(raw: Any, path: str, errors: list[str]) -> AssessmentItem | None:
    if not isinstance(raw, Mapping):
        errors.append(f"{path}: must be a mapping")
        return None
    item_id = raw.get("id")
    if not isinstance(item_id, str) or not item_id:
        errors.append(f"{path}.id: missing or empty")
        return None
    try:
        kind = ItemKind(raw.get("kind"))
    except ValueError:
        errors.append(f"{path}.kind: unknown kind {raw.get('kind')!r}")
        return None
    stem = raw.get("stem")
    if not isinstance(stem, str) or not stem.strip():
        errors.append(f"{path}.stem: must be a non-empty string")
        return None
    try:
        objective = LearningObjective(raw.get("learning_objective"))
    except ValueError:
        errors.append(f"{path}.learning_objective: unknown objective {raw.get('learning_objective')!r}")
        return None
    try:
        abstraction = Abstraction(raw.get("abstraction", "concrete_scenario"))
    except ValueError:
        errors.append(f"{path}.abstraction: unknown level {raw.get('abstraction')!r}")
        return None

    options: tuple[str, ...] = ()
    correct: int | bool | None = None
    if kind is ItemKind.MCQ:
        raw_options = raw.get("options")
        if not isinstance(raw_options, list) or len(raw_options) != MCQ_OPTION_COUNT:
            errors.append(f"{path}.options: MCQ must have exactly {MCQ_OPTION_COUNT} options")
            return None
        options = tuple(str(o) for o in raw_options)
        raw_correct = raw.get("correct")
        if not isinstance(raw_correct, int) or isinstance(raw_correct, bool) or not (
            0 <= raw_correct < MCQ_OPTION_COUNT
        ):
            errors.append(f"{path}.correct: MCQ needs exactly one correct option index")
            return None
        correct = raw_correct
    elif kind is ItemKind.TF:
        raw_correct = raw.get("correct")
        if not isinstance(raw_correct, bool):
            errors.append(f"{path}.correct: TF needs a boolean key")
            return None
        correct = raw_correct
        if raw.get("options"):
            errors.append(f"{path}.options: TF items take no options")
            return None
    else:
        if raw.get("correct") is not None:
            errors.append(f"{path}.correct: {kind.value} items have no correct key")
            return None

    return AssessmentItem(
        id=item_id,
        kind=kind,
        stem=stem.strip(),
        learning_objective=objective,
        abstraction=abstraction,
        options=options,
        correct=correct,
    )


def _check_form(
    form: AssessmentForm, bank: Mapping[str, AssessmentItem], path: str, errors: list[str]
) -> None:
    items = []
    for i, item_id in enumerate(form.item_ids):
        if item_id not in bank:
            errors.append(f"{path}.items[{i}]: unknown item {item_id!r}")
            return
        items.append(bank[item_id])
    if form.version is FormVersion.ORIGINAL_V1:
        if len(items) != 6 or any(it.kind is not ItemKind.MCQ for it in items):
            errors.append(f"{path}: original_v1 form must hold exactly 6 MCQ items")
        return
    tf = [it for it in items if it.kind is ItemKind.TF]
    oe = [it for it in items if it.kind is ItemKind.OE]
    if len(tf) != V2_TF_COUNT or len(oe) != V2_OE_COUNT or len(items) != V2_TF_COUNT + V2_OE_COUNT:
        errors.append(f"{path}: iterated_v2 form must hold exactly {V2_TF_COUNT} TF and {V2_OE_COUNT} OE items")
        return
    for idx, (item, lo) in enumerate(zip(tf, V2_TF_LO)):
        if item.learning_objective is not lo:
            errors.append(
                f"{path}: TF position {idx + 1} ({item.id}) must target {lo.value}"
            )
    for idx, (item, lo) in enumerate(zip(oe, V2_OE_LO)):
        if item.learning_objective is not lo:
            errors.append(
                f"{path}: OE position {idx + 1} ({item.id}) must target {lo.value}"
            )


def validate_item_config(doc: Any) -> tuple[dict[str, AssessmentItem], dict[str, AssessmentForm]]:
    """Validate a parsed item bundle into (item bank, forms by id)."""
    errors: list[str] = []
    if not isinstance(doc, Mapping):
        raise BundleValidationError(["bundle: document must be a mapping"])

    bank: dict[str, AssessmentItem] = {}
    raw_items = doc.get("items")
    if not isinstance(raw_items, list) or not raw_items:
        errors.append("items: must be a non-empty list")
        raw_items = []
    for idx, raw in enumerate(raw_items):
        item = _parse_item(raw, f"items[{idx}]", errors)
        if item is None:
            continue
        if item.id in bank:
            errors.append(f"items[{idx}].id: duplicate item id {item.id!r}")
            continue
        bank[item.id] = item

    forms: dict[str, AssessmentForm] = {}
    raw_forms = doc.get("forms")
    if not isinstance(raw_forms, list) or not raw_forms:
        errors.append("forms: must be a non-empty list")
        raw_forms = []
    for idx, raw in enumerate(raw_forms):
        path = f"forms[{idx}]"
        if not isinstance(raw, Mapping):
            errors.append(f"{path}: must be a mapping")
            continue
        form_id = raw.get("id")
        if not isinstance(form_id, str) or not form_id:
            errors.append(f"{path}.id: missing or empty")
            continue
        try:
            version = FormVersion(raw.get("version"))
        except ValueError:
            errors.append(f"{path}.version: unknown version {raw.get('version')!r}")
            continue
        item_ids = raw.get("items")
        if not isinstance(item_ids, list) or not item_ids:
            errors.append(f"{path}.items: must be a non-empty list")
            continue
        if form_id in forms:
            errors.append(f"{path}.id: duplicate form id {form_id!r}")
            continue
        form = AssessmentForm(id=form_id, version=version, item_ids=tuple(item_ids))
        if not errors:
            _check_form(form, bank, path, errors)
        forms[form_id] = form

    if errors:
        raise BundleValidationError(errors)
    return bank, forms


def load_item_bundle(path: str | Path) -> tuple[dict[str, AssessmentItem], dict[str, AssessmentForm]]:
    with open(path, "r", encoding="utf-8") as fh:
        doc = yaml.safe_load(fh)
    return validate_item_config(doc)


# ---------------------------------------------------------------------------
# Scoring
# ---------------------------------------------------------------------------


def score_objective(item: AssessmentItem, response: Any) -> int:
    """1 iff the response equals the key; OE/Likert items have no key."""
    if item.kind not in OBJECTIVE_KINDS:
        raise KindMismatch(f"item {item.id} is {item.kind.value}; no objective key")
    return int(response == item.correct)


def score_form(
    form: AssessmentForm,
    bank: Mapping[str, AssessmentItem],
    responses: Mapping[str, Any],
) -> FormScore:
    """Total and per-objective subtotals over the form's objective items.

    Missing responses score 0 and are flagged; OE items never enter the
    automatic total.
    """
    objective = form.objective_items(bank)
    known_ids = set(form.item_ids)
    for rid in responses:
        if rid not in known_ids:
            raise UnknownItem(rid)
    total = 0.0
    per_lo: dict[LearningObjective, float] = {lo: 0.0 for lo in LearningObjective}
    missing: list[str] = []
    for item in objective:
        if item.id not in responses:
            missing.append(item.id)
            continue
        score = score_objective(item, responses[item.id])
        total += score
        per_lo[item.learning_objective] += score
    return FormScore(
        total=total,
        max_score=len(objective),
        per_objective={lo: v for lo, v in per_lo.items() if v or lo in {i.learning_objective for i in objective}},
        missing=tuple(missing),
    )


@dataclass(frozen=True)
class ResponseMatrix:
    """Students x items binary score matrix; NaN cells mark missing data."""

    student_ids: tuple[str, ...]
    item_ids: tuple[str, ...]
    cells: np.ndarray

    def __post_init__(self) -> None:
        if self.cells.shape != (len(self.student_ids), len(self.item_ids)):
            raise ValueError("cells shape does not match ids")
        finite = self.cells[np.isfinite(self.cells)]
        if not np.all(np.isin(finite, (0.0, 1.0))):
            raise ValueError("cells must be binary or missing")

    def column(self, item_id: str) -> np.ndarray:
        return self.cells[:, self.item_ids.index(item_id)]

    def complete_rows(self) -> "ResponseMatrix":
        keep = ~np.isnan(self.cells).any(axis=1)
        return ResponseMatrix(
            student_ids=tuple(s for s, k in zip(self.student_ids, keep) if k),
            item_ids=self.item_ids,
            cells=self.cells[keep],
        )


def build_response_matrix(
    form: AssessmentForm,
    bank: Mapping[str, AssessmentItem],
    cohort: Sequence[tuple[str, Mapping[str, Any]]],
    oe_scores: Mapping[tuple[str, str], int] | None = None,
) -> ResponseMatrix:
    """Rows follow cohort order; columns are the form's objective items, then
    any OE items that carry human 0/1 scores.
    """
    if not cohort:
        raise ValueError("cohort must contain at least one student")
    objective = form.objective_items(bank)
    oe_scores = oe_scores or {}
    scored_oe = [
        item for item in form.oe_items(bank) if any(key[1] == item.id for key in oe_scores)
    ]
    columns = [item.id for item in objective] + [item.id for item in scored_oe]

    rows = np.full((len(cohort), len(columns)), MISSING, dtype=np.float64)
    for r, (student_id, responses) in enumerate(cohort):
        for c, item in enumerate(objective):
            if item.id in responses:
                rows[r, c] = score_objective(item, responses[item.id])
        for c, item in enumerate(scored_oe, start=len(objective)):
            score = oe_scores.get((student_id, item.id))
            if score is not None:
                if score not in (0, 1):
                    raise OutOfRange(f"OE score must be 0 or 1, got {score!r}")
                rows[r, c] = float(score)
    return ResponseMatrix(
        student_ids=tuple(s for s, _ in cohort),
        item_ids=tuple(columns),
        cells=rows,
    )


def likert_delta(pre: int, post: int) -> int:
    """Signed change of a 5-point Likert response."""
    for value in (pre, post):
        if not isinstance(value, int) or not 1 <= value <= 5:
            raise OutOfRange(f"Likert value must be an integer in 1..5, got {value!r}")
    return post - pre
