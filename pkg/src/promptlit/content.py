"""Loaders for the shipped content bundles (scenarios, items, survey)."""

from __future__ import annotations

from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Any, Mapping

import yaml

from .assessment import AssessmentForm, AssessmentItem, validate_item_config
from .domain import BundleValidationError, Scenario, validate_scenario_config


@dataclass(frozen=True)
class SurveyItem:
    id: str
    stem: str


@dataclass(frozen=True)
class WarmupItem:
    id: str
    kind: str  # "TF" | "MCQ"
    stem: str
    correct: Any
    hint: str
    feedback: str
    options: tuple[str, ...] = ()


@dataclass(frozen=True)
class SurveyBundle:
    pre_survey: tuple[SurveyItem, ...]
    post_survey: tuple[SurveyItem, ...]
    reflection: tuple[SurveyItem, ...]
    warmup: tuple[WarmupItem, ...]


def validate_survey_config(doc: Any) -> SurveyBundle:
    errors: list[str] = []
    if not isinstance(doc, Mapping):
        raise BundleValidationError(["bundle: document must be a mapping"])

    def items_of(key: str) -> tuple[SurveyItem, ...]:
        raw = doc.get(key)
        if not isinstance(raw, list) or not raw:
            errors.append(f"{key}: must be a non-empty list")
            return ()
        out = []
        for i, entry in enumerate(raw):
            if not isinstance(entry, Mapping) or not entry.get("id") or not entry.get("stem"):
                errors.append(f"{key}[{i}]: needs id and stem")
                continue
            out.append(SurveyItem(id=str(entry["id"]), stem=str(entry["stem"]).strip()))
        return tuple(out)

    pre = items_of("pre_survey")
    post = items_of("post_survey")
    reflection = items_of("reflection")

    warmups: list[WarmupItem] = []
    raw_warmup = doc.get("warmup")
    if not isinstance(raw_warmup, list) or not raw_warmup:
        errors.append("warmup: must be a non-empty list")
    else:
        for i, entry in enumerate(raw_warmup):
            path = f"warmup[{i}]"
            if not isinstance(entry, Mapping):
                errors.append(f"{path}: must be a mapping")
                continue
            kind = entry.get("kind")
            if kind not in ("TF", "MCQ"):
                errors.append(f"{path}.kind: must be TF or MCQ")
                continue
            for field in ("id", "stem", "hint", "feedback"):
                if not entry.get(field):
                    errors.append(f"{path}.{field}: missing")
            if "correct" not in entry:
                errors.append(f"{path}.correct: missing")
            options: tuple[str, ...] = ()
            if kind == "MCQ":
                raw_options = entry.get("options")
                if not isinstance(raw_options, list) or len(raw_options) < 2:
                    errors.append(f"{path}.options: MCQ warmup needs options")
                else:
                    options = tuple(str(o) for o in raw_options)
            warmups.append(
                WarmupItem(
                    id=str(entry.get("id")),
                    kind=str(kind),
                    stem=str(entry.get("stem", "")).strip(),
                    correct=entry.get("correct"),
                    hint=str(entry.get("hint", "")).strip(),
                    feedback=str(entry.get("feedback", "")).strip(),
                    options=options,
                )
            )

    if not post or {i.id for i in post} - {i.id for i in pre}:
        errors.append("post_survey: must re-ask items from the pre survey")
    if errors:
        raise BundleValidationError(errors)
    return SurveyBundle(
        pre_survey=pre, post_survey=post, reflection=reflection, warmup=tuple(warmups)
    )


def _packaged(name: str) -> Any:
    text = resources.files("promptlit.assets").joinpath(name).read_text("utf-8")
    return yaml.safe_load(text)


def load_scenarios(path: str | Path | None = None) -> list[Scenario]:
    if path is None:
        return validate_scenario_config(_packaged("scenarios.yaml"))
    with open(path, "r", encoding="utf-8") as fh:
        return validate_scenario_config(yaml.safe_load(fh))


def load_items(
    path: str | Path | None = None,
) -> tuple[dict[str, AssessmentItem], dict[str, AssessmentForm]]:
    if path is None:
        return validate_item_config(_packaged("items.yaml"))
    with open(path, "r", encoding="utf-8") as fh:
        return validate_item_config(yaml.safe_load(fh))


def load_survey(path: str | Path | None = None) -> SurveyBundle:
    if path is None:
        return validate_survey_config(_packaged("survey.yaml"))
    with open(path, "r", encoding="utf-8") as fh:
        return validate_survey_config(yaml.safe_load(fh))
