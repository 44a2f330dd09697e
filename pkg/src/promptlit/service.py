"""HTTP API over the engine: scenarios, sessions, grading, admin analysis.

Thin adapters only; every business rule lives in the engine and the state
machine. Error mapping: 400 invalid input, 404 unknown session, 409 illegal
transition, 502 gateway failure, 503 grading unavailable.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import yaml
from fastapi import FastAPI, Query, Request
from fastapi.responses import JSONResponse, PlainTextResponse
from pydantic import BaseModel

from . import content
from .engine import Engine, EngineConfig, InvalidInput
from .flow import SequenceGap, TransitionError
from .gateway import GatewayConfig, GatewayError
from .grading import EmptyPrompt, GradingFailed
from .store import Store, UnknownSession


@dataclass
class ServiceConfig:
    port: int = 8000
    store_dir: str = "./promptlit-store"
    grader_backend: str = "mock"
    chat_backend: str = "mock"
    active_form: str = "form-v1"
    model_name: str = "gpt-4o"
    snapshot_every: int = 20
    scenario_bundle: str | None = None
    item_bundle: str | None = None
    survey_bundle: str | None = None
    # directory holding the built browser client (index.html + dist/);
    # served at /app when set, so the whole platform is one process
    frontend_dir: str | None = None
    gateway: GatewayConfig = field(default_factory=GatewayConfig)

    @classmethod
    def from_file(cls, path: str | Path) -> "ServiceConfig":
        with open(path, "r", encoding="utf-8") as fh:
            raw = yaml.safe_load(fh) or {}
        return cls.from_dict(raw)

    @classmethod
    def from_dict(cls, raw: dict[str, Any]) -> "ServiceConfig":
        gateway_raw = raw.get("gateway") or {}
        gateway = GatewayConfig(
            base_url=gateway_raw.get("base_url", GatewayConfig.base_url),
            api_key_env_var=gateway_raw.get("api_key_env_var", GatewayConfig.api_key_env_var),
            timeout_s=float(gateway_raw.get("timeout_s", GatewayConfig.timeout_s)),
            max_retries=int(gateway_raw.get("max_retries", GatewayConfig.max_retries)),
            backoff_base_s=float(gateway_raw.get("backoff_base_s", GatewayConfig.backoff_base_s)),
        )
        bundles = raw.get("content") or {}
        return cls(
            port=int(raw.get("port", 8000)),
            store_dir=str(raw.get("store_dir", "./promptlit-store")),
            grader_backend=str(raw.get("grader_backend", "mock")),
            chat_backend=str(raw.get("chat_backend", "mock")),
            active_form=str(raw.get("active_form", "form-v1")),
            model_name=str(raw.get("model_name", "gpt-4o")),
            snapshot_every=int(raw.get("snapshot_every", 20)),
            scenario_bundle=bundles.get("scenarios"),
            item_bundle=bundles.get("items"),
            survey_bundle=bundles.get("survey"),
            frontend_dir=raw.get("frontend_dir"),
            gateway=gateway,
        )


def build_engine(config: ServiceConfig, *, store: Store | None = None, **engine_kwargs) -> Engine:
    scenarios = content.load_scenarios(config.scenario_bundle)
    bank, forms = content.load_items(config.item_bundle)
    survey = content.load_survey(config.survey_bundle)
    if store is None:
        store = Store(config.store_dir, snapshot_every=config.snapshot_every)
    engine = Engine(
        scenarios,
        bank,
        forms,
        survey,
        store,
        EngineConfig(
            grader_backend=config.grader_backend,
            chat_backend=config.chat_backend,
            active_form_id=config.active_form,
            model_name=config.model_name,
            gateway=config.gateway,
        ),
        **engine_kwargs,
    )
    store.record_config_version(
        {
            "active_form": config.active_form,
            "grader_backend": config.grader_backend,
            "scenario_ids": [s.id for s in scenarios],
        }
    )
    return engine


class StartSessionBody(BaseModel):
    student_id: str


class SurveyBody(BaseModel):
    survey: str
    answers: dict[str, int]


class TestBody(BaseModel):
    answers: dict[str, Any]


class WarmupBody(BaseModel):
    item_id: str
    answer: Any = None


class PromptBody(BaseModel):
    text: str


class AdvanceBody(BaseModel):
    action: str


class ReflectionBody(BaseModel):
    answers: dict[str, str]


class LabelsBody(BaseModel):
    grade_labels: list[dict[str, Any]] = []
    oe_scores: list[dict[str, Any]] = []


def create_app(engine: Engine, frontend_dir: str | None = None) -> FastAPI:
    app = FastAPI(title="promptlit", version="0.1.0")
    app.state.engine = engine

    if frontend_dir:
        from fastapi.staticfiles import StaticFiles

        app.mount("/app", StaticFiles(directory=frontend_dir, html=True), name="app")

    @app.exception_handler(InvalidInput)
    @app.exception_handler(EmptyPrompt)
    async def _invalid(request: Request, exc: Exception) -> JSONResponse:
        return JSONResponse(status_code=400, content={"error": str(exc)})

    @app.exception_handler(UnknownSession)
    async def _unknown(request: Request, exc: Exception) -> JSONResponse:
        return JSONResponse(status_code=404, content={"error": f"unknown session {exc}"})

    @app.exception_handler(TransitionError)
    @app.exception_handler(SequenceGap)
    async def _illegal(request: Request, exc: Exception) -> JSONResponse:
        return JSONResponse(status_code=409, content={"error": str(exc)})

    @app.exception_handler(GatewayError)
    async def _gateway(request: Request, exc: Exception) -> JSONResponse:
        return JSONResponse(status_code=502, content={"error": str(exc)})

    @app.exception_handler(GradingFailed)
    async def _grading(request: Request, exc: Exception) -> JSONResponse:
        return JSONResponse(status_code=503, content={"error": str(exc)})

    @app.get("/health")
    def health() -> dict[str, str]:
        return {"status": "ok"}

    @app.get("/scenarios")
    def scenarios() -> dict[str, Any]:
        return engine.scenarios_payload()

    @app.get("/assessment")
    def assessment() -> dict[str, Any]:
        return engine.assessment_payload()

    @app.get("/survey")
    def survey() -> dict[str, Any]:
        return engine.survey_payload()

    @app.post("/sessions", status_code=201)
    def start_session(body: StartSessionBody) -> dict[str, Any]:
        return engine.start_session(body.student_id)

    @app.get("/sessions/{session_id}")
    def session_view(session_id: str) -> dict[str, Any]:
        return engine.session_view(session_id)

    @app.post("/sessions/{session_id}/survey")
    def submit_survey(session_id: str, body: SurveyBody) -> dict[str, Any]:
        return engine.submit_survey(session_id, body.survey, body.answers)

    @app.post("/sessions/{session_id}/test")
    def submit_test(session_id: str, body: TestBody) -> dict[str, Any]:
        return engine.submit_test(session_id, body.answers)

    @app.post("/sessions/{session_id}/warmup")
    def answer_warmup(session_id: str, body: WarmupBody) -> dict[str, Any]:
        return engine.answer_warmup(session_id, body.item_id, body.answer)

    @app.post("/sessions/{session_id}/prompt")
    def submit_prompt(session_id: str, body: PromptBody) -> dict[str, Any]:
        return engine.submit_prompt(session_id, body.text)

    @app.post("/sessions/{session_id}/check")
    def check_prompt(session_id: str) -> dict[str, Any]:
        return engine.check_prompt(session_id)

    @app.post("/sessions/{session_id}/advance")
    def advance(session_id: str, body: AdvanceBody) -> dict[str, Any]:
        return engine.advance(session_id, body.action)

    @app.post("/sessions/{session_id}/reflection")
    def submit_reflection(session_id: str, body: ReflectionBody) -> dict[str, Any]:
        return engine.submit_reflection(session_id, body.answers)

    @app.get("/admin/export")
    def export(kind: str = Query("attempts")) -> PlainTextResponse:
        return PlainTextResponse(engine.export_csv(kind), media_type="text/csv")

    @app.post("/admin/labels")
    def labels(body: LabelsBody) -> dict[str, int]:
        return engine.ingest_labels(body.model_dump())

    @app.get("/admin/analysis")
    def analysis(
        form: str | None = Query(None),
        occasion: str = Query("post"),
        source: str = Query("auto_fallback"),
    ) -> dict[str, Any]:
        return engine.analysis_report(form, occasion, source)

    return app


def create_app_from_config(config: ServiceConfig) -> FastAPI:
    return create_app(build_engine(config), frontend_dir=config.frontend_dir)
