from __future__ import annotations

import json
from pathlib import Path

import pytest

from promptlit import content
from promptlit.flow import SessionEvent, event_from_dict

FIXTURES = Path(__file__).parent / "fixtures"


@pytest.fixture(scope="session")
def scenarios():
    return content.load_scenarios()


@pytest.fixture(scope="session")
def item_bundle():
    return content.load_items()


@pytest.fixture(scope="session")
def survey_bundle():
    return content.load_survey()


@pytest.fixture(scope="session")
def golden_session() -> list[SessionEvent]:
    raw = json.loads((FIXTURES / "golden_session.json").read_text("utf-8"))
    return [event_from_dict(entry) for entry in raw]


@pytest.fixture()
def engine_factory(tmp_path, scenarios, item_bundle, survey_bundle):
    """Engines over fresh stores with a deterministic clock."""
    from promptlit.engine import Engine, EngineConfig
    from promptlit.simulate import SimClock
    from promptlit.store import Store

    bank, forms = item_bundle
    made = {"n": 0}

    def make(store_dir: str | None = None, **config_kwargs) -> Engine:
        made["n"] += 1
        path = store_dir or tmp_path / f"store{made['n']}"
        clock = SimClock()
        counter = {"n": 0}

        def ids() -> str:
            counter["n"] += 1
            return f"t-sess{made['n']}-{counter['n']:03d}"

        return Engine(
            scenarios,
            bank,
            forms,
            survey_bundle,
            Store(path, clock=clock),
            EngineConfig(**config_kwargs),
            clock=clock,
            session_id_factory=ids,
        )

    return make
