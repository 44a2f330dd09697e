from __future__ import annotations

import json
import random

import pytest

from logutil import random_legal_log
from promptlit.flow import (
    EventKind,
    IllegalTransition,
    Phase,
    new_event,
    replay,
    state_to_dict,
)
from promptlit.store import CorruptLog, GradeLabel, OeScoreLabel, Store, UnknownSession


def feed(store: Store, events):
    for event in events:
        store.append_event(event)


def test_roundtrip_restart(tmp_path, golden_session):
    store = Store(tmp_path / "s")
    feed(store, golden_session)
    state_before = store.state("golden-1")
    assert state_before.phase is Phase.DONE

    reopened = Store(tmp_path / "s")
    assert reopened.state("golden-1") == state_before
    assert reopened.events("golden-1") == golden_session


def test_append_is_idempotent(tmp_path, golden_session):
    store = Store(tmp_path / "s")
    feed(store, golden_session)
    before = store.state("golden-1")
    # duplicate delivery of an old event: no-op, same state
    after = store.append_event(golden_session[5])
    assert after == before
    assert len(store.events("golden-1")) == len(golden_session)


def test_conflicting_append_rejected(tmp_path, golden_session):
    from dataclasses import replace

    from promptlit.store import ConflictingAppend

    store = Store(tmp_path / "s")
    feed(store, golden_session)
    original = golden_session[5]
    impostor = replace(original, payload={**original.payload, "scenario_id": "other"})
    with pytest.raises(ConflictingAppend):
        store.append_event(impostor)
    # the genuine duplicate still no-ops
    assert store.append_event(original) == store.state("golden-1")


def test_illegal_event_rejected_without_persisting(tmp_path, golden_session):
    store = Store(tmp_path / "s")
    feed(store, golden_session[:9])
    state = store.state("golden-1")
    bad = new_event(state, EventKind.REFLECTION_SUBMITTED, {"answers": {}}, 0.0)
    with pytest.raises(IllegalTransition):
        store.append_event(bad)
    reopened = Store(tmp_path / "s")
    assert reopened.state("golden-1") == state


def test_unknown_session(tmp_path):
    store = Store(tmp_path / "s")
    with pytest.raises(UnknownSession):
        store.state("nope")


def test_checksum_detects_mid_log_corruption(tmp_path, golden_session):
    store = Store(tmp_path / "s")
    feed(store, golden_session)
    log = tmp_path / "s" / "log.ndjson"
    lines = log.read_text().splitlines()
    record = json.loads(lines[3])
    record["payload"]["answers"] = {"tampered": 1}
    lines[3] = json.dumps(record)
    log.write_text("\n".join(lines) + "\n")
    with pytest.raises(CorruptLog):
        Store(tmp_path / "s")


def test_torn_final_line_tolerated(tmp_path, golden_session):
    store = Store(tmp_path / "s")
    feed(store, golden_session)
    log = tmp_path / "s" / "log.ndjson"
    content = log.read_text()
    log.write_text(content + '{"kind": "event", "payl')  # crash mid-write
    reopened = Store(tmp_path / "s")
    assert reopened.state("golden-1").phase is Phase.DONE


def test_random_truncation_always_yields_legal_state(tmp_path, golden_session):
    base = Store(tmp_path / "base")
    feed(base, golden_session)
    payload = (tmp_path / "base" / "log.ndjson").read_bytes()
    rng = random.Random(13)
    for trial in range(40):
        cut = rng.randrange(1, len(payload) + 1)
        root = tmp_path / f"cut{trial}"
        root.mkdir()
        (root / "log.ndjson").write_bytes(payload[:cut])
        store = Store(root)
        for session_id in store.session_ids():
            events = store.events(session_id)
            # the persisted prefix must replay cleanly to the stored state
            assert replay(events) == store.state(session_id)


def test_snapshots_written_and_used(tmp_path, golden_session):
    store = Store(tmp_path / "s", snapshot_every=10)
    feed(store, golden_session)
    snaps = list((tmp_path / "s" / "snapshots").glob("*.json"))
    assert snaps, "snapshot file expected"
    raw = json.loads(snaps[0].read_text())
    assert raw["state"]["session_id"] == "golden-1"
    assert raw["state"]["next_seq"] >= 11

    reopened = Store(tmp_path / "s", snapshot_every=10)
    assert reopened.state("golden-1").phase is Phase.DONE


def test_stale_snapshot_falls_back_to_full_replay(tmp_path, golden_session):
    store = Store(tmp_path / "s", snapshot_every=10)
    feed(store, golden_session)
    snap = next((tmp_path / "s" / "snapshots").glob("*.json"))
    snap.write_text("{broken json")
    reopened = Store(tmp_path / "s")
    assert reopened.state("golden-1") == store.state("golden-1")


def test_snapshot_ahead_of_restored_log_is_ignored(tmp_path, golden_session):
    store = Store(tmp_path / "s", snapshot_every=10)
    feed(store, golden_session)
    # restore an older log (as from a backup) while keeping the newer snapshot
    log = tmp_path / "s" / "log.ndjson"
    lines = log.read_text().splitlines()
    log.write_text("\n".join(lines[:8]) + "\n")
    reopened = Store(tmp_path / "s", snapshot_every=10)
    assert reopened.state("golden-1") == replay(golden_session[:8])


def test_labels_persist(tmp_path):
    store = Store(tmp_path / "s")
    store.add_label(
        GradeLabel(
            session_id="a",
            scenario_id="s1",
            attempt_index=1,
            dimension="Relevance",
            passed=True,
            explanation_rating=0.5,
        )
    )
    store.add_label(OeScoreLabel(student_id="stu", item_id="oe4", occasion="post", score=1))
    reopened = Store(tmp_path / "s")
    assert len(reopened.grade_labels) == 1
    assert reopened.grade_labels[0].explanation_rating == 0.5
    assert len(reopened.oe_labels) == 1
    assert reopened.oe_labels[0].score == 1


def test_config_version_records_persist(tmp_path):
    store = Store(tmp_path / "s")
    store.record_config_version({"active_form": "form-v1"})
    reopened = Store(tmp_path / "s")
    assert reopened.config_versions == [{"active_form": "form-v1"}]


def test_many_random_sessions_roundtrip(tmp_path):
    rng = random.Random(21)
    store = Store(tmp_path / "s")
    logs = [random_legal_log(rng, max_events=40) for _ in range(20)]
    for log in logs:
        feed(store, log)
    reopened = Store(tmp_path / "s")
    for log in logs:
        sid = log[0].session_id
        assert state_to_dict(reopened.state(sid)) == state_to_dict(replay(log))
