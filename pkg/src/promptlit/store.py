"""Append-only record log with per-session snapshots.

One NDJSON log per deployment holds events, labels, and config-version
records, each with a payload checksum. Session snapshots are written to
separate files every `snapshot_every` events so restarts replay only the
log suffix. A torn final line (crash mid-write) is tolerated; corruption
anywhere else is an error.
"""

from __future__ import annotations

import hashlib
import json
import os
import threading
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Iterator, Mapping

from .domain import canonical_json
from .flow import (
    EventKind,
    IllegalTransition,
    SequenceGap,
    TransitionError,
    SessionEvent,
    SessionState,
    apply,
    event_from_dict,
    event_to_dict,
    start_session,
    state_from_dict,
    state_to_dict,
)

RECORD_KINDS = ("event", "label", "config-version")

# bump when a persisted payload shape changes
RECORD_SCHEMA_VERSION = 1


class CorruptLog(Exception):
    """A non-final record failed checksum or JSON validation."""


class UnknownSession(KeyError):
    pass


class ConflictingAppend(TransitionError):
    """A different event already occupies this (session, sequence_no)."""

    def __init__(self, session_id: str, sequence_no: int):
        super().__init__(
            f"sequence_no {sequence_no} of session {session_id} already holds a different event"
        )


def _checksum(kind: str, payload: Any) -> str:
    return hashlib.sha256((kind + "\n" + canonical_json(payload)).encode("utf-8")).hexdigest()


@dataclass
class GradeLabel:
    """Human verdict for one (attempt, dimension), with an optional 1/0.5/0
    rating of the auto-grader's explanation for the same pair."""

    session_id: str
    scenario_id: str
    attempt_index: int
    dimension: str
    passed: bool
    explanation: str = "human label"
    explanation_rating: float | None = None

    def to_payload(self) -> dict[str, Any]:
        return {
            "label_kind": "grade",
            "session_id": self.session_id,
            "scenario_id": self.scenario_id,
            "attempt_index": self.attempt_index,
            "dimension": self.dimension,
            "pass": self.passed,
            "explanation": self.explanation,
            "explanation_rating": self.explanation_rating,
        }


@dataclass
class OeScoreLabel:
    """Human 0/1 score for one open-ended item response."""

    student_id: str
    item_id: str
    occasion: str  # "pre" | "post"
    score: int

    def to_payload(self) -> dict[str, Any]:
        return {
            "label_kind": "oe_score",
            "student_id": self.student_id,
            "item_id": self.item_id,
            "occasion": self.occasion,
            "score": self.score,
        }


def label_from_payload(payload: Mapping[str, Any]) -> GradeLabel | OeScoreLabel:
    if payload.get("label_kind") == "grade":
        return GradeLabel(
            session_id=payload["session_id"],
            scenario_id=payload["scenario_id"],
            attempt_index=int(payload["attempt_index"]),
            dimension=payload["dimension"],
            passed=bool(payload["pass"]),
            explanation=payload.get("explanation", "human label"),
            explanation_rating=payload.get("explanation_rating"),
        )
    if payload.get("label_kind") == "oe_score":
        return OeScoreLabel(
            student_id=payload["student_id"],
            item_id=payload["item_id"],
            occasion=payload["occasion"],
            score=int(payload["score"]),
        )
    raise ValueError(f"unknown label kind {payload.get('label_kind')!r}")


@dataclass
class _Session:
    events: list[SessionEvent] = field(default_factory=list)
    state: SessionState | None = None


class Store:
    """Durable deployment state: sessions, labels, config versions."""

    def __init__(
        self,
        root: str | Path,
        *,
        snapshot_every: int = 20,
        clock: Callable[[], float] = time.time,
    ):
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)
        self.snapshot_dir = self.root / "snapshots"
        self.snapshot_dir.mkdir(exist_ok=True)
        self.log_path = self.root / "log.ndjson"
        self.snapshot_every = snapshot_every
        self.clock = clock
        self._lock = threading.RLock()  # single-writer discipline for appends
        self._sessions: dict[str, _Session] = {}
        self._applied: dict[tuple[str, int], str] = {}
        self.grade_labels: list[GradeLabel] = []
        self.oe_labels: list[OeScoreLabel] = []
        self.config_versions: list[dict[str, Any]] = []
        self._load()

    # -- reading ------------------------------------------------------------

    def _read_records(self) -> Iterator[dict[str, Any]]:
        if not self.log_path.exists():
            return
        with open(self.log_path, "r", encoding="utf-8") as fh:
            lines = fh.readlines()
        for lineno, line in enumerate(lines):
            is_last = lineno == len(lines) - 1
            stripped = line.strip()
            if not stripped:
                continue
            try:
                record = json.loads(stripped)
                kind = record["kind"]
                payload = record["payload"]
                if record["checksum"] != _checksum(kind, payload):
                    raise ValueError("checksum mismatch")
            except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
                if is_last:
                    # torn final write; ignore the partial record
                    return
                raise CorruptLog(f"record {lineno + 1}: {exc}") from exc
            yield record

    def _load(self) -> None:
        snapshots = self._load_snapshots()
        pending: dict[str, list[SessionEvent]] = {}
        for record in self._read_records():
            kind, payload = record["kind"], record["payload"]
            if kind == "event":
                event = event_from_dict(payload)
                self._applied[(event.session_id, event.sequence_no)] = record["checksum"]
                pending.setdefault(event.session_id, []).append(event)
            elif kind == "label":
                self._register_label(label_from_payload(payload))
            elif kind == "config-version":
                self.config_versions.append(dict(payload))

        for session_id, events in pending.items():
            session = _Session(events=events)
            snap = snapshots.get(session_id)
            # a snapshot ahead of the log (e.g. log restored from an older
            # backup) must not win over a replay of what is actually there
            if snap is not None and snap.next_seq > events[-1].sequence_no + 1:
                snap = None
            try:
                if snap is not None:
                    state = snap
                    for event in events:
                        if event.sequence_no >= state.next_seq:
                            state = apply(state, event)
                else:
                    state = self._replay_all(events)
            except Exception:
                # stale or inconsistent snapshot: fall back to a full replay
                state = self._replay_all(events)
            session.state = state
            self._sessions[session_id] = session

    @staticmethod
    def _replay_all(events: list[SessionEvent]) -> SessionState:
        first = events[0]
        state, _ = start_session(
            student_id=str(first.payload.get("student_id", "")),
            session_id=first.session_id,
            timestamp=first.timestamp,
        )
        for event in events[1:]:
            state = apply(state, event)
        return state

    def _load_snapshots(self) -> dict[str, SessionState]:
        out: dict[str, SessionState] = {}
        for path in self.snapshot_dir.glob("*.json"):
            try:
                raw = json.loads(path.read_text("utf-8"))
                if raw["checksum"] != _checksum("snapshot", raw["state"]):
                    continue
                state = state_from_dict(raw["state"])
            except (json.JSONDecodeError, KeyError, ValueError, TypeError):
                continue  # unusable snapshot; full replay covers it
            out[state.session_id] = state
        return out

    # -- writing ------------------------------------------------------------

    def _append_record(self, kind: str, payload: Any) -> None:
        record = {
            "schema": RECORD_SCHEMA_VERSION,
            "kind": kind,
            "payload": payload,
            "checksum": _checksum(kind, payload),
            "written_at": self.clock(),
        }
        with open(self.log_path, "a", encoding="utf-8") as fh:
            fh.write(json.dumps(record, ensure_ascii=False) + "\n")
            fh.flush()
            os.fsync(fh.fileno())

    def record_config_version(self, info: Mapping[str, Any]) -> None:
        with self._lock:
            payload = dict(info)
            self.config_versions.append(payload)
            self._append_record("config-version", payload)

    def start_session(self, student_id: str, session_id: str) -> SessionState:
        with self._lock:
            if session_id in self._sessions:
                raise ValueError(f"session id {session_id!r} already exists")
            _, event = start_session(student_id, session_id, timestamp=self.clock())
            return self.append_event(event)

    def append_event(self, event: SessionEvent) -> SessionState:
        """Apply and persist; duplicate (session, sequence_no) is a no-op.

        A Started event bootstraps its session, so a full external log can
        be ingested by appending every event in order.
        """
        with self._lock:
            key = (event.session_id, event.sequence_no)
            session = self._sessions.get(event.session_id)
            if key in self._applied:
                if self._applied[key] != _checksum("event", event_to_dict(event)):
                    raise ConflictingAppend(event.session_id, event.sequence_no)
                assert session is not None and session.state is not None
                return session.state
            if event.kind is EventKind.STARTED:
                if session is not None:
                    raise IllegalTransition(session.state, event, "session already started")
                if event.sequence_no != 1:
                    raise SequenceGap(1, event.sequence_no)
                new_state, _ = start_session(
                    student_id=str(event.payload.get("student_id", "")),
                    session_id=event.session_id,
                    timestamp=event.timestamp,
                )
                session = _Session(events=[], state=None)
                self._sessions[event.session_id] = session
            else:
                if session is None or session.state is None:
                    raise UnknownSession(event.session_id)
                new_state = apply(session.state, event)  # raises before persisting
            session.events.append(event)
            session.state = new_state
            self._applied[key] = _checksum("event", event_to_dict(event))
            self._append_record("event", event_to_dict(event))
            if event.sequence_no % self.snapshot_every == 0:
                self._write_snapshot(new_state)
            return new_state

    def _write_snapshot(self, state: SessionState) -> None:
        payload = state_to_dict(state)
        blob = json.dumps(
            {"state": payload, "checksum": _checksum("snapshot", payload)},
            ensure_ascii=False,
        )
        path = self.snapshot_dir / f"{state.session_id}.json"
        tmp = path.with_suffix(".tmp")
        tmp.write_text(blob, "utf-8")
        tmp.replace(path)

    def _register_label(self, label: GradeLabel | OeScoreLabel) -> None:
        if isinstance(label, GradeLabel):
            self.grade_labels.append(label)
        else:
            self.oe_labels.append(label)

    def add_label(self, label: GradeLabel | OeScoreLabel) -> None:
        with self._lock:
            self._register_label(label)
            self._append_record("label", label.to_payload())

    # -- queries ------------------------------------------------------------

    def session_ids(self) -> list[str]:
        return sorted(self._sessions)

    def state(self, session_id: str) -> SessionState:
        session = self._sessions.get(session_id)
        if session is None or session.state is None:
            raise UnknownSession(session_id)
        return session.state

    def events(self, session_id: str) -> list[SessionEvent]:
        session = self._sessions.get(session_id)
        if session is None:
            raise UnknownSession(session_id)
        return list(session.events)

    def all_events(self) -> Iterator[SessionEvent]:
        for session_id in self.session_ids():
            yield from self._sessions[session_id].events

    def last_event(self, session_id: str, kind: EventKind) -> SessionEvent | None:
        for event in reversed(self.events(session_id)):
            if event.kind is kind:
                return event
        return None
