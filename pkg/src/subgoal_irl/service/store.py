"""Append-only on-disk event logs, one directory per session.

Layout: ``<root>/<session_id>/events.jsonl`` holds one JSON event per line
(timestamps are recorded but ignored by replay); ``model.ck`` caches the
current reward checkpoint for convenience.  The log is the single source of
truth: restart plus replay restores every open session exactly.
"""

import json
import threading
import time
import uuid
from pathlib import Path

from ..errors import InputError
from .engine import SessionConfig, SessionEngine, replay


class SessionNotFound(InputError):
    def __init__(self, session_id: str):
        self.session_id = session_id
        super().__init__(f"no session {session_id!r}")


class SessionStore:
    def __init__(self, root):
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)
        self._engines = {}
        self._locks = {}
        self._registry_lock = threading.Lock()

    def _lock_for(self, session_id: str) -> threading.Lock:
        with self._registry_lock:
            return self._locks.setdefault(session_id, threading.Lock())

    def _events_path(self, session_id: str) -> Path:
        return self.root / session_id / "events.jsonl"

    def _append(self, session_id: str, event: dict):
        record = dict(event)
        record["ts"] = time.time()
        with open(self._events_path(session_id), "a") as f:
            f.write(json.dumps(record, sort_keys=True) + "\n")

    def read_events(self, session_id: str) -> list:
        path = self._events_path(session_id)
        if not path.exists():
            raise SessionNotFound(session_id)
        return [json.loads(line) for line in path.read_text().splitlines() if line]

    def list_sessions(self) -> list:
        return sorted(p.parent.name for p in self.root.glob("*/events.jsonl"))

    def create(self, config: SessionConfig) -> SessionEngine:
        session_id = uuid.uuid4().hex[:12]
        engine = SessionEngine(session_id, config)  # validates before any I/O
        sdir = self.root / session_id
        sdir.mkdir(parents=True, exist_ok=False)
        self._append(session_id, {"type": "created", "config": vars(config)})
        with self._lock_for(session_id):
            self._engines[session_id] = engine
            self._write_checkpoint(engine)
        return engine

    def get(self, session_id: str) -> SessionEngine:
        with self._lock_for(session_id):
            engine = self._engines.get(session_id)
            if engine is None:
                engine = replay(session_id, self.read_events(session_id))
                self._engines[session_id] = engine
            return engine

    def apply(self, session_id: str, event: dict) -> SessionEngine:
        """Apply a command event under the session's lock and persist it."""
        lock = self._lock_for(session_id)
        with lock:
            engine = self._engines.get(session_id)
            if engine is None:
                engine = replay(session_id, self.read_events(session_id))
                self._engines[session_id] = engine
            try:
                engine.apply(event)
            except Exception:
                # state may have advanced partially; rebuild from the log
                self._engines.pop(session_id, None)
                raise
            self._append(session_id, event)
            self._write_checkpoint(engine)
            return engine

    def _write_checkpoint(self, engine: SessionEngine):
        path = self.root / engine.session_id / "model.ck"
        path.write_bytes(engine.checkpoint())

    def drop_cache(self):
        """Forget all in-memory engines (used to exercise crash recovery)."""
        with self._registry_lock:
            self._engines.clear()
