"""Append-only session persistence.

One JSON-lines file per session, one event per line. Loading replays the
events through the flow state machine, so any prefix of a session (including
one cut short by a crash) reconstructs a consistent state.
"""

from __future__ import annotations

import json
import re
import threading
from pathlib import Path

from .errors import SessionLoadError, SessionNotFoundError, UsageError
from .flow import SessionState, replay_events

_SESSION_ID_RE = re.compile(r"^[A-Za-z0-9._-]+$")


class SessionStore:
    def __init__(self, root: str | Path):
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)
        self._lock = threading.Lock()

    def _path(self, session_id: str) -> Path:
        if not _SESSION_ID_RE.match(session_id):
            raise UsageError(f"invalid session id {session_id!r}")
        return self.root / f"{session_id}.jsonl"

    def save_event(self, session_id: str, event: dict) -> None:
        line = json.dumps(event, ensure_ascii=False)
        with self._lock, open(self._path(session_id), "a", encoding="utf-8") as fh:
            fh.write(line + "\n")
            fh.flush()

    def sink(self, session_id: str):
        """EventLog sink bound to one session file."""
        return lambda event: self.save_event(session_id, event)

    def load_events(self, session_id: str) -> list[dict]:
        path = self._path(session_id)
        if not path.exists():
            raise SessionNotFoundError(f"no session {session_id!r}")
        events: list[dict] = []
        with open(path, encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, start=1):
                if not line.strip():
                    continue
                try:
                    events.append(json.loads(line))
                except json.JSONDecodeError as exc:
                    raise SessionLoadError(f"corrupt event record: {exc.msg}", line=lineno) from exc
        return events

    def load_session(self, session_id: str) -> SessionState:
        return replay_events(self.load_events(session_id))

    def list_sessions(self) -> list[str]:
        return sorted(p.stem for p in self.root.glob("*.jsonl"))

    def exists(self, session_id: str) -> bool:
        return self._path(session_id).exists()
