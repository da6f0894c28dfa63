"""Append-only JSONL ledger of per-document batch status."""

from __future__ import annotations

import json
import threading
from dataclasses import dataclass
from pathlib import Path

PENDING, DONE, FAILED = "pending", "done", "failed"


@dataclass(frozen=True)
class Entry:
    status: str
    attempts: int
    error: str | None = None


class BatchLedger:
    """Per-document status replayed from an append log; the last line per id wins.

    A crash loses at most the in-flight document.  A cut-off final line is
    ignored on replay.
    """

    def __init__(self, path: str | Path, max_attempts: int = 3):
        self.path = Path(path)
        self.max_attempts = max_attempts
        self._entries: dict[str, Entry] = {}
        self._lock = threading.Lock()
        if self.path.exists():
            lines = self.path.read_text(encoding="utf-8").split("\n")
            for n, line in enumerate(lines):
                if not line.strip():
                    continue
                try:
                    obj = json.loads(line)
                except ValueError:
                    if n == len(lines) - 1:
                        break
                    raise
                self._entries[obj["id"]] = Entry(obj["status"], obj["attempts"], obj.get("error"))

    def __contains__(self, doc_id: str) -> bool:
        return doc_id in self._entries

    def status(self, doc_id: str) -> str:
        entry = self._entries.get(doc_id)
        return entry.status if entry else PENDING

    def attempts(self, doc_id: str) -> int:
        entry = self._entries.get(doc_id)
        return entry.attempts if entry else 0

    def should_run(self, doc_id: str) -> bool:
        """Pending, or failed with attempts left under the cap."""
        entry = self._entries.get(doc_id)
        if entry is None:
            return True
        return entry.status == FAILED and entry.attempts < self.max_attempts

    def _append(self, doc_id: str, entry: Entry) -> None:
        with self._lock:
            self._entries[doc_id] = entry
            self.path.parent.mkdir(parents=True, exist_ok=True)
            record = {"id": doc_id, "status": entry.status, "attempts": entry.attempts}
            if entry.error:
                record["error"] = entry.error
            with open(self.path, "a", encoding="utf-8") as f:
                f.write(json.dumps(record, ensure_ascii=False) + "\n")

    def mark_done(self, doc_id: str) -> None:
        self._append(doc_id, Entry(DONE, self.attempts(doc_id) + 1))

    def mark_failed(self, doc_id: str, error: str) -> None:
        self._append(doc_id, Entry(FAILED, self.attempts(doc_id) + 1, error))

    def counts(self, ids=None) -> dict[str, int]:
        ids = self._entries.keys() if ids is None else ids
        out = {PENDING: 0, DONE: 0, FAILED: 0}
        for i in ids:
            out[self.status(i)] += 1
        return out
