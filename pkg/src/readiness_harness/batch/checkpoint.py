"""Append-only JSONL checkpoint: one header line, then one line per finished item."""

from __future__ import annotations

import json
import logging
import os
import threading
from pathlib import Path

from ..artifacts import RunLogRecord
from ..errors import DataError

logger = logging.getLogger(__name__)


class CheckpointMismatch(DataError):
    """Checkpoint belongs to a different plan."""


class Checkpoint:
    def __init__(self, path: Path, fingerprint: str, timestamp: str, records: dict[str, RunLogRecord]) -> None:
        self.path = Path(path)
        self.fingerprint = fingerprint
        self.timestamp = timestamp
        self.records = records
        self._lock = threading.Lock()

    @classmethod
    def open(cls, path: str | Path, fingerprint: str, timestamp: str) -> Checkpoint:
        """Resume from ``path`` if it exists, otherwise start a new checkpoint.

        A torn final line (crash mid-write) is discarded and truncated away.
        ``timestamp`` is only used for a new checkpoint; a resumed one keeps
        its original run timestamp.
        """
        path = Path(path)
        if not path.exists() or path.stat().st_size == 0:
            return cls._create(path, fingerprint, timestamp)

        data = path.read_bytes()
        lines = data.split(b"\n")
        tail = lines.pop()  # bytes after the final newline: empty unless torn
        good_end = len(data) - len(tail)
        parsed = []
        for i, raw in enumerate(lines):
            try:
                parsed.append(json.loads(raw))
            except json.JSONDecodeError:
                if i == len(lines) - 1:
                    good_end -= len(raw) + 1
                    tail = raw
                    break
                raise DataError(f"checkpoint {path} is corrupt at line {i + 1}") from None
        if tail:
            logger.warning("discarding torn checkpoint line in %s", path)
        if not parsed:
            return cls._create(path, fingerprint, timestamp)

        header = parsed[0]
        if header.get("kind") != "header":
            raise DataError(f"checkpoint {path} has no header line")
        if header.get("fingerprint") != fingerprint:
            raise CheckpointMismatch(
                f"checkpoint {path} was written for a different plan "
                f"({header.get('fingerprint', '?')[:12]} != {fingerprint[:12]})"
            )
        records: dict[str, RunLogRecord] = {}
        for row in parsed[1:]:
            record = RunLogRecord.from_dict(row["record"])
            records.setdefault(record.item_id, record)
        if good_end != len(data):
            with open(path, "r+b") as fh:
                fh.truncate(good_end)
        return cls(path, fingerprint, header["timestamp"], records)

    @classmethod
    def _create(cls, path: Path, fingerprint: str, timestamp: str) -> Checkpoint:
        path.parent.mkdir(parents=True, exist_ok=True)
        header = {"kind": "header", "fingerprint": fingerprint, "timestamp": timestamp}
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(json.dumps(header, sort_keys=True) + "\n")
            fh.flush()
            os.fsync(fh.fileno())
        return cls(path, fingerprint, timestamp, {})

    def __contains__(self, item_id: str) -> bool:
        return item_id in self.records

    def __len__(self) -> int:
        return len(self.records)

    def append(self, record: RunLogRecord) -> None:
        """Persist one finished item; serialized across worker threads."""
        line = json.dumps({"kind": "record", "record": record.to_dict()}, sort_keys=True) + "\n"
        with self._lock:
            if record.item_id in self.records:
                return
            with open(self.path, "a", encoding="utf-8") as fh:
                fh.write(line)
                fh.flush()
                os.fsync(fh.fileno())
            self.records[record.item_id] = record
