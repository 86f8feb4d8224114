"""Vector memory of past interactions, used to pick few-shot exemplars.

Records live in an append-only JSONL file, one record plus its embedding per
line. The baseline embedder is a hashed bag of words: tokens are lowercased
``\\w+`` runs, each hashed with BLAKE2b (8-byte digest, little-endian) into
one of ``dim`` buckets, counted and L2-normalized.
"""

from __future__ import annotations

import hashlib
import json
import logging
import re
import threading
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Iterable

import numpy as np

log = logging.getLogger(__name__)

DEFAULT_DIM = 256
OUTCOMES = ("success", "rejected", "failed")
# similarities are rounded before ranking so mathematically equal scores tie
SCORE_DECIMALS = 12

_TOKEN = re.compile(r"\w+")


class StorageFailure(OSError):
    pass


@dataclass(frozen=True)
class MemoryRecord:
    description_text: str
    robot_id: str | None
    command_id: str | None
    timestamp: float
    outcome: str = "success"

    def __post_init__(self) -> None:
        if not self.description_text:
            raise ValueError("description_text must be non-empty")
        if self.outcome not in OUTCOMES:
            raise ValueError(f"unknown outcome {self.outcome!r}")


def tokenize(text: str) -> list[str]:
    return _TOKEN.findall(text.lower())


def token_bucket(token: str, dim: int = DEFAULT_DIM) -> int:
    digest = hashlib.blake2b(token.encode("utf-8"), digest_size=8).digest()
    return int.from_bytes(digest, "little") % dim


def embed(text: str, dim: int = DEFAULT_DIM) -> np.ndarray:
    vec = np.zeros(dim, dtype=np.float64)
    for token in tokenize(text):
        vec[token_bucket(token, dim)] += 1.0
    norm = np.linalg.norm(vec)
    return vec / norm if norm > 0 else vec


Embedder = Callable[[str], np.ndarray]


def record_to_line(record: MemoryRecord, embedding: np.ndarray) -> str:
    payload = {
        "text": record.description_text,
        "robot": record.robot_id,
        "command": record.command_id,
        "timestamp": record.timestamp,
        "outcome": record.outcome,
        "embedding": [float(v) for v in embedding],
    }
    return json.dumps(payload, ensure_ascii=False, separators=(",", ":"))


def line_to_record(line: str) -> tuple[MemoryRecord, np.ndarray]:
    raw = json.loads(line)
    record = MemoryRecord(
        description_text=raw["text"],
        robot_id=raw.get("robot"),
        command_id=raw.get("command"),
        timestamp=float(raw["timestamp"]),
        outcome=raw.get("outcome", "success"),
    )
    return record, np.asarray(raw.get("embedding", []), dtype=np.float64)


class VectorMemory:
    """In-memory index over an optional JSONL log.

    Stores are serialized by a lock; retrievals work on the lists as they
    were when the call started, so a concurrent store never shows up half
    written.
    """

    def __init__(
        self,
        path: str | Path | None = None,
        *,
        dim: int = DEFAULT_DIM,
        embedder: Embedder | None = None,
    ) -> None:
        self.path = Path(path) if path is not None else None
        self.dim = dim
        self.embedder = embedder or (lambda text: embed(text, dim))
        self._lock = threading.Lock()
        # (records, vectors) swapped as one tuple so readers never see them out of step
        self._snapshot: tuple[tuple[MemoryRecord, ...], tuple[np.ndarray, ...]] = ((), ())
        self._needs_newline = False
        self._torn_offset: int | None = None
        if self.path is not None and self.path.exists():
            self._load()

    def __len__(self) -> int:
        return len(self._snapshot[0])

    def _load(self) -> None:
        text = self.path.read_text(encoding="utf-8")
        # a torn final write leaves no newline; the next append must not glue onto it
        self._needs_newline = bool(text) and not text.endswith("\n")
        # split on "\n" only: records may hold raw U+2028 and friends, which splitlines() breaks on
        lines = text.split("\n")
        if lines and lines[-1] == "":
            lines.pop()
        records, vectors = [], []
        for i, line in enumerate(lines):
            if not line.strip():
                continue
            try:
                record, vector = line_to_record(line)
            except (json.JSONDecodeError, KeyError, ValueError, TypeError):
                if i == len(lines) - 1:
                    log.warning("ignoring truncated last line in %s", self.path)
                    self._torn_offset = len("".join(l + "\n" for l in lines[:i]).encode("utf-8"))
                    self._needs_newline = False
                    break
                raise
            if vector.shape != (self.dim,):
                vector = self.embedder(record.description_text)
            records.append(record)
            vectors.append(vector)
        self._snapshot = (tuple(records), tuple(vectors))

    def records(self) -> list[MemoryRecord]:
        return list(self._snapshot[0])

    def store(self, record: MemoryRecord) -> None:
        vector = np.asarray(self.embedder(record.description_text), dtype=np.float64)
        if vector.shape != (self.dim,):
            raise ValueError(f"embedder returned shape {vector.shape}, expected ({self.dim},)")
        with self._lock:
            if self.path is not None:
                try:
                    self.path.parent.mkdir(parents=True, exist_ok=True)
                    if self._torn_offset is not None:
                        with self.path.open("r+b") as fh:
                            fh.truncate(self._torn_offset)
                        self._torn_offset = None
                    with self.path.open("a", encoding="utf-8") as fh:
                        if self._needs_newline:
                            fh.write("\n")
                        fh.write(record_to_line(record, vector) + "\n")
                    self._needs_newline = False
                except OSError as exc:
                    raise StorageFailure(f"cannot append to {self.path}: {exc}") from exc
            # rebind rather than mutate so in-flight retrievals keep their snapshot
            records, vectors = self._snapshot
            self._snapshot = (records + (record,), vectors + (vector,))

    def retrieve(self, query_text: str, k: int = 3) -> list[MemoryRecord]:
        if k < 1:
            raise ValueError("k must be >= 1")
        records, vectors = self._snapshot
        candidates = [i for i, r in enumerate(records) if r.outcome == "success"]
        if not candidates:
            return []
        query = np.asarray(self.embedder(query_text), dtype=np.float64)
        sims = np.stack([vectors[i] for i in candidates]) @ query
        ranked = sorted(
            zip(candidates, sims),
            key=lambda item: (-round(float(item[1]), SCORE_DECIMALS), -records[item[0]].timestamp, item[0]),
        )
        return [records[i] for i, _ in ranked[:k]]

    def export_lines(self) -> Iterable[str]:
        for record, vector in zip(*self._snapshot):
            yield record_to_line(record, vector)

    def import_lines(self, lines: Iterable[str]) -> int:
        count = 0
        for line in lines:
            if line.strip():
                record, _ = line_to_record(line)
                self.store(record)
                count += 1
        return count

