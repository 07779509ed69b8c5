"""Append-only persistence for disposal records.

Backed by a single JSONL file plus an in-memory index; desk scale, no
database. Records are immutable once written except for ``bin_real``,
which manual review fills in later; every annotation is kept in an audit
log (and as an extra line in the backing file).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, replace
from datetime import datetime
from pathlib import Path
from typing import Iterable

from .model import (
    BinColor,
    DisposalRecord,
    OutcomeKind,
    decode_record,
    record_from_dict,
    record_to_dict,
)


class DuplicateRecordError(ValueError):
    pass


class UnknownRecordError(KeyError):
    pass


class OutOfOrderRecordError(ValueError):
    """Appending would break the nondecreasing-time storage order."""


@dataclass(frozen=True)
class AnnotationEntry:
    record_id: str
    previous: BinColor | None
    new: BinColor


class EventStore:
    """Single-writer record store; reads see a consistent snapshot."""

    def __init__(self, path: str | Path | None = None):
        self._path = Path(path) if path is not None else None
        self._records: list[DisposalRecord] = []
        self._index: dict[str, int] = {}
        self._audit: list[AnnotationEntry] = []
        if self._path is not None and self._path.exists():
            self._load(self._path)

    def _load(self, path: Path) -> None:
        for line in path.read_text().splitlines():
            if not line.strip():
                continue
            data = json.loads(line)
            if "annotation" in data:
                entry = data["annotation"]
                self._apply_annotation(entry["record_id"], BinColor(entry["bin_real"]))
            else:
                self._append_memory(record_from_dict(data))

    def _append_memory(self, record: DisposalRecord) -> None:
        if record.record_id in self._index:
            raise DuplicateRecordError(record.record_id)
        if self._records and record.time < self._records[-1].time:
            raise OutOfOrderRecordError(
                f"record {record.record_id} at {record.time.isoformat()} precedes "
                f"the last stored record"
            )
        self._index[record.record_id] = len(self._records)
        self._records.append(record)

    def _write_line(self, payload: dict) -> None:
        if self._path is None:
            return
        with self._path.open("a", encoding="utf-8") as handle:
            handle.write(json.dumps(payload, sort_keys=True) + "\n")

    def _apply_annotation(self, record_id: str, real: BinColor) -> DisposalRecord:
        try:
            position = self._index[record_id]
        except KeyError:
            raise UnknownRecordError(record_id) from None
        current = self._records[position]
        updated = replace(current, bin_real=real)
        self._records[position] = updated
        self._audit.append(AnnotationEntry(record_id, current.bin_real, real))
        return updated

    def append(self, record: DisposalRecord) -> str:
        self._append_memory(record)
        self._write_line(record_to_dict(record))
        return record.record_id

    def annotate_real(self, record_id: str, real: BinColor) -> DisposalRecord:
        """Set the manually reviewed bin; re-annotation overwrites with audit."""
        updated = self._apply_annotation(record_id, real)
        self._write_line({"annotation": {"record_id": record_id, "bin_real": real.value}})
        return updated

    def get(self, record_id: str) -> DisposalRecord:
        try:
            return self._records[self._index[record_id]]
        except KeyError:
            raise UnknownRecordError(record_id) from None

    def records(self) -> list[DisposalRecord]:
        return list(self._records)

    def annotations(self) -> list[AnnotationEntry]:
        return list(self._audit)

    def __len__(self) -> int:
        return len(self._records)

    def query(
        self,
        start: datetime | None = None,
        end: datetime | None = None,
        outcomes: Iterable[OutcomeKind] | None = None,
        disposed_only: bool = False,
    ) -> list[DisposalRecord]:
        """Time-ordered records matching the filter.

        ``end`` is exclusive; ``disposed_only`` drops records whose item was
        never thrown into any bin.
        """
        wanted = set(outcomes) if outcomes is not None else None
        result = []
        for record in self._records:
            if start is not None and record.time < start:
                continue
            if end is not None and record.time >= end:
                continue
            if wanted is not None and record.outcome.kind not in wanted:
                continue
            if disposed_only and not record.disposed:
                continue
            result.append(record)
        return result

    def export_jsonl(self, path: str | Path) -> Path:
        """Write the canonical record encoding (annotations folded in)."""
        path = Path(path)
        with path.open("w", encoding="utf-8") as handle:
            for record in self._records:
                handle.write(json.dumps(record_to_dict(record), sort_keys=True) + "\n")
        return path

    def import_jsonl(self, path: str | Path) -> int:
        """Append every record from a canonical JSONL export; returns count."""
        count = 0
        for line in Path(path).read_text().splitlines():
            if not line.strip():
                continue
            self.append(decode_record(line))
            count += 1
        return count
