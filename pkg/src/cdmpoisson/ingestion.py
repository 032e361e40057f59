"""CSV ingestion of CDM logs, event assembly and train/test splitting."""

from __future__ import annotations

import csv
import hashlib
import io
import math
from collections import defaultdict
from dataclasses import asdict, dataclass
from typing import Iterable, Sequence, TextIO

from .arrival import CdmEvent
from .errors import DomainError, SchemaError


@dataclass(frozen=True)
class RawCdmRecord:
    event_id: str
    time_to_tca: float


@dataclass(frozen=True)
class ColumnMapping:
    event_id: str = "event_id"
    time_to_tca: str = "time_to_tca"


@dataclass
class IngestReport:
    rows_read: int = 0
    rows_rejected: int = 0
    duplicates_collapsed: int = 0
    events_dropped_short: int = 0
    events_kept: int = 0

    def merge(self, other: IngestReport) -> IngestReport:
        return IngestReport(**{k: v + getattr(other, k) for k, v in asdict(self).items()})

    def to_dict(self) -> dict:
        return asdict(self)


def parse_csv(source: TextIO | bytes | str, schema: ColumnMapping | None = None
              ) -> tuple[list[RawCdmRecord], IngestReport]:
    """Read ``event_id`` / ``time_to_tca`` rows from a CSV with a header.

    ``source`` is an open text stream, raw UTF-8 bytes, or a path. Rows with a
    missing id or a missing, non-finite or non-positive time are rejected and
    counted.
    """
    schema = schema or ColumnMapping()
    if isinstance(source, bytes):
        return _parse(io.StringIO(source.decode("utf-8")), schema)
    if isinstance(source, str):
        with open(source, encoding="utf-8", newline="") as fh:
            return _parse(fh, schema)
    return _parse(source, schema)


def _parse(fh: TextIO, schema: ColumnMapping) -> tuple[list[RawCdmRecord], IngestReport]:
    reader = csv.DictReader(fh)
    header = reader.fieldnames
    if header is None:
        raise SchemaError("empty CSV: no header row")
    missing = [c for c in (schema.event_id, schema.time_to_tca) if c not in header]
    if missing:
        raise SchemaError(f"CSV lacks required column(s): {', '.join(missing)}")
    report = IngestReport()
    records = []
    for row in reader:
        report.rows_read += 1
        eid = (row.get(schema.event_id) or "").strip()
        raw = (row.get(schema.time_to_tca) or "").strip()
        try:
            ttca = float(raw)
        except ValueError:
            ttca = math.nan
        if not eid or not math.isfinite(ttca) or ttca <= 0.0:
            report.rows_rejected += 1
            continue
        records.append(RawCdmRecord(eid, ttca))
    return records, report


def build_events(records: Iterable[RawCdmRecord]) -> tuple[list[CdmEvent], IngestReport]:
    """Group records by event and convert time-to-TCA into arrival offsets.

    Events come out sorted by id so downstream output does not depend on row
    order in the file.
    """
    by_event: dict[str, list[float]] = defaultdict(list)
    for rec in records:
        by_event[rec.event_id].append(rec.time_to_tca)
    report = IngestReport()
    events = []
    for eid in sorted(by_event):
        ttca = sorted(set(by_event[eid]), reverse=True)
        report.duplicates_collapsed += len(by_event[eid]) - len(ttca)
        if len(ttca) < 2:
            report.events_dropped_short += 1
            continue
        first = ttca[0]
        events.append(CdmEvent(eid, tuple(first - t for t in ttca), first))
        report.events_kept += 1
    return events, report


def events_to_records(events: Sequence[CdmEvent]) -> list[RawCdmRecord]:
    return [RawCdmRecord(e.event_id, e.tca_offset - o)
            for e in events for o in e.arrival_offsets]


def write_csv(events: Sequence[CdmEvent], fh: TextIO, schema: ColumnMapping | None = None) -> None:
    schema = schema or ColumnMapping()
    writer = csv.writer(fh, lineterminator="\n")
    writer.writerow([schema.event_id, schema.time_to_tca])
    for rec in events_to_records(events):
        writer.writerow([rec.event_id, format(rec.time_to_tca, ".17g")])


def read_events(path: str, schema: ColumnMapping | None = None
                ) -> tuple[list[CdmEvent], IngestReport]:
    records, parse_report = parse_csv(path, schema)
    events, build_report = build_events(records)
    return events, parse_report.merge(build_report)


def _split_key(seed: int, event_id: str) -> bytes:
    return hashlib.blake2b(f"{seed}\x00{event_id}".encode("utf-8"), digest_size=16).digest()


def split_events(events: Sequence[CdmEvent], test_fraction: float = 0.5, seed: int = 0
                 ) -> tuple[list[CdmEvent], list[CdmEvent]]:
    """Deterministic per-event split, independent of input order.

    Events are ranked by a keyed hash of their id; the first
    ``round(test_fraction * len(events))`` go to the test set.
    """
    if not events:
        raise DomainError("cannot split an empty corpus")
    if not 0.0 < test_fraction < 1.0:
        raise DomainError(f"test_fraction must be in (0, 1), got {test_fraction}")
    ranked = sorted(events, key=lambda e: (_split_key(seed, e.event_id), e.event_id))
    n_test = int(round(test_fraction * len(ranked)))
    test_ids = {e.event_id for e in ranked[:n_test]}
    train = [e for e in events if e.event_id not in test_ids]
    test = [e for e in events if e.event_id in test_ids]
    return train, test
