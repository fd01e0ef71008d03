"""Append-only line-record persistence.

Every file is UTF-8 with one JSON object per line. A writer only ever appends
whole lines; a final line without a newline is a torn write and is dropped on
load (and cut off before the next append).

Layout of a store directory::

    events.jsonl                  {ts, user, device, kind, app?}
    devices.jsonl                 {device, location, capabilities}
    directory.jsonl               {person, manager} or {alias}
    calendars/<user>.jsonl        AppointmentRecord fields
    annotations/<user>.jsonl      AnnotationRecord fields
    models/<user>/<name>.jsonl    serialized decision trees
"""

from __future__ import annotations

import enum
import json
import logging
import os
import threading
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Iterator, Mapping, Sequence

from .core import DeviceProfile, RawEvent, Timestamp, format_ts, index_devices, parse_ts
from .errors import InvalidInput, OutOfOrder

logger = logging.getLogger(__name__)


def _dumps(rec: Mapping) -> str:
    return json.dumps(rec, ensure_ascii=False, separators=(",", ":"))


def read_records(path: Path) -> tuple[list[dict], int]:
    """Parse a line-record file. Returns ``(records, dropped_lines)``."""
    if not path.exists():
        return [], 0
    data = path.read_bytes()
    lines = data.split(b"\n")
    tail = lines.pop()  # empty when the file ends with a newline
    records = []
    for raw in lines:
        if raw.strip():
            records.append(json.loads(raw.decode("utf-8")))
    dropped = 0
    if tail.strip():
        dropped = 1
        logger.warning("%s: dropped truncated final line (%d bytes)", path, len(tail))
    return records, dropped


def _repair_tail(path: Path) -> None:
    """Cut a torn final line so the next append starts on a fresh line."""
    if not path.exists():
        return
    with open(path, "rb+") as fh:
        data = fh.read()
        if data and not data.endswith(b"\n"):
            fh.truncate(data.rfind(b"\n") + 1)


def append_lines(path: Path, records: Iterable[Mapping], fsync: bool = False) -> int:
    path.parent.mkdir(parents=True, exist_ok=True)
    _repair_tail(path)
    payload = "".join(_dumps(r) + "\n" for r in records)
    if not payload:
        return 0
    with open(path, "a", encoding="utf-8") as fh:
        fh.write(payload)
        fh.flush()
        if fsync:
            os.fsync(fh.fileno())
    return payload.count("\n")


class EventLog:
    """Append-only event file with a per-user index of time ranges."""

    def __init__(self, path: str | os.PathLike, fsync: bool = False):
        self.path = Path(path)
        self.fsync = fsync
        self.dropped_lines = 0
        self._lock = threading.Lock()
        self.ranges: dict[str, tuple[Timestamp, Timestamp]] = {}
        records, self.dropped_lines = read_records(self.path)
        for rec in records:
            self._index(rec["user"], parse_ts(rec["ts"]))

    def _index(self, user: str, ts: Timestamp) -> None:
        first, _ = self.ranges.get(user, (ts, ts))
        self.ranges[user] = (first, ts)

    def users(self) -> list[str]:
        return sorted(self.ranges)

    def append_events(self, batch: Sequence[RawEvent]) -> int:
        """Append ``batch``; all-or-nothing on an ordering violation."""
        with self._lock:
            last = {u: r[1] for u, r in self.ranges.items()}
            for e in batch:
                prev = last.get(e.user)
                if prev is not None and e.ts < prev:
                    raise OutOfOrder(f"user {e.user}: event at {e.ts} precedes stored {prev}")
                last[e.user] = e.ts
            n = append_lines(self.path, (e.to_record() for e in batch), fsync=self.fsync)
            for e in batch:
                self._index(e.user, e.ts)
            return n

    def load_range(self, user: str, span: tuple[Timestamp, Timestamp] | None = None) -> list[RawEvent]:
        """Events for ``user`` with ``span[0] <= ts < span[1]``, sorted."""
        if span is not None and span[0] > span[1]:
            raise InvalidInput(f"malformed span {span}")
        records, self.dropped_lines = read_records(self.path)
        out = []
        for rec in records:
            if rec["user"] != user:
                continue
            e = RawEvent.from_record(rec)
            if span is None or span[0] <= e.ts < span[1]:
                out.append(e)
        out.sort(key=lambda e: e.ts)
        return out


# ---------------------------------------------------------------------------
# Calendar, annotations, directory


class UserRole(str, enum.Enum):
    ORGANIZER = "organizer"
    REQUIRED = "required"
    OPTIONAL = "optional"


class ResponseStatus(str, enum.Enum):
    RESPONDED_YES = "responded_yes"
    RESPONDED_TENTATIVE = "responded_tentative"
    NO_RESPONSE = "no_response"
    NO_RESPONSE_REQUESTED = "no_response_requested"


class BusyFlag(str, enum.Enum):
    BUSY = "busy"
    FREE = "free"


class Interruptability(str, enum.Enum):
    LOW = "low"
    MEDIUM = "medium"
    HIGH = "high"


class AnnotationSource(str, enum.Enum):
    HEURISTIC_DRAFT = "heuristic_draft"
    MANUAL = "manual"


@dataclass(frozen=True)
class AppointmentRecord:
    id: str
    start: Timestamp
    end: Timestamp
    subject: str
    location_field: str
    organizer: str
    attendees: tuple[str, ...]
    user_role: UserRole
    response_status: ResponseStatus
    recurrent: bool
    busy_flag: BusyFlag
    organized_by_alias: bool

    def __post_init__(self):
        if self.start >= self.end:
            raise InvalidInput(f"appointment {self.id}: start must precede end")
        if not self.organizer:
            raise InvalidInput(f"appointment {self.id}: empty organizer")

    def to_record(self) -> dict:
        return {
            "id": self.id,
            "start": format_ts(self.start),
            "end": format_ts(self.end),
            "subject": self.subject,
            "location_field": self.location_field,
            "organizer": self.organizer,
            "attendees": list(self.attendees),
            "user_role": self.user_role.value,
            "response_status": self.response_status.value,
            "recurrent": self.recurrent,
            "busy_flag": self.busy_flag.value,
            "organized_by_alias": self.organized_by_alias,
        }

    @classmethod
    def from_record(cls, rec: Mapping) -> "AppointmentRecord":
        return cls(
            id=rec["id"],
            start=parse_ts(rec["start"]),
            end=parse_ts(rec["end"]),
            subject=rec["subject"],
            location_field=rec["location_field"],
            organizer=rec["organizer"],
            attendees=tuple(rec["attendees"]),
            user_role=UserRole(rec["user_role"]),
            response_status=ResponseStatus(rec["response_status"]),
            recurrent=bool(rec["recurrent"]),
            busy_flag=BusyFlag(rec["busy_flag"]),
            organized_by_alias=bool(rec["organized_by_alias"]),
        )


@dataclass(frozen=True)
class AnnotationRecord:
    appointment_id: str
    attended: bool | None = None
    interruptability: Interruptability | None = None
    location: str | None = None
    source: AnnotationSource = AnnotationSource.MANUAL

    def __post_init__(self):
        if self.attended is None and self.interruptability is None and self.location is None:
            raise InvalidInput(f"annotation for {self.appointment_id} sets no field")

    def to_record(self) -> dict:
        return {
            "appointment_id": self.appointment_id,
            "attended": self.attended,
            "interruptability": self.interruptability.value if self.interruptability else None,
            "location": self.location,
            "source": self.source.value,
        }

    @classmethod
    def from_record(cls, rec: Mapping) -> "AnnotationRecord":
        level = rec.get("interruptability")
        return cls(
            appointment_id=rec["appointment_id"],
            attended=rec.get("attended"),
            interruptability=Interruptability(level) if level else None,
            location=rec.get("location") or None,
            source=AnnotationSource(rec.get("source", "manual")),
        )


def resolve_annotations(records: Iterable[AnnotationRecord]) -> dict[str, AnnotationRecord]:
    """Latest manual record per id, else latest heuristic draft."""
    drafts: dict[str, AnnotationRecord] = {}
    manual: dict[str, AnnotationRecord] = {}
    for r in records:
        (manual if r.source is AnnotationSource.MANUAL else drafts)[r.appointment_id] = r
    return {**drafts, **manual}


@dataclass(frozen=True)
class DirectoryStub:
    """Offline stand-in for an organizational directory."""

    managers: Mapping[str, str] = field(default_factory=dict)
    aliases: frozenset[str] = frozenset()

    def __post_init__(self):
        for person in self.managers:
            seen = {person}
            cur = self.managers.get(person)
            while cur is not None:
                if cur in seen:
                    raise InvalidInput(f"manager cycle through {cur!r}")
                seen.add(cur)
                cur = self.managers.get(cur)

    def manager_of(self, person: str) -> str | None:
        return self.managers.get(person)

    def to_records(self) -> Iterator[dict]:
        for person in sorted(self.managers):
            yield {"person": person, "manager": self.managers[person]}
        for alias in sorted(self.aliases):
            yield {"alias": alias}

    @classmethod
    def from_records(cls, records: Iterable[Mapping]) -> "DirectoryStub":
        managers: dict[str, str] = {}
        aliases: set[str] = set()
        for rec in records:
            if "alias" in rec:
                aliases.add(rec["alias"])
            else:
                managers[rec["person"]] = rec["manager"]
        return cls(managers, frozenset(aliases))


def _overlaps(start: Timestamp, end: Timestamp, span: tuple[Timestamp, Timestamp] | None) -> bool:
    return span is None or (start < span[1] and end > span[0])


class Store:
    """A directory of line-record files (see the module docstring)."""

    def __init__(self, root: str | os.PathLike, fsync: bool = False):
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)
        self.fsync = fsync
        self.events = EventLog(self.root / "events.jsonl", fsync=fsync)

    # paths
    def calendar_path(self, user: str) -> Path:
        return self.root / "calendars" / f"{user}.jsonl"

    def annotations_path(self, user: str) -> Path:
        return self.root / "annotations" / f"{user}.jsonl"

    def model_path(self, user: str, name: str) -> Path:
        return self.root / "models" / user / f"{name}.jsonl"

    def users(self) -> list[str]:
        names = set(self.events.users())
        cal_dir = self.root / "calendars"
        if cal_dir.is_dir():
            names.update(p.stem for p in cal_dir.glob("*.jsonl"))
        return sorted(names)

    # events
    def append_events(self, batch: Sequence[RawEvent]) -> int:
        return self.events.append_events(batch)

    def load_range(self, user: str, span: tuple[Timestamp, Timestamp] | None = None) -> list[RawEvent]:
        return self.events.load_range(user, span)

    # calendar
    def append_appointments(self, user: str, appts: Iterable[AppointmentRecord]) -> int:
        return append_lines(self.calendar_path(user), (a.to_record() for a in appts), self.fsync)

    def load_calendar(self, user: str, span: tuple[Timestamp, Timestamp] | None = None) -> list[AppointmentRecord]:
        """Appointments whose ``[start, end)`` intersects ``span``, by start time."""
        records, _ = read_records(self.calendar_path(user))
        latest: dict[str, AppointmentRecord] = {}
        for rec in records:
            a = AppointmentRecord.from_record(rec)
            latest[a.id] = a
        out = [a for a in latest.values() if _overlaps(a.start, a.end, span)]
        out.sort(key=lambda a: (a.start, a.id))
        return out

    # annotations
    def append_annotations(self, user: str, records: Iterable[AnnotationRecord]) -> int:
        return append_lines(self.annotations_path(user), (r.to_record() for r in records), self.fsync)

    def load_annotations(self, user: str) -> dict[str, AnnotationRecord]:
        records, _ = read_records(self.annotations_path(user))
        return resolve_annotations(AnnotationRecord.from_record(r) for r in records)

    # devices and directory (small files, rewritten whole)
    def save_devices(self, profiles: Iterable[DeviceProfile]) -> None:
        _rewrite(self.root / "devices.jsonl", (p.to_record() for p in profiles))

    def load_devices(self) -> dict[str, DeviceProfile]:
        records, _ = read_records(self.root / "devices.jsonl")
        return index_devices(DeviceProfile.from_record(r) for r in records)

    def save_directory(self, directory: DirectoryStub) -> None:
        _rewrite(self.root / "directory.jsonl", directory.to_records())

    def load_directory(self) -> DirectoryStub:
        records, _ = read_records(self.root / "directory.jsonl")
        return DirectoryStub.from_records(records)


def _rewrite(path: Path, records: Iterable[Mapping]) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_suffix(".tmp")
    tmp.write_text("".join(_dumps(r) + "\n" for r in records), encoding="utf-8")
    os.replace(tmp, path)
