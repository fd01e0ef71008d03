"""Domain types and the time-of-day taxonomy.

Timestamps are plain ``int`` seconds since the Unix epoch (UTC) and durations
are plain ``int`` seconds. Keeping them as integers makes every piece of
arithmetic in the engine exact.
"""

from __future__ import annotations

import bisect
import enum
import re
from dataclasses import dataclass, field
from datetime import datetime, timezone
from typing import Iterable, Mapping, Sequence

from .errors import InvalidInput

Timestamp = int
Duration = int

SECONDS_PER_DAY = 86_400
SECONDS_PER_WEEK = 7 * SECONDS_PER_DAY


class Period(str, enum.Enum):
    MORNING = "morning"
    LUNCHTIME = "lunchtime"
    AFTERNOON = "afternoon"
    EVENING = "evening"
    NIGHT = "night"


class DayClass(str, enum.Enum):
    WEEKDAY = "weekday"
    WEEKEND = "weekend"


class DayOfWeek(str, enum.Enum):
    MONDAY = "monday"
    TUESDAY = "tuesday"
    WEDNESDAY = "wednesday"
    THURSDAY = "thursday"
    FRIDAY = "friday"
    SATURDAY = "saturday"
    SUNDAY = "sunday"

    @property
    def index(self) -> int:
        return _DAYS.index(self)

    @property
    def day_class(self) -> DayClass:
        return DayClass.WEEKEND if self.index >= 5 else DayClass.WEEKDAY


_DAYS = list(DayOfWeek)


@dataclass(frozen=True)
class TimePeriod:
    period: Period
    day_of_week: DayOfWeek

    @property
    def day_class(self) -> DayClass:
        return self.day_of_week.day_class

    @property
    def key(self) -> str:
        """``"<period>/<day_class>"``, the lookup key for default costs."""
        return f"{self.period.value}/{self.day_class.value}"


# ---------------------------------------------------------------------------
# Time parsing helpers


def parse_ts(text: str | int) -> Timestamp:
    """Parse an RFC 3339 timestamp (or pass an int through)."""
    if isinstance(text, int):
        return text
    s = text.strip()
    if s.endswith("Z") or s.endswith("z"):
        s = s[:-1] + "+00:00"
    try:
        dt = datetime.fromisoformat(s)
    except ValueError as exc:
        raise InvalidInput(f"bad timestamp {text!r}") from exc
    if dt.tzinfo is None:
        dt = dt.replace(tzinfo=timezone.utc)
    return int(dt.timestamp())


def format_ts(ts: Timestamp) -> str:
    return datetime.fromtimestamp(ts, tz=timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ")


_DURATION_RE = re.compile(r"^\s*(\d+(?:\.\d+)?)\s*([smhd]?)\s*$")
_UNIT = {"": 1, "s": 1, "m": 60, "h": 3600, "d": 86_400}


def parse_duration(text: str | int) -> Duration:
    """``"15m"`` -> 900. Bare numbers are seconds."""
    if isinstance(text, int):
        if text < 0:
            raise InvalidInput("negative duration")
        return text
    m = _DURATION_RE.match(text)
    if not m:
        raise InvalidInput(f"bad duration {text!r}")
    return int(round(float(m.group(1)) * _UNIT[m.group(2)]))


def parse_clock(text: str) -> int:
    """``"11:30"`` or ``"11:30:15"`` -> seconds after midnight."""
    parts = text.split(":")
    if not 2 <= len(parts) <= 3:
        raise InvalidInput(f"bad clock time {text!r}")
    h, m = int(parts[0]), int(parts[1])
    s = int(parts[2]) if len(parts) == 3 else 0
    if not (0 <= h <= 24 and 0 <= m < 60 and 0 <= s < 60) or (h == 24 and (m or s)):
        raise InvalidInput(f"bad clock time {text!r}")
    return h * 3600 + m * 60 + s


# ---------------------------------------------------------------------------
# Taxonomy

DEFAULT_PERIODS = (
    ("morning", "06:00", "11:30"),
    ("lunchtime", "11:30", "13:30"),
    ("afternoon", "13:30", "17:30"),
    ("evening", "17:30", "22:00"),
    ("night", "22:00", "06:00"),
)


@dataclass(frozen=True)
class Taxonomy:
    """Partition of the 24-hour day into named periods.

    ``intervals`` holds ``(period, start, end)`` in seconds after local
    midnight; an interval with ``end <= start`` wraps past midnight. The
    intervals must tile the day exactly, which is checked on construction.
    """

    intervals: tuple[tuple[Period, int, int], ...]
    utc_offset: int = 0
    _starts: tuple[int, ...] = field(init=False, repr=False, compare=False)
    _labels: tuple[Period, ...] = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        pieces: list[tuple[int, int, Period]] = []
        for period, start, end in self.intervals:
            if not (0 <= start < SECONDS_PER_DAY and 0 <= end <= SECONDS_PER_DAY):
                raise InvalidInput(f"period {period.value} bounds outside the day")
            if start == end % SECONDS_PER_DAY:
                raise InvalidInput(f"period {period.value} is empty or covers the whole day")
            if end > start:
                pieces.append((start, end, period))
            else:
                pieces.append((start, SECONDS_PER_DAY, period))
                if end > 0:
                    pieces.append((0, end, period))
        pieces.sort()
        cursor = 0
        for start, end, period in pieces:
            if start != cursor:
                kind = "gap" if start > cursor else "overlap"
                raise InvalidInput(f"taxonomy has a {kind} at second {cursor}")
            cursor = end
        if cursor != SECONDS_PER_DAY:
            raise InvalidInput("taxonomy does not reach midnight")
        object.__setattr__(self, "_starts", tuple(p[0] for p in pieces))
        object.__setattr__(self, "_labels", tuple(p[2] for p in pieces))

    @classmethod
    def from_config(cls, rows: Iterable[Sequence[str]] = DEFAULT_PERIODS, utc_offset: int = 0) -> "Taxonomy":
        intervals = tuple((Period(name), parse_clock(a), parse_clock(b) % SECONDS_PER_DAY) for name, a, b in rows)
        return cls(intervals=intervals, utc_offset=utc_offset)

    def to_config(self) -> list[list[str]]:
        def clock(s: int) -> str:
            return f"{s // 3600:02d}:{s % 3600 // 60:02d}" + (f":{s % 60:02d}" if s % 60 else "")

        return [[p.value, clock(a), clock(b)] for p, a, b in self.intervals]

    def with_offset(self, utc_offset: int) -> "Taxonomy":
        return Taxonomy(intervals=self.intervals, utc_offset=utc_offset)

    def local(self, ts: Timestamp) -> tuple[int, int]:
        """(local day number, second of local day)."""
        return divmod(ts + self.utc_offset, SECONDS_PER_DAY)

    def period_at(self, second_of_day: int) -> Period:
        return self._labels[bisect.bisect_right(self._starts, second_of_day) - 1]

    def next_boundary(self, second_of_day: int) -> int:
        """Second of day (possibly ``SECONDS_PER_DAY``) where the next period starts."""
        i = bisect.bisect_right(self._starts, second_of_day)
        return self._starts[i] if i < len(self._starts) else SECONDS_PER_DAY


DEFAULT_TAXONOMY = Taxonomy.from_config()


def day_of_week(ts: Timestamp, utc_offset: int = 0) -> DayOfWeek:
    days = (ts + utc_offset) // SECONDS_PER_DAY
    # 1970-01-01 was a Thursday.
    return _DAYS[(days + 3) % 7]


def classify_time_period(ts: Timestamp, taxonomy: Taxonomy = DEFAULT_TAXONOMY) -> TimePeriod:
    """Map a timestamp to its (period, day of week) under ``taxonomy``."""
    _, sod = taxonomy.local(ts)
    return TimePeriod(taxonomy.period_at(sod), day_of_week(ts, taxonomy.utc_offset))


# ---------------------------------------------------------------------------
# Events, devices, segments


class EventKind(str, enum.Enum):
    ACTIVITY = "activity"
    CONVERSATION = "conversation"
    APP_FOCUS_BEGIN = "app_focus_begin"
    APP_FOCUS_END = "app_focus_end"
    HEARTBEAT = "heartbeat"

    @property
    def is_app_focus(self) -> bool:
        return self in (EventKind.APP_FOCUS_BEGIN, EventKind.APP_FOCUS_END)


# Kinds that count as evidence of the user being there.
PRESENCE_KINDS = frozenset(
    {EventKind.ACTIVITY, EventKind.CONVERSATION, EventKind.APP_FOCUS_BEGIN, EventKind.APP_FOCUS_END}
)


@dataclass(frozen=True, slots=True)
class RawEvent:
    ts: Timestamp
    user: str
    device: str
    kind: EventKind
    app: str | None = None

    def __post_init__(self):
        if not isinstance(self.kind, EventKind):
            object.__setattr__(self, "kind", EventKind(self.kind))
        if self.kind.is_app_focus != (self.app is not None):
            raise InvalidInput(f"app must be set exactly for app-focus events: {self}")

    def to_record(self) -> dict:
        rec = {"ts": format_ts(self.ts), "user": self.user, "device": self.device, "kind": self.kind.value}
        if self.app is not None:
            rec["app"] = self.app
        return rec

    @classmethod
    def from_record(cls, rec: Mapping) -> "RawEvent":
        return cls(parse_ts(rec["ts"]), rec["user"], rec["device"], EventKind(rec["kind"]), rec.get("app"))


@dataclass(frozen=True)
class DeviceProfile:
    device: str
    location: str
    capabilities: frozenset[str] = frozenset()

    def to_record(self) -> dict:
        return {"device": self.device, "location": self.location, "capabilities": sorted(self.capabilities)}

    @classmethod
    def from_record(cls, rec: Mapping) -> "DeviceProfile":
        return cls(rec["device"], rec["location"], frozenset(rec.get("capabilities", ())))


def index_devices(profiles: Iterable[DeviceProfile]) -> dict[str, DeviceProfile]:
    out: dict[str, DeviceProfile] = {}
    for p in profiles:
        if p.device in out:
            raise InvalidInput(f"duplicate device id {p.device!r}")
        out[p.device] = p
    return out


class State(str, enum.Enum):
    PRESENT = "present"
    ABSENT = "absent"


@dataclass(frozen=True)
class PresenceSegment:
    start: Timestamp
    end: Timestamp
    state: State
    devices: frozenset[str] = frozenset()

    def __post_init__(self):
        if self.start >= self.end:
            raise InvalidInput(f"empty segment [{self.start}, {self.end})")
        if (self.state is State.ABSENT) != (not self.devices):
            raise InvalidInput("devices must be empty exactly for absent segments")

    @property
    def length(self) -> Duration:
        return self.end - self.start

    def to_record(self) -> dict:
        return {
            "start": format_ts(self.start),
            "end": format_ts(self.end),
            "state": self.state.value,
            "devices": sorted(self.devices),
        }
