"""Training cases for a query: proximal context, extraction and backoff."""

from __future__ import annotations

import bisect
import enum
from dataclasses import dataclass, field
from typing import Mapping, Sequence

from .core import (
    DayClass,
    DayOfWeek,
    DeviceProfile,
    Duration,
    Period,
    PresenceSegment,
    RawEvent,
    State,
    Taxonomy,
    TimePeriod,
    Timestamp,
    classify_time_period,
)
from .errors import InsufficientHistory, InvalidInput, NoData
from .store import AnnotationRecord, AppointmentRecord
from .timeline import app_focus_timeline, coalesce_timeline, filter_by_device


class CalendarStatus(str, enum.Enum):
    NO_MEETING = "no_meeting"
    MEETING_SCHEDULED = "meeting_scheduled"


CONTEXT_DOMAINS: dict[str, tuple[str, ...]] = {
    "period": tuple(p.value for p in Period),
    "day_of_week": tuple(d.value for d in DayOfWeek),
    "day_class": tuple(c.value for c in DayClass),
    "calendar_status": tuple(s.value for s in CalendarStatus),
}


@dataclass(frozen=True)
class ContextAttributes:
    period: TimePeriod
    calendar_status: CalendarStatus = CalendarStatus.NO_MEETING
    extra: Mapping[str, str] = field(default_factory=dict, hash=False)

    def value(self, name: str) -> str:
        if name == "period":
            return self.period.period.value
        if name == "day_of_week":
            return self.period.day_of_week.value
        if name == "day_class":
            return self.period.day_class.value
        if name == "calendar_status":
            return self.calendar_status.value
        return self.extra[name]

    def as_attributes(self, names: Sequence[str]) -> dict[str, str]:
        return {n: self.value(n) for n in names}


@dataclass(frozen=True)
class Case:
    context: ContextAttributes
    wait: Duration
    censored: bool = False

    def __post_init__(self):
        if self.wait < 0:
            raise InvalidInput("negative wait")


class QueryKind(str, enum.Enum):
    TIME_UNTIL_RETURN = "time_until_return"
    TIME_UNTIL_LEAVE = "time_until_leave"
    TIME_UNTIL_DEVICE_ACCESS = "time_until_device_access"
    TIME_UNTIL_APP_ENGAGEMENT = "time_until_app_engagement"


class Landmark(str, enum.Enum):
    PRESENT_TO_ABSENT = "present_to_absent"
    ABSENT_TO_PRESENT = "absent_to_present"
    APP_FOCUS_END = "app_focus_end"
    DEVICE_LAST_SEEN = "device_last_seen"


LANDMARK_FOR_KIND = {
    QueryKind.TIME_UNTIL_RETURN: Landmark.PRESENT_TO_ABSENT,
    QueryKind.TIME_UNTIL_LEAVE: Landmark.ABSENT_TO_PRESENT,
    QueryKind.TIME_UNTIL_DEVICE_ACCESS: Landmark.DEVICE_LAST_SEEN,
    QueryKind.TIME_UNTIL_APP_ENGAGEMENT: Landmark.APP_FOCUS_END,
}


@dataclass(frozen=True)
class DeviceFilter:
    """Predicate over device profiles: every given field must match."""

    capability: str | None = None
    location: str | None = None

    def __post_init__(self):
        if self.capability is None and self.location is None:
            raise InvalidInput("device filter needs a capability or a location")

    def __call__(self, profile: DeviceProfile) -> bool:
        if self.capability is not None and self.capability not in profile.capabilities:
            return False
        return self.location is None or profile.location == self.location


@dataclass(frozen=True)
class QuerySpec:
    kind: QueryKind
    at: Timestamp
    user: str
    min_stay: Duration | None = None
    min_absence: Duration | None = None
    device_filter: DeviceFilter | None = None
    app: str | None = None
    # Hypothetical elapsed time since the landmark; overrides the timeline.
    away: Duration | None = None

    def __post_init__(self):
        kind = QueryKind(self.kind)
        object.__setattr__(self, "kind", kind)
        if self.min_stay is not None and kind is not QueryKind.TIME_UNTIL_RETURN:
            raise InvalidInput("min_stay applies only to time_until_return")
        if self.min_absence is not None and kind is not QueryKind.TIME_UNTIL_LEAVE:
            raise InvalidInput("min_absence applies only to time_until_leave")
        if (self.device_filter is not None) != (kind is QueryKind.TIME_UNTIL_DEVICE_ACCESS):
            raise InvalidInput("a device filter is required for, and only for, time_until_device_access")
        if (self.app is not None) != (kind is QueryKind.TIME_UNTIL_APP_ENGAGEMENT):
            raise InvalidInput("app is required for, and only for, time_until_app_engagement")
        for name in ("min_stay", "min_absence", "away"):
            v = getattr(self, name)
            if v is not None and v < 0:
                raise InvalidInput(f"{name} must be nonnegative")

    @property
    def landmark(self) -> Landmark:
        return LANDMARK_FOR_KIND[self.kind]


DEFAULT_LADDER: tuple[tuple[str, ...], ...] = (
    ("period", "day_of_week", "calendar_status"),
    ("period", "day_class", "calendar_status"),
    ("period", "day_class"),
    ("day_class",),
    (),
)


@dataclass(frozen=True)
class BackoffPolicy:
    ladder: tuple[tuple[str, ...], ...] = DEFAULT_LADDER
    n_min: int = 25

    def __post_init__(self):
        if not self.ladder:
            raise InvalidInput("backoff ladder is empty")
        if tuple(self.ladder[-1]):
            raise InvalidInput("backoff ladder must end with the empty attribute set")
        if self.n_min < 1:
            raise InvalidInput("n_min must be at least 1")


# ---------------------------------------------------------------------------


def _transitions(timeline: Sequence[PresenceSegment], landmark: Landmark) -> list[Timestamp]:
    into = State.PRESENT if landmark is Landmark.ABSENT_TO_PRESENT else State.ABSENT
    return [
        timeline[i].start
        for i in range(1, len(timeline))
        if timeline[i].state is into and timeline[i - 1].state is not into
    ]


def proximal_context(timeline: Sequence[PresenceSegment], at: Timestamp, landmark: Landmark) -> Duration:
    """Seconds since the most recent ``landmark`` transition at or before ``at``.

    ``app_focus_end`` and ``device_last_seen`` are the present-to-absent
    transitions of an app-focus or device-filtered timeline; the caller
    passes that timeline.
    """
    landmark = Landmark(landmark)
    if not timeline or not timeline[0].start <= at < timeline[-1].end:
        raise InsufficientHistory(f"timeline does not cover {at}")
    times = _transitions(timeline, landmark)
    i = bisect.bisect_right(times, at)
    if i == 0:
        raise InsufficientHistory(f"no {landmark.value} transition before {at}")
    return at - times[i - 1]


def query_timeline(
    spec: QuerySpec,
    events: Sequence[RawEvent],
    devices: Mapping[str, DeviceProfile],
    idle_threshold: Duration,
    horizon: tuple[Timestamp, Timestamp],
    base: Sequence[PresenceSegment] | None = None,
) -> list[PresenceSegment]:
    """The timeline whose transitions the query is about."""
    if spec.kind is QueryKind.TIME_UNTIL_DEVICE_ACCESS:
        return coalesce_timeline(filter_by_device(events, dict(devices), spec.device_filter), idle_threshold, horizon)
    if spec.kind is QueryKind.TIME_UNTIL_APP_ENGAGEMENT:
        return app_focus_timeline(events, spec.app, horizon)
    if base is not None:
        return list(base)
    return coalesce_timeline(events, idle_threshold, horizon)


class _Calendar:
    """Point-in-meeting lookup over a calendar."""

    def __init__(self, calendar: Sequence[AppointmentRecord], annotations: Mapping[str, AnnotationRecord]):
        # Meetings the user said they skipped do not make the calendar busy.
        skipped = {k for k, a in annotations.items() if a.attended is False}
        self.appts = sorted((a for a in calendar if a.id not in skipped), key=lambda a: a.start)
        self.starts = [a.start for a in self.appts]
        self.longest = max((a.end - a.start for a in self.appts), default=0)

    def active(self, ts: Timestamp) -> list[AppointmentRecord]:
        hi = bisect.bisect_right(self.starts, ts)
        lo = bisect.bisect_left(self.starts, ts - self.longest)
        return [a for a in self.appts[lo:hi] if a.start <= ts < a.end]

    def status(self, ts: Timestamp) -> CalendarStatus:
        return CalendarStatus.MEETING_SCHEDULED if self.active(ts) else CalendarStatus.NO_MEETING


def _next_qualifying(timeline: Sequence[PresenceSegment], state: State, min_len: Duration) -> list[int | None]:
    """For each index i, the first j > i whose segment resolves the wait.

    A segment resolves if it has ``state`` and lasts ``min_len``; the final
    segment, cut by the horizon, resolves only if already long enough.
    Returns None where no later segment resolves (the case is censored).
    """
    out: list[int | None] = [None] * len(timeline)
    nxt: int | None = None
    for j in range(len(timeline) - 1, -1, -1):
        out[j] = nxt
        s = timeline[j]
        if s.state is state and s.length >= min_len:
            nxt = j
    return out


def extract_cases(
    timeline: Sequence[PresenceSegment],
    calendar: Sequence[AppointmentRecord],
    annotations: Mapping[str, AnnotationRecord],
    spec: QuerySpec,
    taxonomy: Taxonomy,
) -> list[Case]:
    """One case per landmark transition on ``timeline``.

    ``timeline`` is the query's own timeline (see :func:`query_timeline`).
    Return-style kinds wait from each absence onset until the next presence of
    at least ``min_stay``; ``time_until_leave`` waits from each presence onset
    until the next absence of at least ``min_absence``. Context is sampled at
    the onset. Transitions never resolved before the log ends become censored
    cases carrying the observed span.
    """
    if spec.kind is QueryKind.TIME_UNTIL_LEAVE:
        onset_state, target_state, min_len = State.PRESENT, State.ABSENT, spec.min_absence or 0
    else:
        onset_state, target_state, min_len = State.ABSENT, State.PRESENT, spec.min_stay or 0
    if not timeline:
        return []
    horizon_end = timeline[-1].end
    cal = _Calendar(calendar, annotations)
    nxt = _next_qualifying(timeline, target_state, min_len)

    cases = []
    for i in range(1, len(timeline)):
        seg = timeline[i]
        if seg.state is not onset_state or timeline[i - 1].state is onset_state:
            continue
        onset = seg.start
        ctx = ContextAttributes(classify_time_period(onset, taxonomy), cal.status(onset))
        j = nxt[i]
        if j is None:
            cases.append(Case(ctx, horizon_end - onset, censored=True))
        else:
            cases.append(Case(ctx, timeline[j].start - onset))
    return cases


def matches(case: Case, context: ContextAttributes, attrs: Sequence[str]) -> bool:
    return all(case.context.value(a) == context.value(a) for a in attrs)


def build_reference_class(
    all_cases: Sequence[Case],
    context: ContextAttributes,
    policy: BackoffPolicy = BackoffPolicy(),
) -> tuple[list[Case], int]:
    """Most specific ladder level with at least ``n_min`` uncensored matches.

    Falls back to the broadest level when none qualifies.
    """
    if not all_cases:
        raise NoData("no cases to build a reference class from")
    subset: list[Case] = []
    for level, attrs in enumerate(policy.ladder):
        subset = [c for c in all_cases if matches(c, context, attrs)]
        if sum(not c.censored for c in subset) >= policy.n_min:
            return subset, level
    if not subset:
        raise NoData("no cases at any backoff level")
    return subset, len(policy.ladder) - 1

