"""Coalescing raw multi-device events into presence timelines."""

from __future__ import annotations

from typing import Callable, Iterable, Sequence

from .core import (
    PRESENCE_KINDS,
    DeviceProfile,
    Duration,
    EventKind,
    PresenceSegment,
    RawEvent,
    State,
    Timestamp,
)
from .errors import InvalidInput, OutOfOrder

DEFAULT_IDLE_THRESHOLD: Duration = 300


def _check_order(events: Sequence[RawEvent], horizon: tuple[Timestamp, Timestamp]) -> None:
    lo, hi = horizon
    if lo >= hi:
        raise InvalidInput(f"empty horizon [{lo}, {hi})")
    prev = None
    for e in events:
        if prev is not None and e.ts < prev:
            raise OutOfOrder(f"event at {e.ts} follows event at {prev}")
        if not lo <= e.ts < hi:
            raise InvalidInput(f"event at {e.ts} outside horizon [{lo}, {hi})")
        prev = e.ts


def _tile(runs: Iterable[tuple[int, int, set[str]]], horizon: tuple[Timestamp, Timestamp]) -> list[PresenceSegment]:
    lo, hi = horizon
    out: list[PresenceSegment] = []
    cursor = lo
    for start, end, devices in runs:
        if start > cursor:
            out.append(PresenceSegment(cursor, start, State.ABSENT))
        out.append(PresenceSegment(start, end, State.PRESENT, frozenset(devices)))
        cursor = end
    if cursor < hi:
        out.append(PresenceSegment(cursor, hi, State.ABSENT))
    return out


def coalesce_timeline(
    events: Sequence[RawEvent],
    idle_threshold: Duration = DEFAULT_IDLE_THRESHOLD,
    log_horizon: tuple[Timestamp, Timestamp] | None = None,
) -> list[PresenceSegment]:
    """Merge one user's events from all devices into alternating segments.

    Each qualifying event keeps the user present until ``idle_threshold``
    seconds after it; overlapping or touching stretches merge. Heartbeats do
    not count. The result tiles ``log_horizon`` with no gaps.
    """
    if idle_threshold <= 0:
        raise InvalidInput("idle_threshold must be positive")
    if log_horizon is None:
        if not events:
            raise InvalidInput("log_horizon is required for an empty event list")
        log_horizon = (events[0].ts, events[-1].ts + idle_threshold)
    _check_order(events, log_horizon)
    hi = log_horizon[1]

    runs: list[list] = []
    for e in events:
        if e.kind not in PRESENCE_KINDS:
            continue
        end = min(e.ts + idle_threshold, hi)
        if runs and e.ts <= runs[-1][1]:
            run = runs[-1]
            if end > run[1]:
                run[1] = end
            run[2].add(e.device)
        else:
            runs.append([e.ts, end, {e.device}])
    return _tile(runs, log_horizon)


def app_focus_timeline(
    events: Sequence[RawEvent],
    app: str,
    log_horizon: tuple[Timestamp, Timestamp],
) -> list[PresenceSegment]:
    """Timeline whose "present" stretches are when ``app`` holds focus.

    A focus stretch opens at ``app_focus_begin`` and closes at the matching
    ``app_focus_end`` on the same device; one left open runs to the horizon.
    """
    _check_order(events, log_horizon)
    open_at: dict[str, Timestamp] = {}
    intervals: list[tuple[int, int, str]] = []
    for e in events:
        if e.app != app:
            continue
        if e.kind is EventKind.APP_FOCUS_BEGIN:
            open_at.setdefault(e.device, e.ts)
        elif e.kind is EventKind.APP_FOCUS_END and e.device in open_at:
            start = open_at.pop(e.device)
            if e.ts > start:
                intervals.append((start, e.ts, e.device))
    for device, start in open_at.items():
        intervals.append((start, log_horizon[1], device))
    intervals.sort()

    runs: list[list] = []
    for start, end, device in intervals:
        if runs and start <= runs[-1][1]:
            runs[-1][1] = max(runs[-1][1], end)
            runs[-1][2].add(device)
        else:
            runs.append([start, end, {device}])
    return _tile(runs, log_horizon)


def filter_by_device(
    events: Iterable[RawEvent],
    devices: dict[str, DeviceProfile],
    predicate: Callable[[DeviceProfile], bool],
) -> list[RawEvent]:
    """Events from devices whose profile satisfies ``predicate``.

    Devices missing from the profile set never match.
    """
    keep = {d for d, p in devices.items() if predicate(p)}
    return [e for e in events if e.device in keep]


def present_time(timeline: Iterable[PresenceSegment]) -> Duration:
    return sum(s.length for s in timeline if s.state is State.PRESENT)


def segment_at(timeline: Sequence[PresenceSegment], ts: Timestamp) -> int:
    """Index of the segment containing ``ts``; -1 if outside the timeline."""
    lo, hi = 0, len(timeline)
    while lo < hi:
        mid = (lo + hi) // 2
        if timeline[mid].end <= ts:
            lo = mid + 1
        else:
            hi = mid
    if lo < len(timeline) and timeline[lo].start <= ts:
        return lo
    return -1
