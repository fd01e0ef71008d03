"""Synthetic users: event logs, calendars and ground truth from a parametric model.

A simulated workday runs from a drawn arrival to a drawn departure. While at
the desk the user takes breaks at a Poisson rate that depends on the time
period, with lognormal durations, and leaves for the meetings they attend.
Desktop activity is logged every minute while present and once more at the
moment the user steps away, so a break of length ``D`` shows up on the
coalesced timeline as an absence of ``D - idle_threshold`` (and not at all
when ``D <= idle_threshold``).

:func:`monte_carlo_oracle` samples continuations of a return scenario from
the same latent process, without going through events, timelines or cases.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Mapping, Sequence

from .cases import QueryKind, QuerySpec
from .core import (
    SECONDS_PER_DAY,
    DayClass,
    DeviceProfile,
    EventKind,
    Period,
    RawEvent,
    Taxonomy,
    DEFAULT_TAXONOMY,
    day_of_week,
)
from .distributions import DurationCdf, empirical_cdf
from .errors import InvalidInput
from .meetings import extract_features, INTERRUPT_CLASSES
from .rng import Rng
from .store import (
    AnnotationRecord,
    AnnotationSource,
    AppointmentRecord,
    BusyFlag,
    DirectoryStub,
    Interruptability,
    ResponseStatus,
    Store,
    UserRole,
)

# 2024-01-01T00:00:00Z, a Monday
DEFAULT_EPOCH = 1_704_067_200
IDLE_THRESHOLD = 300


@dataclass(frozen=True)
class TruncNormal:
    """Normal(mean, sd) restricted to [lo, hi]; units are hours of the day."""

    mean: float
    sd: float
    lo: float
    hi: float

    def __post_init__(self):
        if self.sd < 0 or not self.lo <= self.mean <= self.hi:
            raise InvalidInput(f"improper truncated normal {self}")

    def sample(self, rng: Rng, lo: float | None = None) -> float:
        return rng.truncated_normal(self.mean, self.sd, self.lo if lo is None else max(lo, self.lo), self.hi)


@dataclass(frozen=True)
class LogNormal:
    """Lognormal duration given by its median (minutes) and log-scale sigma."""

    median_min: float
    sigma: float

    def __post_init__(self):
        if self.median_min <= 0 or self.sigma < 0:
            raise InvalidInput(f"improper lognormal {self}")

    def sample(self, rng: Rng, lower: int = 0) -> int | None:
        """Whole seconds, strictly above ``lower``; None if that is impossible."""
        mu = math.log(self.median_min * 60)
        if self.sigma == 0:
            d = round(math.exp(mu))
            return d if d > lower else None
        d = round(rng.lognormal(mu, self.sigma, lower + 0.5 if lower > 0 else 0.0))
        return max(d, lower + 1, 1)


@dataclass(frozen=True)
class MeetingTemplate:
    name: str
    subject: str
    organizer: str  # self, manager, manager_of_manager, report, peer, other, or alias:<id>
    daily_prob: float
    attendees: tuple[int, int] = (2, 2)
    durations_min: tuple[int, ...] = (60,)
    role_weights: Mapping[str, float] = field(default_factory=lambda: {"required": 1.0})
    response_weights: Mapping[str, float] = field(default_factory=lambda: {"responded_yes": 1.0})
    recurrent: bool = False
    busy_prob: float = 1.0
    location: str = ""
    invite_reports: bool = False
    hours: tuple[float, float] = (9.0, 17.0)


@dataclass(frozen=True)
class LinearRule:
    """Per-class scores ``intercept + sum of weights['attr=value']``; softmax over classes."""

    classes: tuple[str, ...]
    intercepts: Mapping[str, float]
    weights: Mapping[str, Mapping[str, float]]

    def probabilities(self, attrs: Mapping[str, str]) -> tuple[float, ...]:
        scores = []
        for c in self.classes:
            w = self.weights.get(c, {})
            s = self.intercepts.get(c, 0.0) + sum(w.get(f"{k}={v}", 0.0) for k, v in attrs.items())
            if not math.isfinite(s):
                raise InvalidInput("rule scores must be finite")
            scores.append(s)
        top = max(scores)
        ex = [math.exp(s - top) for s in scores]
        z = sum(ex)
        return tuple(e / z for e in ex)


def _default_attendance_rule() -> LinearRule:
    # Two classes with the first pinned at 0: a logistic model for attending.
    return LinearRule(
        ("not_attended", "attended"),
        {"attended": 2.0},
        {
            "attended": {
                "organized_by_alias=true": -6.0,
                "response_status=responded_yes": 3.0,
                "response_status=no_response": -5.0,
                "response_status=responded_tentative": -2.5,
                "role=optional": -3.0,
                "organizer_relation=manager": 5.0,
                "organizer_relation=manager_of_manager": 4.0,
                "subject_token_class=interview": 5.0,
                "busy_flag=false": -2.5,
            }
        },
    )


def _default_interrupt_rule() -> LinearRule:
    return LinearRule(
        INTERRUPT_CLASSES,
        {"low": 0.0, "medium": 2.5, "high": 0.0},
        {
            "low": {
                "organizer_relation=manager": 5.0,
                "organizer_relation=manager_of_manager": 6.0,
                "subject_token_class=interview": 8.0,
            },
            "high": {
                "organized_by_alias=true": 6.0,
                "role=optional": 2.5,
                "subject_token_class=talk": 1.5,
            },
        },
    )


def _default_templates() -> tuple[MeetingTemplate, ...]:
    mostly_yes = {"responded_yes": 0.75, "responded_tentative": 0.1, "no_response": 0.15}
    mixed = {"responded_yes": 0.45, "responded_tentative": 0.2, "no_response": 0.35}
    return (
        MeetingTemplate("one_on_one", "1:1 catch-up", "manager", 0.3, (2, 2), (30,), recurrent=True,
                        response_weights=mostly_yes, location="manager office"),
        MeetingTemplate("team_sync", "Team sync", "self", 0.7, (4, 8), (30, 60), {"organizer": 1.0},
                        {"no_response_requested": 1.0}, recurrent=True, location="room 2", invite_reports=True),
        MeetingTemplate("all_hands", "Org all hands", "alias:dev-all", 0.1, (40, 80), (60,),
                        {"required": 0.5, "optional": 0.5}, mixed, busy_prob=0.6, location="auditorium"),
        MeetingTemplate("design_review", "Design review", "peer", 0.45, (4, 8), (60, 90),
                        {"required": 0.7, "optional": 0.3}, mixed, busy_prob=0.8, location="room 5"),
        MeetingTemplate("interview", "Interview loop", "other", 0.2, (2, 3), (60,), response_weights=mostly_yes),
        MeetingTemplate("seminar", "Research seminar talk", "alias:talks", 0.35, (20, 100), (60,),
                        {"optional": 1.0}, mixed, busy_prob=0.3, location="lecture hall"),
        MeetingTemplate("director_review", "Quarterly review", "manager_of_manager", 0.12, (6, 10), (60, 90),
                        response_weights=mostly_yes, location="board room"),
        MeetingTemplate("project_sync", "Project sync", "peer", 0.45, (3, 5), (30,), recurrent=True,
                        response_weights=mixed, busy_prob=0.9),
    )


DEFAULT_DEVICES = (
    DeviceProfile("desktop", "office", frozenset({"desktop", "keyboard"})),
    DeviceProfile("laptop", "mobile", frozenset({"laptop", "portable", "videoconference"})),
    DeviceProfile("phone", "mobile", frozenset({"phone"})),
)

DEFAULT_DIRECTORY = DirectoryStub(
    managers={
        "u1": "mgr",
        "mgr": "dir",
        "p1": "mgr",
        "p2": "mgr",
        "r1": "u1",
        "r2": "u1",
        "x1": "xmgr",
        "x2": "xmgr",
    },
    aliases=frozenset({"dev-all", "talks"}),
)


@dataclass(frozen=True)
class UserProfile:
    name: str = "default"
    user: str = "u1"
    seed: int = 1
    epoch: int = DEFAULT_EPOCH
    arrival: Mapping[str, TruncNormal] = field(
        default_factory=lambda: {"weekday": TruncNormal(8.5, 0.5, 7.0, 10.0), "weekend": TruncNormal(10.5, 1.0, 8.0, 13.0)}
    )
    departure: Mapping[str, TruncNormal] = field(
        default_factory=lambda: {"weekday": TruncNormal(17.75, 0.75, 16.0, 20.0), "weekend": TruncNormal(14.0, 1.0, 12.0, 17.0)}
    )
    work_prob: Mapping[str, float] = field(default_factory=lambda: {"weekday": 1.0, "weekend": 0.1})
    break_rate: Mapping[str, float] = field(
        default_factory=lambda: {"morning": 1.2, "lunchtime": 1.0, "afternoon": 1.2, "evening": 1.0, "night": 0.5}
    )
    break_duration: Mapping[str, LogNormal] = field(
        default_factory=lambda: {
            "morning": LogNormal(7.0, 0.9),
            "lunchtime": LogNormal(30.0, 0.6),
            "afternoon": LogNormal(7.0, 0.9),
            "evening": LogNormal(10.0, 0.8),
            "night": LogNormal(10.0, 0.8),
        }
    )
    templates: tuple[MeetingTemplate, ...] = field(default_factory=_default_templates)
    post_meeting_delay: LogNormal = LogNormal(4.0, 0.7)
    laptop_in_meeting: float = 0.1
    evening_laptop: float = 0.25
    mail_prob: float = 0.6
    heartbeat_interval: int = 1800
    attendance_rule: LinearRule = field(default_factory=_default_attendance_rule)
    interrupt_rule: LinearRule = field(default_factory=_default_interrupt_rule)
    devices: tuple[DeviceProfile, ...] = DEFAULT_DEVICES
    directory: DirectoryStub = DEFAULT_DIRECTORY

    def __post_init__(self):
        for dc in ("weekday", "weekend"):
            if not 0 <= self.work_prob.get(dc, 0) <= 1:
                raise InvalidInput("work probabilities must lie in [0, 1]")
        if any(r < 0 for r in self.break_rate.values()):
            raise InvalidInput("break rates must be nonnegative")
        missing = {p.value for p in Period} - set(self.break_rate) | {p.value for p in Period} - set(self.break_duration)
        if missing:
            raise InvalidInput(f"profile lacks break parameters for {sorted(missing)}")

    @property
    def has_meetings(self) -> bool:
        return any(t.daily_prob > 0 for t in self.templates)


# ---------------------------------------------------------------------------
# Latent process, shared by the generator and the oracle


def _day_start(ts: int) -> int:
    return ts - ts % SECONDS_PER_DAY


def day_plan(profile: UserProfile, rng: Rng, day_start: int, not_before: int | None = None) -> tuple[int, int] | None:
    """(arrival, departure) for the day, or None on a day off.

    With ``not_before`` the departure is conditioned to fall after it.
    """
    dc = day_of_week(day_start).day_class.value
    if not_before is None and not rng.bernoulli(profile.work_prob[dc]):
        return None
    arrival = day_start + round(profile.arrival[dc].sample(rng) * 3600)
    lo = None if not_before is None else (not_before - day_start) / 3600
    if lo is not None and lo >= profile.departure[dc].hi:
        raise InvalidInput("no departure can follow the given time")
    while True:
        departure = day_start + round(profile.departure[dc].sample(rng, lo) * 3600)
        if not_before is None or departure > not_before:
            break
    return arrival, max(departure, arrival + 60)


def next_break(profile: UserProfile, rng: Rng, t: int, end: int, taxonomy: Taxonomy = DEFAULT_TAXONOMY) -> int | None:
    """Start of the next break in ``[t, end)``, by thinning the period-dependent rate."""
    rmax = max(profile.break_rate.values()) / 3600
    if rmax <= 0:
        return None
    x = float(t)
    while True:
        x += rng.exponential(rmax)
        if x >= end:
            return None
        rate = profile.break_rate[taxonomy.period_at(int(x) % SECONDS_PER_DAY).value] / 3600
        if rng.random() * rmax < rate:
            return int(x)


def break_duration(profile: UserProfile, rng: Rng, start: int, lower: int = 0, taxonomy: Taxonomy = DEFAULT_TAXONOMY) -> int | None:
    period = taxonomy.period_at(start % SECONDS_PER_DAY).value
    return profile.break_duration[period].sample(rng, lower)


def desk_stretches(
    profile: UserProfile,
    rng: Rng,
    arrival: int,
    departure: int,
    meetings: Sequence[tuple[int, int]] = (),
) -> list[tuple[int, int]]:
    """Closed intervals ``[s, e]`` at the desk; ``meetings`` are attended (start, back_at) pairs."""
    ms = sorted(meetings)
    mi = 0
    t = arrival
    out: list[tuple[int, int]] = []
    while t < departure:
        while mi < len(ms) and ms[mi][1] <= t:
            mi += 1
        if mi < len(ms) and ms[mi][0] <= t:
            t = ms[mi][1]
            mi += 1
            continue
        b = next_break(profile, rng, t, departure)
        if mi < len(ms) and ms[mi][0] < departure and (b is None or ms[mi][0] <= b):
            out.append((t, ms[mi][0]))
            t = ms[mi][1]
            mi += 1
            continue
        if b is None:
            out.append((t, departure))
            break
        out.append((t, b))
        t = b + break_duration(profile, rng, b)
    return out


# ---------------------------------------------------------------------------
# Calendar


def _organizer(tpl: MeetingTemplate, user: str, directory: DirectoryStub, rng: Rng) -> str:
    mgr = directory.manager_of(user) or "mgr"
    if tpl.organizer == "self":
        return user
    if tpl.organizer == "manager":
        return mgr
    if tpl.organizer == "manager_of_manager":
        return directory.manager_of(mgr) or "dir"
    if tpl.organizer.startswith("alias:"):
        return tpl.organizer.split(":", 1)[1]
    pool = {
        "report": [p for p, m in directory.managers.items() if m == user],
        "peer": [p for p, m in directory.managers.items() if m == mgr and p != user],
        "other": [p for p, m in directory.managers.items() if m not in (user, mgr) and p != mgr],
    }.get(tpl.organizer)
    if not pool:
        raise InvalidInput(f"template {tpl.name}: no candidate organizer for {tpl.organizer!r}")
    return rng.choice(sorted(pool))


def _weighted(rng: Rng, weights: Mapping[str, float]) -> str:
    keys = sorted(weights)
    return keys[rng.categorical([weights[k] for k in keys])]


def day_calendar(profile: UserProfile, day: int) -> list[AppointmentRecord]:
    """Meetings placed on half-hour slots without overlap, weekdays only."""
    day_start = profile.epoch + day * SECONDS_PER_DAY
    if day_of_week(day_start).day_class is not DayClass.WEEKDAY:
        return []
    rng = Rng(profile.seed).fork("calendar", day)
    taken: list[tuple[int, int]] = []
    out = []
    for tpl in profile.templates:
        if not rng.bernoulli(tpl.daily_prob):
            continue
        dur = rng.choice(tpl.durations_min) * 60
        slots = int((tpl.hours[1] - tpl.hours[0]) * 2) - dur // 1800 + 1
        placed = None
        for _ in range(8):
            if slots <= 0:
                break
            start = day_start + int(tpl.hours[0] * 3600) + rng.randbelow(slots) * 1800
            if all(start >= e or start + dur <= s for s, e in taken):
                placed = start
                break
        if placed is None:
            continue
        taken.append((placed, placed + dur))
        organizer = _organizer(tpl, profile.user, profile.directory, rng)
        n = tpl.attendees[0] + rng.randbelow(tpl.attendees[1] - tpl.attendees[0] + 1)
        attendees = [profile.user] + ([organizer] if organizer != profile.user else [])
        if tpl.invite_reports:
            attendees += sorted(p for p, m in profile.directory.managers.items() if m == profile.user)
        attendees += [f"guest{i}" for i in range(max(0, n - len(attendees)))]
        role = UserRole.ORGANIZER if organizer == profile.user else UserRole(_weighted(rng, tpl.role_weights))
        out.append(
            AppointmentRecord(
                id=f"{profile.user}-d{day:04d}-{tpl.name}",
                start=placed,
                end=placed + dur,
                subject=tpl.subject,
                location_field=tpl.location,
                organizer=organizer,
                attendees=tuple(attendees[: max(n, 2)]),
                user_role=role,
                response_status=ResponseStatus(_weighted(rng, tpl.response_weights)),
                recurrent=tpl.recurrent,
                busy_flag=BusyFlag.BUSY if rng.bernoulli(tpl.busy_prob) else BusyFlag.FREE,
                organized_by_alias=organizer in profile.directory.aliases,
            )
        )
    out.sort(key=lambda a: (a.start, a.id))
    return out


@dataclass(frozen=True)
class MeetingTruth:
    attended: bool
    interruptability: Interruptability
    p_attend: float
    p_interrupt: tuple[float, float, float]


@dataclass
class GroundTruth:
    meetings: dict[str, MeetingTruth]
    profile: UserProfile
    days: int

    def annotations(self, attendance: bool = True, interruptability: bool = True) -> list[AnnotationRecord]:
        out = []
        for mid, t in self.meetings.items():
            out.append(
                AnnotationRecord(
                    mid,
                    attended=t.attended if attendance else None,
                    interruptability=t.interruptability if interruptability else None,
                    source=AnnotationSource.MANUAL,
                )
            )
        return out


def meeting_truth(profile: UserProfile, appt: AppointmentRecord, taxonomy: Taxonomy = DEFAULT_TAXONOMY) -> MeetingTruth:
    attrs = extract_features(appt, profile.directory, profile.user, taxonomy).as_attributes()
    p_att = profile.attendance_rule.probabilities(attrs)[1]
    p_int = profile.interrupt_rule.probabilities(attrs)
    rng = Rng(profile.seed).fork("truth", appt.id)
    return MeetingTruth(
        rng.bernoulli(p_att),
        Interruptability(INTERRUPT_CLASSES[rng.categorical(p_int)]),
        p_att,
        (p_int[0], p_int[1], p_int[2]),
    )


def generate_calendar(profile: UserProfile, days: int) -> tuple[list[AppointmentRecord], GroundTruth]:
    appts = [a for d in range(days) for a in day_calendar(profile, d)]
    truth = GroundTruth({a.id: meeting_truth(profile, a) for a in appts}, profile, days)
    return appts, truth


def bayes_accuracy(truth: GroundTruth, appts: Sequence[AppointmentRecord], target: str = "attendance") -> float:
    """Expected accuracy of the classifier that knows the planted rule."""
    if not appts:
        raise InvalidInput("no appointments")
    total = 0.0
    for a in appts:
        t = truth.meetings[a.id]
        total += max(t.p_attend, 1 - t.p_attend) if target == "attendance" else max(t.p_interrupt)
    return total / len(appts)


# ---------------------------------------------------------------------------
# Event log


def _activity(user: str, device: str, s: int, e: int) -> list[RawEvent]:
    out = [RawEvent(t, user, device, EventKind.ACTIVITY) for t in range(s, e, 60)]
    out.append(RawEvent(e, user, device, EventKind.ACTIVITY))
    return out


def generate_user(profile: UserProfile, days: int) -> tuple[list[RawEvent], list[AppointmentRecord], GroundTruth]:
    """Events (sorted), calendar and ground truth for ``days`` consecutive days."""
    if days < 1:
        raise InvalidInput("days must be at least 1")
    appts, truth = generate_calendar(profile, days)
    by_day: dict[int, list[AppointmentRecord]] = {}
    for a in appts:
        by_day.setdefault((a.start - profile.epoch) // SECONDS_PER_DAY, []).append(a)

    user = profile.user
    events: list[RawEvent] = []
    for day in range(days):
        day_start = profile.epoch + day * SECONDS_PER_DAY
        rng = Rng(profile.seed).fork("day", day)
        todays: list[RawEvent] = []
        plan = day_plan(profile, rng, day_start)
        if plan is not None:
            arrival, departure = plan
            attended = []
            for a in by_day.get(day, ()):
                if truth.meetings[a.id].attended:
                    back = a.end + profile.post_meeting_delay.sample(rng)
                    attended.append((a.start, back))
                    if rng.bernoulli(profile.laptop_in_meeting):
                        todays += _activity(user, "laptop", a.start, a.end)
            for s, e in desk_stretches(profile, rng, arrival, departure, attended):
                todays += _activity(user, "desktop", s, e)
                if rng.bernoulli(profile.mail_prob):
                    stop = min(e, s + 60 + rng.randbelow(540))
                    if stop > s:
                        todays.append(RawEvent(s, user, "desktop", EventKind.APP_FOCUS_BEGIN, "mail"))
                        todays.append(RawEvent(stop, user, "desktop", EventKind.APP_FOCUS_END, "mail"))
        if rng.bernoulli(profile.evening_laptop):
            s = day_start + 20 * 3600 + rng.randbelow(3600)
            todays += _activity(user, "laptop", s, s + 1200 + rng.randbelow(1200))
        if profile.heartbeat_interval > 0:
            todays += [
                RawEvent(t, user, "phone", EventKind.HEARTBEAT)
                for t in range(day_start, day_start + SECONDS_PER_DAY, profile.heartbeat_interval)
            ]
        todays.sort(key=lambda e: (e.ts, e.device, e.kind.value))
        events += todays
    return events, appts, truth


def write_store(
    store: Store,
    profile: UserProfile,
    events: Sequence[RawEvent],
    appts: Sequence[AppointmentRecord],
    truth: GroundTruth,
    annotate: bool = True,
) -> None:
    store.append_events(events)
    store.append_appointments(profile.user, appts)
    if annotate:
        store.append_annotations(profile.user, truth.annotations())
    store.save_devices(profile.devices)
    store.save_directory(profile.directory)
    (store.root / "sim_profile.json").write_text(json.dumps(profile_to_dict(profile), indent=2, sort_keys=True))


# ---------------------------------------------------------------------------
# Oracle


def monte_carlo_oracle(
    profile: UserProfile,
    query: QuerySpec,
    n_samples: int = 100_000,
    seed: int = 0,
    idle_threshold: int = IDLE_THRESHOLD,
) -> DurationCdf:
    """Empirical CDF of the remaining wait in a return scenario, by direct simulation.

    The scenario is a visible absence that began ``query.away`` seconds
    before ``query.at`` on a workday; the answer is the time from ``query.at``
    until a desk stretch lasting ``query.min_stay`` (on the coalesced scale)
    begins. Only meeting-free profiles without off-desk devices are
    supported, since those are the ones whose timeline is the desk alone.
    Returns the empty CDF when no continuation is possible.
    """
    if n_samples < 1000:
        raise InvalidInput("n_samples must be at least 1000")
    if query.kind is not QueryKind.TIME_UNTIL_RETURN or query.away is None:
        raise InvalidInput("the oracle answers time_until_return scenarios with a given time away")
    if profile.has_meetings or profile.laptop_in_meeting or profile.evening_laptop:
        raise InvalidInput("the oracle needs a profile whose only presence is at the desk")
    theta = idle_threshold
    away = query.away
    onset = query.at - away
    b0 = onset - theta
    m = query.min_stay or 0
    rng = Rng(seed).fork("oracle", query.at, away, m)

    if break_duration(profile, Rng(0), b0, theta + away) is None:
        return DurationCdf((), ())

    def next_workday(t: int, r: Rng) -> tuple[int, int]:
        day = _day_start(t) + SECONDS_PER_DAY
        while True:
            plan = day_plan(profile, r, day)
            if plan is not None:
                return plan
            day += SECONDS_PER_DAY

    waits = []
    for _ in range(n_samples):
        r = rng
        _, dep = day_plan(profile, r, _day_start(b0), not_before=b0)
        back = b0 + break_duration(profile, r, b0, theta + away)
        while True:
            if back >= dep:
                back, dep = next_workday(back, r)
            # desk stretch from `back`; invisible breaks (<= theta) do not end it
            t = back
            while True:
                b = next_break(profile, r, t, dep)
                if b is None:
                    seg_end, resume = dep + theta, None
                    break
                d = break_duration(profile, r, b)
                if d > theta:
                    seg_end, resume = b + theta, b + d
                    break
                t = b + d
            if seg_end - back >= m:
                waits.append(back - query.at)
                break
            if resume is None:
                back, dep = next_workday(dep, r)
            else:
                back = resume
    return empirical_cdf(waits)


# ---------------------------------------------------------------------------
# Stock profiles


def default_profile(seed: int = 1) -> UserProfile:
    return UserProfile(seed=seed)


def lunch_absentee_profile(seed: int = 2) -> UserProfile:
    """Short desk breaks in the morning, long lunches away."""
    base = UserProfile()
    return replace(
        base,
        name="lunch_absentee",
        seed=seed,
        break_rate={**base.break_rate, "morning": 1.5, "lunchtime": 1.5},
        break_duration={**base.break_duration, "morning": LogNormal(6.0, 0.6), "lunchtime": LogNormal(55.0, 0.4)},
    )


def calibration_profiles() -> list[UserProfile]:
    """Five meeting-free profiles that differ in rhythm and break behavior."""
    base = UserProfile(templates=(), laptop_in_meeting=0.0, evening_laptop=0.0, heartbeat_interval=0)
    wd = {"weekday": 1.0, "weekend": 0.0}
    return [
        replace(base, name="steady", seed=11, work_prob=wd,
                break_rate={**base.break_rate, "morning": 2.0, "afternoon": 2.0}),
        replace(base, name="long_breaks", seed=12, work_prob=wd,
                break_rate={**base.break_rate, "morning": 2.0, "afternoon": 1.8},
                break_duration={**base.break_duration, "morning": LogNormal(15.0, 0.8), "afternoon": LogNormal(20.0, 0.7)}),
        replace(base, name="fidgety", seed=13, work_prob=wd,
                break_rate={p: 3.0 for p in base.break_rate},
                break_duration={p: LogNormal(6.0, 0.5) for p in base.break_duration}),
        replace(base, name="early_bird", seed=14, work_prob=wd,
                arrival={**base.arrival, "weekday": TruncNormal(7.0, 0.4, 6.0, 8.5)},
                departure={**base.departure, "weekday": TruncNormal(15.5, 0.5, 14.5, 17.0)},
                break_rate={**base.break_rate, "morning": 2.5, "afternoon": 2.0}),
        replace(base, name="weekend_worker", seed=15, work_prob={"weekday": 1.0, "weekend": 0.6},
                break_rate={**base.break_rate, "morning": 2.0, "afternoon": 2.2},
                break_duration={**base.break_duration, "afternoon": LogNormal(9.0, 1.0)}),
    ]


STOCK_PROFILES = {"default": default_profile, "lunch_absentee": lunch_absentee_profile}


# ---------------------------------------------------------------------------
# Profile files


def profile_to_dict(profile: UserProfile) -> dict:
    d = asdict(profile)
    d["devices"] = [p.to_record() for p in profile.devices]
    d["directory"] = {"managers": dict(profile.directory.managers), "aliases": sorted(profile.directory.aliases)}
    return json.loads(json.dumps(d))


def profile_from_dict(d: Mapping) -> UserProfile:
    d = dict(d)
    kw: dict = {k: d[k] for k in ("name", "user", "seed", "epoch", "laptop_in_meeting", "evening_laptop",
                                  "mail_prob", "heartbeat_interval") if k in d}
    if "arrival" in d:
        kw["arrival"] = {k: TruncNormal(**v) for k, v in d["arrival"].items()}
    if "departure" in d:
        kw["departure"] = {k: TruncNormal(**v) for k, v in d["departure"].items()}
    if "work_prob" in d:
        kw["work_prob"] = dict(d["work_prob"])
    if "break_rate" in d:
        kw["break_rate"] = dict(d["break_rate"])
    if "break_duration" in d:
        kw["break_duration"] = {k: LogNormal(**v) for k, v in d["break_duration"].items()}
    if "post_meeting_delay" in d:
        kw["post_meeting_delay"] = LogNormal(**d["post_meeting_delay"])
    if "templates" in d:
        kw["templates"] = tuple(
            MeetingTemplate(**{**t, "attendees": tuple(t["attendees"]), "durations_min": tuple(t["durations_min"]),
                               "hours": tuple(t["hours"])})
            for t in d["templates"]
        )
    for key in ("attendance_rule", "interrupt_rule"):
        if key in d:
            r = d[key]
            kw[key] = LinearRule(tuple(r["classes"]), dict(r["intercepts"]), {k: dict(v) for k, v in r["weights"].items()})
    if "devices" in d:
        kw["devices"] = tuple(DeviceProfile.from_record(r) for r in d["devices"])
    if "directory" in d:
        kw["directory"] = DirectoryStub(dict(d["directory"]["managers"]), frozenset(d["directory"]["aliases"]))
    return UserProfile(**kw)


def load_profile(path_or_name: str) -> UserProfile:
    if path_or_name in STOCK_PROFILES:
        return STOCK_PROFILES[path_or_name]()
    return profile_from_dict(json.loads(Path(path_or_name).read_text(encoding="utf-8")))
