"""The forecasting pipeline over an immutable snapshot of stores and models."""

from __future__ import annotations

import bisect
import math
from dataclasses import dataclass, field
from types import MappingProxyType
from typing import Mapping, Sequence

from .cases import (
    CONTEXT_DOMAINS,
    Case,
    CalendarStatus,
    ContextAttributes,
    QueryKind,
    QuerySpec,
    build_reference_class,
    extract_cases,
    proximal_context,
    query_timeline,
)
from .config import EngineConfig
from .core import (
    DeviceProfile,
    PresenceSegment,
    RawEvent,
    State,
    Timestamp,
    classify_time_period,
)
from .distributions import (
    DurationCdf,
    MeetingTerm,
    cdf_from_leaf,
    condition_on_elapsed,
    empirical_cdf,
    expected_cost_of_interruption,
    integrate_meetings,
    point_mass,
    quantile,
    shift,
    truncate_scopes,
)
from .errors import InsufficientHistory, InvalidInput, ModelDegenerate, NoData, NotFound, NoSurvivingMass, QuantileUnattainable
from .learn import Attribute, Dataset, bin_duration, learn_tree, predict_distribution
from .meetings import INTERRUPT_CLASSES, MeetingModel, predict_attendance, predict_interruptability, train_model
from .store import AnnotationRecord, AppointmentRecord, DirectoryStub, Store
from .timeline import coalesce_timeline

@dataclass(frozen=True)
class UserData:
    user: str
    events: tuple[RawEvent, ...]
    calendar: tuple[AppointmentRecord, ...]
    annotations: Mapping[str, AnnotationRecord]
    timeline: tuple[PresenceSegment, ...]
    attendance: MeetingModel | None = None
    interruptability: MeetingModel | None = None
    _event_ts: tuple[int, ...] = field(default=(), repr=False, compare=False)

    @property
    def horizon(self) -> tuple[Timestamp, Timestamp] | None:
        return (self.timeline[0].start, self.timeline[-1].end) if self.timeline else None

    def events_until(self, at: Timestamp) -> tuple[RawEvent, ...]:
        return self.events[: bisect.bisect_right(self._event_ts, at)]

    def appointment(self, appointment_id: str) -> AppointmentRecord:
        for a in self.calendar:
            if a.id == appointment_id:
                return a
        raise NotFound(f"user {self.user} has no appointment {appointment_id!r}")


def _train_or_none(target: str, calendar, annotations, directory, user, cfg: EngineConfig) -> MeetingModel | None:
    try:
        model, _ = train_model(
            target, calendar, annotations, directory, user, cfg.taxonomy(user), 0,
            cfg.alpha_total, cfg.min_leaf, cfg.subject_keywords,
        )
    except ModelDegenerate:
        return None
    return model


def build_user(
    user: str,
    events: Sequence[RawEvent],
    calendar: Sequence[AppointmentRecord],
    annotations: Mapping[str, AnnotationRecord],
    directory: DirectoryStub,
    cfg: EngineConfig,
    attendance: MeetingModel | None = None,
    interruptability: MeetingModel | None = None,
    train: bool = True,
) -> UserData:
    events = tuple(events)
    timeline = tuple(coalesce_timeline(events, cfg.idle_threshold)) if any(True for _ in events) else ()
    if train and attendance is None:
        attendance = _train_or_none("attendance", calendar, annotations, directory, user, cfg)
    if train and interruptability is None:
        interruptability = _train_or_none("interruptability", calendar, annotations, directory, user, cfg)
    return UserData(
        user,
        events,
        tuple(sorted(calendar, key=lambda a: (a.start, a.id))),
        MappingProxyType(dict(annotations)),
        timeline,
        attendance,
        interruptability,
        tuple(e.ts for e in events),
    )


@dataclass(frozen=True)
class Snapshot:
    """Everything a query reads. Never mutated; reload builds a new one."""

    config: EngineConfig
    users: Mapping[str, UserData]
    devices: Mapping[str, DeviceProfile]
    directory: DirectoryStub

    def user(self, name: str) -> UserData:
        try:
            return self.users[name]
        except KeyError:
            raise NotFound(f"unknown user {name!r}") from None

    @classmethod
    def from_store(cls, store: Store, config: EngineConfig, retrain: bool = False) -> "Snapshot":
        """Load every user; reuse saved models unless ``retrain``, else train on all labels."""
        directory = store.load_directory()
        users = {}
        for name in store.users():
            models = {}
            for target in ("attendance", "interruptability"):
                path = store.model_path(name, target)
                models[target] = MeetingModel.load(path) if path.exists() and not retrain else None
            users[name] = build_user(
                name,
                store.load_range(name),
                store.load_calendar(name),
                store.load_annotations(name),
                directory,
                config,
                models["attendance"],
                models["interruptability"],
            )
        return cls(config, MappingProxyType(users), MappingProxyType(store.load_devices()), directory)

    @classmethod
    def from_memory(
        cls,
        config: EngineConfig,
        users: Mapping[str, tuple[Sequence[RawEvent], Sequence[AppointmentRecord], Mapping[str, AnnotationRecord]]],
        devices: Mapping[str, DeviceProfile] | Sequence[DeviceProfile] = (),
        directory: DirectoryStub = DirectoryStub(),
        train: bool = True,
    ) -> "Snapshot":
        if not isinstance(devices, Mapping):
            devices = {d.device: d for d in devices}
        built = {
            name: build_user(name, ev, cal, ann, directory, config, train=train)
            for name, (ev, cal, ann) in users.items()
        }
        return cls(config, MappingProxyType(built), MappingProxyType(dict(devices)), directory)


# ---------------------------------------------------------------------------
# Forecast


@dataclass(frozen=True)
class ForecastResult:
    kind: QueryKind
    cdf: DurationCdf
    backoff_level: int
    n_cases: int
    summary: str
    meeting_terms: tuple[tuple[str, float], ...]
    quantiles: Mapping[str, int | None]
    elapsed: int
    estimator: str


def _cut(timeline: Sequence[PresenceSegment], at: Timestamp) -> list[PresenceSegment]:
    """The timeline as it stood at ``at``: segments through ``at + 1``.

    Presence at an instant depends only on earlier events, so cutting the
    full timeline equals coalescing just the events up to ``at``. Past the
    last segment the user is absent.
    """
    if not timeline or at < timeline[0].start:
        raise InsufficientHistory(f"no history before {at}")
    end = at + 1
    out = []
    for s in timeline:
        if s.start >= end:
            break
        out.append(s if s.end <= end else PresenceSegment(s.start, end, s.state, s.devices))
    last = out[-1]
    if last.end < end:
        if last.state is State.ABSENT:
            out[-1] = PresenceSegment(last.start, end, State.ABSENT)
        else:
            out.append(PresenceSegment(last.end, end, State.ABSENT))
    return out


def _query_timeline(spec: QuerySpec, ud: UserData, snap: Snapshot) -> list[PresenceSegment]:
    base = _cut(ud.timeline, spec.at)
    if spec.kind in (QueryKind.TIME_UNTIL_RETURN, QueryKind.TIME_UNTIL_LEAVE):
        return base
    return query_timeline(
        spec, ud.events_until(spec.at), snap.devices, snap.config.idle_threshold, (base[0].start, spec.at + 1)
    )


_TREE_FEATURES = ("period", "day_of_week", "day_class", "calendar_status")


def estimate(cases: Sequence[Case], context: ContextAttributes, cfg: EngineConfig) -> tuple[DurationCdf, str]:
    """Duration CDF for ``context`` from a reference class of cases."""
    done = [c for c in cases if not c.censored]
    if len(done) >= cfg.n_tree:
        binning = cfg.binning()
        schema = tuple(Attribute(a, CONTEXT_DOMAINS[a]) for a in _TREE_FEATURES)
        data = Dataset.from_dicts(
            schema,
            [(c.context.as_attributes(_TREE_FEATURES), bin_duration(c.wait, binning)) for c in done],
            binning.n_bins,
        )
        tree = learn_tree(data, cfg.alpha_total, cfg.min_leaf)
        return cdf_from_leaf(predict_distribution(tree, context.as_attributes(_TREE_FEATURES)), binning), "tree"
    if cfg.include_censored:
        return empirical_cdf([c.wait for c in cases], [c.censored for c in cases]), "empirical"
    if not done:
        raise NoData("every case in the reference class is censored")
    return empirical_cdf([c.wait for c in done]), "empirical"


def _wait_after(
    timeline: Sequence[PresenceSegment], starts: Sequence[int], t: Timestamp, target: State, min_len: int
) -> int | None:
    """Seconds from ``t`` to the first qualifying ``target`` segment at or after it."""
    i = bisect.bisect_right(starts, t) - 1
    if i < 0:
        return None
    for s in timeline[i:]:
        if s.state is target and s.length >= min_len:
            return max(0, s.start - t)
    return None


def p_attend(ud: UserData, appt: AppointmentRecord, snap: Snapshot) -> float:
    """Annotation if present, else the attendance model, else the smoothed base rate."""
    ann = ud.annotations.get(appt.id)
    if ann is not None and ann.attended is not None:
        return 1.0 if ann.attended else 0.0
    if ud.attendance is not None:
        return predict_attendance(ud.attendance, appt, snap.directory, ud.user, snap.config.taxonomy(ud.user))
    labels = [a.attended for a in ud.annotations.values() if a.attended is not None]
    return (sum(labels) + 1) / (len(labels) + 2)


def interrupt_dist(ud: UserData, appt: AppointmentRecord, snap: Snapshot) -> tuple[float, float, float]:
    ann = ud.annotations.get(appt.id)
    if ann is not None and ann.interruptability is not None:
        return tuple(1.0 if c == ann.interruptability.value else 0.0 for c in INTERRUPT_CLASSES)  # type: ignore[return-value]
    if ud.interruptability is not None:
        return predict_interruptability(ud.interruptability, appt, snap.directory, ud.user, snap.config.taxonomy(ud.user))
    counts = [1, 1, 1]
    for a in ud.annotations.values():
        if a.interruptability is not None:
            counts[INTERRUPT_CLASSES.index(a.interruptability.value)] += 1
    n = sum(counts)
    return counts[0] / n, counts[1] / n, counts[2] / n


def _after_meeting_cdf(
    spec: QuerySpec, ud: UserData, appt: AppointmentRecord, base: Sequence[PresenceSegment], snap: Snapshot
) -> DurationCdf:
    """Return time after ``appt``, from past meetings the user attended, on the query's time axis."""
    cfg = snap.config
    taxonomy = cfg.taxonomy(ud.user)
    min_len = spec.min_stay or 0
    starts = [s.start for s in base]
    history = []
    for a in ud.calendar:
        ann = ud.annotations.get(a.id)
        if a.end > spec.at or ann is None or ann.attended is not True:
            continue
        w = _wait_after(base, starts, a.end, State.PRESENT, min_len)
        if w is not None:
            ctx = ContextAttributes(classify_time_period(a.end, taxonomy), CalendarStatus.MEETING_SCHEDULED)
            history.append(Case(ctx, w))
    end_rel = appt.end - spec.at
    if not history:
        return point_mass(max(end_rel, 0))
    ctx = ContextAttributes(classify_time_period(appt.end, taxonomy), CalendarStatus.MEETING_SCHEDULED)
    subset, _ = build_reference_class(history, ctx, cfg.policy())
    rel = empirical_cdf([c.wait for c in subset])
    if end_rel >= 0:
        return shift(rel, end_rel)
    return condition_on_elapsed(rel, -end_rel)


def _meeting_terms(spec: QuerySpec, ud: UserData, base: Sequence[PresenceSegment], snap: Snapshot) -> list[MeetingTerm]:
    cfg = snap.config
    lo, hi = spec.at, spec.at + cfg.horizon
    pad = cfg.scope_padding
    terms = []
    for appt in ud.calendar:
        if not (appt.start - pad <= hi and appt.end + pad > lo):
            continue
        p = p_attend(ud, appt, snap)
        if spec.kind is QueryKind.TIME_UNTIL_LEAVE:
            f_m = point_mass(max(appt.start - spec.at, 0))
        else:
            try:
                f_m = _after_meeting_cdf(spec, ud, appt, base, snap)
            except NoSurvivingMass:
                continue
        scope = (appt.start - pad - spec.at, appt.end + pad - spec.at)
        terms.append(MeetingTerm(scope, f_m, p, appt.id))
    return truncate_scopes(terms)


def summarize(cdf: DurationCdf, threshold: float) -> str:
    try:
        q = quantile(cdf, threshold)
    except QuantileUnattainable:
        return f"probability of the event stays below {threshold:g} (at most {cdf.f_max:.3f})"
    return f"with probability ≥ {threshold:g}, event within {math.ceil(q / 60)} minutes"


def quantile_table(cdf: DurationCdf, threshold: float) -> dict[str, int | None]:
    out: dict[str, int | None] = {}
    for p in sorted({0.5, threshold, 0.9}):
        try:
            out[f"{p:g}"] = quantile(cdf, p)
        except QuantileUnattainable:
            out[f"{p:g}"] = None
    return out


def forecast(spec: QuerySpec, snap: Snapshot, threshold: float | None = None) -> ForecastResult:
    """Answer ``spec`` as of ``spec.at``, using only history up to that instant."""
    cfg = snap.config
    threshold = cfg.confidence_threshold if threshold is None else threshold
    if not 0 < threshold <= 1:
        raise InvalidInput("confidence threshold must lie in (0, 1]")
    ud = snap.user(spec.user)
    taxonomy = cfg.taxonomy(ud.user)
    qtl = _query_timeline(spec, ud, snap)

    elapsed = spec.away if spec.away is not None else proximal_context(qtl, spec.at, spec.landmark)
    cases = extract_cases(qtl, ud.calendar, ud.annotations, spec, taxonomy)
    # The background forecast learns only from stretches with nothing on the
    # calendar (or meetings the user said they skipped).
    eligible = [c for c in cases if c.context.calendar_status is CalendarStatus.NO_MEETING]
    context = ContextAttributes(classify_time_period(spec.at - elapsed, taxonomy), CalendarStatus.NO_MEETING)
    subset, level = build_reference_class(eligible, context, cfg.policy())
    f0, estimator = estimate(subset, context, cfg)
    f0 = condition_on_elapsed(f0, elapsed)

    terms: list[MeetingTerm] = []
    if spec.kind in (QueryKind.TIME_UNTIL_RETURN, QueryKind.TIME_UNTIL_LEAVE):
        terms = _meeting_terms(spec, ud, _cut(ud.timeline, spec.at), snap)
    cdf = integrate_meetings(f0, terms, cfg.horizon, cfg.grid_resolution) if terms else f0

    n_cases = len(subset) if cfg.include_censored else sum(not c.censored for c in subset)
    return ForecastResult(
        spec.kind,
        cdf,
        level,
        n_cases,
        summarize(cdf, threshold),
        tuple((m.appointment_id, m.p_attend) for m in terms),
        MappingProxyType(quantile_table(cdf, threshold)),
        elapsed,
        estimator,
    )


# ---------------------------------------------------------------------------
# Meeting queries


def active_appointment(ud: UserData, at: Timestamp) -> AppointmentRecord | None:
    """The meeting on the calendar at ``at`` that the user has not said they skipped."""
    for a in ud.calendar:
        if a.start <= at < a.end:
            ann = ud.annotations.get(a.id)
            if ann is None or ann.attended is not False:
                return a
    return None


def eci(
    snap: Snapshot,
    user: str | None = None,
    at: Timestamp | None = None,
    appointment_id: str | None = None,
    p: float | None = None,
    dist: Sequence[float] | None = None,
    period_key: str | None = None,
) -> dict:
    """Expected cost of interrupting ``user`` at ``at`` (or during an appointment).

    Explicit ``p``, ``dist`` and ``period_key`` override what the snapshot
    would infer, which allows evaluating the cost formula directly.
    """
    cfg = snap.config
    appt = None
    if user is not None:
        ud = snap.user(user)
        if appointment_id is not None:
            appt = ud.appointment(appointment_id)
        elif at is not None:
            appt = active_appointment(ud, at)
        taxonomy = cfg.taxonomy(user)
        when = at if at is not None else (appt.start if appt else None)
        if period_key is None and when is not None:
            period_key = classify_time_period(when, taxonomy).key
        if appt is not None:
            p = p_attend(ud, appt, snap) if p is None else p
            dist = interrupt_dist(ud, appt, snap) if dist is None else dist
    if p is None:
        p = 0.0
    if dist is None:
        dist = (1 / 3, 1 / 3, 1 / 3)
    if period_key is None:
        raise InvalidInput("eci needs a time, an appointment, or a period key")
    value = expected_cost_of_interruption(p, tuple(dist), cfg.interrupt_costs(), period_key)
    return {
        "eci": value,
        "p_attend": p,
        "interrupt_dist": list(dist),
        "period_key": period_key,
        "appointment_id": appt.id if appt else None,
    }
