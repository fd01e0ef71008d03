import math
from dataclasses import replace

import numpy as np
import pytest

from presence_forecast.cases import DeviceFilter, QueryKind, QuerySpec
from presence_forecast.config import EngineConfig
from presence_forecast.core import SECONDS_PER_DAY, day_of_week
from presence_forecast.distributions import point_mass, quantile
from presence_forecast.engine import Snapshot, _cut, _meeting_terms, eci, forecast, p_attend
from presence_forecast.errors import InsufficientHistory, InvalidInput, NotFound
from presence_forecast.store import AnnotationRecord, AppointmentRecord, BusyFlag, Interruptability, ResponseStatus, UserRole
from presence_forecast.timeline import coalesce_timeline

DAYS = 180


def weekday_at(profile, day, hours):
    """``hours`` into the first weekday at or after ``day``."""
    while day_of_week(profile.epoch + day * SECONDS_PER_DAY).day_class.value != "weekday":
        day += 1
    return profile.epoch + day * SECONDS_PER_DAY + round(hours * 3600)


def meeting(id_, start, end, organizer="p1"):
    return AppointmentRecord(
        id_, start, end, "Sync", "room 4", organizer, ("u1", organizer), UserRole.REQUIRED,
        ResponseStatus.RESPONDED_YES, False, BusyFlag.BUSY, False,
    )


def assert_cdf(cdf):
    assert all(0 <= p <= 1 for p in cdf.probs)
    assert list(cdf.probs) == sorted(cdf.probs)
    assert list(cdf.times) == sorted(set(cdf.times))


class TestForecast:
    def test_return_with_min_stay(self, default_sim, default_snapshot):
        profile = default_sim[0]
        at = weekday_at(profile, 120, 10.25)
        spec = QuerySpec(QueryKind.TIME_UNTIL_RETURN, at, "u1", min_stay=900, away=1500)
        res = forecast(spec, default_snapshot)
        assert_cdf(res.cdf)
        assert res.kind is QueryKind.TIME_UNTIL_RETURN and res.elapsed == 1500
        q = res.quantiles["0.8"]
        assert q == quantile(res.cdf, 0.8)
        assert "0.8" in res.summary and f"{math.ceil(q / 60)} minutes" in res.summary
        assert res.n_cases >= EngineConfig().n_min

    def test_as_of_equals_history_cut(self, default_sim):
        profile, events, appts, truth = default_sim
        anns = {a.appointment_id: a for a in truth.annotations()}
        full = Snapshot.from_memory(EngineConfig(), {"u1": (events, appts, anns)}, profile.devices, profile.directory, train=False)
        for day, hours in [(40, 9.9), (61, 12.1), (90, 15.3), (150, 11.0)]:
            at = weekday_at(profile, day, hours)
            past = [e for e in events if e.ts <= at]
            cut = Snapshot.from_memory(EngineConfig(), {"u1": (past, appts, anns)}, profile.devices, profile.directory, train=False)
            assert _cut(full.users["u1"].timeline, at) == _cut(coalesce_timeline(past), at)
            for spec in (
                QuerySpec(QueryKind.TIME_UNTIL_RETURN, at, "u1", away=600),
                QuerySpec(QueryKind.TIME_UNTIL_LEAVE, at, "u1"),
                QuerySpec(QueryKind.TIME_UNTIL_APP_ENGAGEMENT, at, "u1", app="mail"),
            ):
                try:
                    a = forecast(spec, full)
                except InsufficientHistory:
                    with pytest.raises(InsufficientHistory):
                        forecast(spec, cut)
                    continue
                b = forecast(spec, cut)
                assert a.cdf == b.cdf and a.summary == b.summary and a.meeting_terms == b.meeting_terms

    def test_other_kinds(self, default_sim, default_snapshot):
        at = weekday_at(default_sim[0], 100, 14.0)
        for spec in (
            QuerySpec(QueryKind.TIME_UNTIL_LEAVE, at, "u1", min_absence=600),
            QuerySpec(QueryKind.TIME_UNTIL_DEVICE_ACCESS, at, "u1", device_filter=DeviceFilter(capability="laptop")),
            QuerySpec(QueryKind.TIME_UNTIL_DEVICE_ACCESS, at, "u1", device_filter=DeviceFilter(location="office")),
            QuerySpec(QueryKind.TIME_UNTIL_APP_ENGAGEMENT, at, "u1", app="mail"),
        ):
            res = forecast(spec, default_snapshot)
            assert_cdf(res.cdf)
            assert res.kind is spec.kind
            if spec.kind not in (QueryKind.TIME_UNTIL_RETURN, QueryKind.TIME_UNTIL_LEAVE):
                assert res.meeting_terms == ()
        # the phone only sends heartbeats, which never count as presence
        phone = QuerySpec(QueryKind.TIME_UNTIL_DEVICE_ACCESS, at, "u1", device_filter=DeviceFilter(capability="phone"))
        with pytest.raises(InsufficientHistory):
            forecast(phone, default_snapshot)

    def test_errors(self, default_sim, default_snapshot):
        profile = default_sim[0]
        with pytest.raises(NotFound):
            forecast(QuerySpec(QueryKind.TIME_UNTIL_RETURN, profile.epoch + 86_400, "ghost"), default_snapshot)
        with pytest.raises(InsufficientHistory):
            forecast(QuerySpec(QueryKind.TIME_UNTIL_RETURN, profile.epoch - 10, "u1", away=60), default_snapshot)
        with pytest.raises(InvalidInput):
            forecast(QuerySpec(QueryKind.TIME_UNTIL_RETURN, profile.epoch + 86_400, "u1", away=60), default_snapshot, 0)


@pytest.fixture(scope="class")
def afternoon(default_sim):
    """Three afternoon meetings on a day after the log ends."""
    profile, events, appts, truth = default_sim
    day = weekday_at(profile, DAYS, 0)
    extra = [
        meeting("f1", day + 13 * 3600, day + 14 * 3600),
        meeting("f2", day + 14 * 3600 + 1800, day + 15 * 3600 + 1800),
        meeting("f3", day + 16 * 3600, day + 17 * 3600),
    ]
    anns = {a.appointment_id: a for a in truth.annotations()}
    anns["f2"] = AnnotationRecord("f2", attended=True, interruptability=Interruptability.LOW)
    snap = Snapshot.from_memory(EngineConfig(), {"u1": (events, appts + extra, anns)}, profile.devices, profile.directory)
    return snap, day, extra


class TestMeetings:
    def test_three_meetings_shape_the_forecast(self, afternoon):
        snap, day, extra = afternoon
        at = day + 13 * 3600 + 1200
        spec = QuerySpec(QueryKind.TIME_UNTIL_RETURN, at, "u1", away=1200)
        res = forecast(spec, snap)
        assert [m for m, _ in res.meeting_terms] == ["f1", "f2", "f3"]
        assert dict(res.meeting_terms)["f2"] == 1.0
        assert_cdf(res.cdf)
        plain = forecast(spec, replace(snap, users={"u1": replace(snap.users["u1"], calendar=())}))
        assert plain.meeting_terms == ()
        # an attended meeting in progress holds the user away: less mass before it ends
        grid = np.arange(0, 40 * 60, 60)
        assert np.all(res.cdf.evaluate(grid) <= plain.cdf.evaluate(grid) + 1e-12)

    def test_p_attend_fallbacks(self, afternoon, default_sim):
        snap, _, extra = afternoon
        ud = snap.users["u1"]
        assert p_attend(ud, extra[1], snap) == 1.0
        modeled = p_attend(ud, extra[0], snap)
        assert 0 < modeled < 1 and ud.attendance is not None
        profile = default_sim[0]
        anns = {
            "a": AnnotationRecord("a", attended=True),
            "b": AnnotationRecord("b", attended=True),
            "c": AnnotationRecord("c", attended=False),
        }
        bare = Snapshot.from_memory(EngineConfig(), {"u1": (default_sim[1][:50], [], anns)}, profile.devices, profile.directory, train=False)
        assert p_attend(bare.users["u1"], extra[0], bare) == pytest.approx(3 / 5)

    def test_leave_uses_the_meeting_start(self, afternoon):
        snap, day, extra = afternoon
        at = day + 12 * 3600
        spec = QuerySpec(QueryKind.TIME_UNTIL_LEAVE, at, "u1")
        ud = snap.users["u1"]
        terms = _meeting_terms(spec, ud, _cut(ud.timeline, at), snap)
        assert [t.appointment_id for t in terms] == ["f1", "f2", "f3"]
        for t, m in zip(terms, extra):
            assert t.cdf == point_mass(m.start - at)
        # a meeting already under way means leaving now
        inside = _meeting_terms(replace(spec, at=day + 13 * 3600 + 600), ud, _cut(ud.timeline, at), snap)
        assert inside[0].cdf == point_mass(0)


class TestEci:
    def test_direct_formula(self, default_snapshot):
        out = eci(default_snapshot, p=0.64, dist=(0.5, 0.4, 0.1), period_key="morning/weekday")
        assert out["eci"] == 5.008
        with pytest.raises(InvalidInput):
            eci(default_snapshot, p=0.5)

    def test_no_meeting_costs_the_default(self, default_sim, default_snapshot):
        profile, _, appts, _ = default_sim
        busy = {(a.start, a.end) for a in appts}
        at = weekday_at(profile, DAYS, 3.0)
        assert not any(s <= at < e for s, e in busy)
        out = eci(default_snapshot, "u1", at)
        assert out["appointment_id"] is None and out["p_attend"] == 0.0 and out["eci"] == 2.0

    def test_annotated_meeting(self, default_sim, default_snapshot):
        _, _, appts, truth = default_sim
        costs = {"low": 10.0, "medium": 4.0, "high": 1.0}
        for a in appts[:25]:
            t = truth.meetings[a.id]
            out = eci(default_snapshot, "u1", appointment_id=a.id)
            want = costs[t.interruptability.value] if t.attended else 2.0
            assert out["eci"] == pytest.approx(want)
        with pytest.raises(NotFound):
            eci(default_snapshot, "u1", appointment_id="nope")
