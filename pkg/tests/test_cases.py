import random

import pytest
from hypothesis import given, settings, strategies as st

from presence_forecast.cases import (
    DEFAULT_LADDER,
    BackoffPolicy,
    CalendarStatus,
    Case,
    ContextAttributes,
    DeviceFilter,
    Landmark,
    QueryKind,
    QuerySpec,
    build_reference_class,
    extract_cases,
    matches,
    proximal_context,
)
from presence_forecast.core import DEFAULT_TAXONOMY, DayOfWeek, Period, PresenceSegment, State, TimePeriod
from presence_forecast.errors import InsufficientHistory, InvalidInput, NoData
from presence_forecast.store import AnnotationRecord, AppointmentRecord, BusyFlag, ResponseStatus, UserRole

MONDAY = 1_704_067_200


def timeline_from(lengths, start=MONDAY, first=State.PRESENT):
    out, t, state = [], start, first
    for n in lengths:
        out.append(PresenceSegment(t, t + n, state, frozenset({"d"}) if state is State.PRESENT else frozenset()))
        t += n
        state = State.ABSENT if state is State.PRESENT else State.PRESENT
    return out


def return_spec(min_stay=None):
    return QuerySpec(QueryKind.TIME_UNTIL_RETURN, MONDAY, "u1", min_stay=min_stay)


def meeting(id_, start, end):
    return AppointmentRecord(
        id_, start, end, "Sync", "", "mgr", ("u1",), UserRole.REQUIRED, ResponseStatus.RESPONDED_YES,
        False, BusyFlag.BUSY, False,
    )


def oracle_cases(tl, onset_state, min_len):
    """(onset, wait, censored) by scanning forward from every onset."""
    target = State.PRESENT if onset_state is State.ABSENT else State.ABSENT
    out = []
    for i in range(1, len(tl)):
        if tl[i].state is onset_state and tl[i - 1].state is not onset_state:
            hit = next((s for s in tl[i + 1 :] if s.state is target and s.length >= min_len), None)
            if hit is None:
                out.append((tl[i].start, tl[-1].end - tl[i].start, True))
            else:
                out.append((tl[i].start, hit.start - tl[i].start, False))
    return out


class TestQuerySpec:
    def test_parameters_belong_to_their_kind(self):
        with pytest.raises(InvalidInput):
            QuerySpec(QueryKind.TIME_UNTIL_LEAVE, 0, "u", min_stay=60)
        with pytest.raises(InvalidInput):
            QuerySpec(QueryKind.TIME_UNTIL_RETURN, 0, "u", min_absence=60)
        with pytest.raises(InvalidInput):
            QuerySpec(QueryKind.TIME_UNTIL_DEVICE_ACCESS, 0, "u")
        with pytest.raises(InvalidInput):
            QuerySpec(QueryKind.TIME_UNTIL_APP_ENGAGEMENT, 0, "u")
        with pytest.raises(InvalidInput):
            QuerySpec(QueryKind.TIME_UNTIL_RETURN, 0, "u", away=-1)
        with pytest.raises(InvalidInput):
            DeviceFilter()
        q = QuerySpec("time_until_device_access", 0, "u", device_filter=DeviceFilter(capability="phone"))
        assert q.landmark is Landmark.DEVICE_LAST_SEEN


class TestProximalContext:
    def test_elapsed_since_last_transition(self):
        tl = timeline_from([600, 300, 900, 1200])  # P A P A
        assert proximal_context(tl, MONDAY + 1800 + 100, Landmark.PRESENT_TO_ABSENT) == 100
        assert proximal_context(tl, MONDAY + 700, Landmark.PRESENT_TO_ABSENT) == 100
        assert proximal_context(tl, MONDAY + 1000, Landmark.ABSENT_TO_PRESENT) == 100

    def test_needs_a_transition(self):
        tl = timeline_from([600, 300])
        with pytest.raises(InsufficientHistory):
            proximal_context(tl, MONDAY + 10, Landmark.PRESENT_TO_ABSENT)
        with pytest.raises(InsufficientHistory):
            proximal_context(tl, MONDAY + 5000, Landmark.PRESENT_TO_ABSENT)


class TestExtractCases:
    def test_min_stay_skips_short_returns(self):
        tl = timeline_from([600, 300, 120, 60, 1200, 100])  # P A P(short) A P A
        cases = extract_cases(tl, [], {}, return_spec(min_stay=900), DEFAULT_TAXONOMY)
        assert [(c.wait, c.censored) for c in cases] == [(480, False), (60, False), (100, True)]

    @settings(max_examples=300)
    @given(
        st.lists(st.integers(1, 3000), min_size=1, max_size=30),
        st.sampled_from([State.PRESENT, State.ABSENT]),
        st.integers(0, 2000),
        st.booleans(),
    )
    def test_matches_forward_scan_oracle(self, lengths, first, min_len, leave):
        tl = timeline_from(lengths, first=first)
        if leave:
            spec = QuerySpec(QueryKind.TIME_UNTIL_LEAVE, MONDAY, "u1", min_absence=min_len)
            onset = State.PRESENT
        else:
            spec = return_spec(min_stay=min_len)
            onset = State.ABSENT
        got = extract_cases(tl, [], {}, spec, DEFAULT_TAXONOMY)
        want = oracle_cases(tl, onset, min_len)
        # one case per onset transition, none lost or invented
        assert len(got) == len(want)
        for c, (start, wait, censored) in zip(got, want):
            assert (c.wait, c.censored) == (wait, censored)
            assert c.context.period == TimePeriod(
                DEFAULT_TAXONOMY.period_at((start - MONDAY) % 86_400), c.context.period.day_of_week
            )

    def test_calendar_status_at_onset(self):
        tl = timeline_from([3600, 600, 3600, 600, 600])
        onsets = [MONDAY + 3600, MONDAY + 7800]
        cal = [meeting("m1", onsets[0] - 60, onsets[0] + 60), meeting("m2", onsets[1] - 600, onsets[1] + 1)]
        cases = extract_cases(tl, cal, {}, return_spec(), DEFAULT_TAXONOMY)
        assert [c.context.calendar_status for c in cases] == [CalendarStatus.MEETING_SCHEDULED] * 2
        skipped = {"m2": AnnotationRecord("m2", attended=False)}
        cases = extract_cases(tl, cal, skipped, return_spec(), DEFAULT_TAXONOMY)
        assert [c.context.calendar_status for c in cases] == [
            CalendarStatus.MEETING_SCHEDULED,
            CalendarStatus.NO_MEETING,
        ]

    def test_meeting_ending_at_onset_is_not_active(self):
        tl = timeline_from([3600, 600, 600])
        cal = [meeting("m", MONDAY, MONDAY + 3600)]
        (case,) = extract_cases(tl, cal, {}, return_spec(), DEFAULT_TAXONOMY)
        assert case.context.calendar_status is CalendarStatus.NO_MEETING


def ctx(period="morning", dow="monday", status=CalendarStatus.NO_MEETING):
    return ContextAttributes(TimePeriod(Period(period), DayOfWeek(dow)), status)


class TestBackoff:
    def test_falls_back_one_level(self):
        target = ctx("morning", "monday")
        cases = [Case(ctx("morning", "monday"), 60 * i) for i in range(10)]
        cases += [Case(ctx("morning", "tuesday"), 60 * i) for i in range(20)]
        subset, level = build_reference_class(cases, target, BackoffPolicy(n_min=25))
        assert level == 1 and len(subset) == 30

    def test_censored_cases_do_not_count_toward_n_min(self):
        target = ctx()
        cases = [Case(ctx(), 60, censored=True) for _ in range(30)] + [Case(ctx(), 60)]
        cases += [Case(ctx(dow="tuesday"), 60) for _ in range(30)]
        _, level = build_reference_class(cases, target, BackoffPolicy(n_min=25))
        assert level == 1

    def test_broadest_level_when_nothing_qualifies(self):
        subset, level = build_reference_class([Case(ctx("night"), 1)], ctx(), BackoffPolicy(n_min=25))
        assert level == len(DEFAULT_LADDER) - 1 and len(subset) == 1
        with pytest.raises(NoData):
            build_reference_class([], ctx())

    def test_policy_validation(self):
        with pytest.raises(InvalidInput):
            BackoffPolicy(ladder=(("period",),))
        with pytest.raises(InvalidInput):
            BackoffPolicy(n_min=0)

    def test_nested_ladder_monotone_superset(self):
        rng = random.Random(7)
        periods = [p.value for p in Period]
        days = [d.value for d in DayOfWeek]
        statuses = list(CalendarStatus)
        for _ in range(200):
            cases = [
                Case(ctx(rng.choice(periods), rng.choice(days), rng.choice(statuses)), rng.randrange(7200), rng.random() < 0.1)
                for _ in range(rng.randrange(1, 120))
            ]
            target = ctx(rng.choice(periods), rng.choice(days), rng.choice(statuses))
            policy = BackoffPolicy(n_min=rng.randrange(1, 40))
            levels = [[c for c in cases if matches(c, target, attrs)] for attrs in policy.ladder]
            for narrow, wide in zip(levels, levels[1:]):
                assert {id(c) for c in narrow} <= {id(c) for c in wide}
            subset, level = build_reference_class(cases, target, policy)
            qualifying = [i for i, s in enumerate(levels) if sum(not c.censored for c in s) >= policy.n_min]
            assert level == (qualifying[0] if qualifying else len(levels) - 1)
            assert subset == levels[level]
