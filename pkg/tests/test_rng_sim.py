import json
import math
from dataclasses import replace

import pytest

from presence_forecast import sim
from presence_forecast.cases import QueryKind, QuerySpec, extract_cases
from presence_forecast.core import DEFAULT_TAXONOMY, SECONDS_PER_DAY, State, day_of_week
from presence_forecast.distributions import sup_distance
from presence_forecast.errors import InvalidInput
from presence_forecast.meetings import extract_features
from presence_forecast.rng import Rng, mix
from presence_forecast.store import Store
from presence_forecast.timeline import coalesce_timeline


def splitmix64(seed, n):
    """Reference SplitMix64 with the state update written out longhand."""
    out, state = [], seed
    for _ in range(n):
        state = (state + 0x9E3779B97F4A7C15) % 2**64
        z = state
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) % 2**64
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) % 2**64
        out.append(z ^ (z >> 31))
    return out


class TestRng:
    def test_published_splitmix64_values(self):
        r = Rng(0)
        assert [r.next_u64(), r.next_u64()] == [0xE220A8397B1DCDAF, 0x6E789E6AA1B965F4]

    def test_matches_reference_stream(self):
        for seed in (1, 42, 2**63 + 5):
            r = Rng(seed)
            assert [r.next_u64() for _ in range(50)] == splitmix64(seed, 50)

    def test_forks_are_stable_and_distinct(self):
        a, b = Rng(7).fork("day", 3), Rng(7).fork("day", 3)
        assert [a.next_u64() for _ in range(5)] == [b.next_u64() for _ in range(5)]
        assert Rng(7).fork("day", 3).next_u64() != Rng(7).fork("day", 4).next_u64()
        assert Rng(7).fork("day3").next_u64() != Rng(7).fork("day", 3).next_u64()

    def test_float_ranges_and_mix(self):
        r = Rng(3)
        xs = [r.random() for _ in range(10_000)]
        assert 0 <= min(xs) and max(xs) < 1
        assert abs(sum(xs) / len(xs) - 0.5) < 0.01
        assert mix(0) == 0
        assert sorted({r.randbelow(3) for _ in range(100)}) == [0, 1, 2]
        with pytest.raises(ValueError):
            r.randbelow(0)


class TestGenerator:
    def test_same_seed_gives_byte_identical_stores(self, tmp_path):
        profile = sim.default_profile(5)
        for name in ("a", "b"):
            events, appts, truth = sim.generate_user(profile, 14)
            sim.write_store(Store(tmp_path / name), profile, events, appts, truth)
        files = sorted(p.relative_to(tmp_path / "a") for p in (tmp_path / "a").rglob("*") if p.is_file())
        assert files
        for f in files:
            assert (tmp_path / "a" / f).read_bytes() == (tmp_path / "b" / f).read_bytes()
        other, _, _ = sim.generate_user(sim.default_profile(6), 14)
        assert other != sim.generate_user(profile, 14)[0]

    def test_quiet_user_has_one_block_per_workday(self):
        profile = replace(
            sim.calibration_profiles()[0],
            break_rate={p: 0.0 for p in sim.default_profile().break_rate},
        )
        events, appts, _ = sim.generate_user(profile, 21)
        assert appts == []
        tl = coalesce_timeline(events)
        blocks = [s for s in tl if s.state is State.PRESENT]
        workdays = [d for d in range(21) if day_of_week(profile.epoch + d * SECONDS_PER_DAY).day_class.value == "weekday"]
        assert len(blocks) == len(workdays)
        assert [(b.start - profile.epoch) // SECONDS_PER_DAY for b in blocks] == workdays

    def test_activity_spacing(self):
        for s, e in [(0, 1), (100, 160), (100, 161), (0, 3599)]:
            ts = [ev.ts for ev in sim._activity("u1", "desktop", s, e)]
            assert ts[0] == s and ts[-1] == e
            assert max(b - a for a, b in zip(ts, ts[1:])) <= 60

    def test_default_run_yields_enough_cases(self, default_sim):
        profile, events, _, _ = default_sim
        tl = coalesce_timeline(events)
        spec = QuerySpec(QueryKind.TIME_UNTIL_RETURN, events[-1].ts, profile.user)
        cases = extract_cases(tl, [], {}, spec, DEFAULT_TAXONOMY)
        assert sum(not c.censored for c in cases) >= 500

    def test_days_must_be_positive(self):
        with pytest.raises(InvalidInput):
            sim.generate_user(sim.default_profile(), 0)


def logistic_p_attend(profile, appt):
    """Attend probability from the rule's coefficients, written as a plain logistic."""
    rule = profile.attendance_rule
    attrs = extract_features(appt, profile.directory, profile.user, DEFAULT_TAXONOMY).as_attributes()
    score = {}
    for c in rule.classes:
        w = rule.weights.get(c, {})
        score[c] = rule.intercepts.get(c, 0.0) + sum(w.get(f"{k}={v}", 0.0) for k, v in attrs.items())
    z = score[rule.classes[1]] - score[rule.classes[0]]
    return 1 / (1 + math.exp(-z))


class TestGroundTruth:
    def test_attendance_probabilities_and_bayes_rate(self, default_sim):
        profile, _, appts, truth = default_sim
        ps = [logistic_p_attend(profile, a) for a in appts]
        for a, p in zip(appts, ps):
            assert truth.meetings[a.id].p_attend == pytest.approx(p, abs=1e-12)
        assert sim.bayes_accuracy(truth, appts) == pytest.approx(sum(max(p, 1 - p) for p in ps) / len(ps), abs=1e-12)
        # realized labels follow the planted probabilities
        n = len(appts)
        attended = sum(truth.meetings[a.id].attended for a in appts)
        assert abs(attended - sum(ps)) < 4 * math.sqrt(sum(p * (1 - p) for p in ps)) + 1
        assert n > 100

    def test_interruptability_rate(self, default_sim):
        _, _, appts, truth = default_sim
        want = sum(max(truth.meetings[a.id].p_interrupt) for a in appts) / len(appts)
        assert sim.bayes_accuracy(truth, appts, "interruptability") == pytest.approx(want)
        for a in appts:
            assert sum(truth.meetings[a.id].p_interrupt) == pytest.approx(1.0, abs=1e-12)
        with pytest.raises(InvalidInput):
            sim.bayes_accuracy(truth, [])

    def test_profile_round_trip(self, tmp_path):
        for profile in [sim.default_profile(), sim.lunch_absentee_profile(), *sim.calibration_profiles()]:
            back = sim.profile_from_dict(sim.profile_to_dict(profile))
            assert back == profile
        path = tmp_path / "p.json"
        path.write_text(json.dumps(sim.profile_to_dict(sim.lunch_absentee_profile())))
        assert sim.load_profile(str(path)) == sim.lunch_absentee_profile()
        assert sim.load_profile("default") == sim.default_profile()


def lunch_step_profile():
    base = sim.calibration_profiles()[0]
    # breaks only at lunch, always 35 minutes: visible absences last exactly 30 minutes
    rates = {p: 0.0 for p in base.break_rate}
    return replace(
        base,
        break_rate={**rates, "lunchtime": 1.0},
        break_duration={**base.break_duration, "lunchtime": sim.LogNormal(35.0, 0.0)},
    )


def wednesday_at(profile, hours):
    day = profile.epoch + 2 * SECONDS_PER_DAY
    assert day_of_week(day).value == "wednesday"
    return day + round(hours * 3600)


class TestOracle:
    def test_deterministic_return_is_a_step(self):
        profile = lunch_step_profile()
        at = wednesday_at(profile, 12.0)
        cdf = sim.monte_carlo_oracle(profile, QuerySpec(QueryKind.TIME_UNTIL_RETURN, at, "u1", away=0), 1000)
        assert cdf.times == (1800,) and cdf.probs == (1.0,)
        later = sim.monte_carlo_oracle(profile, QuerySpec(QueryKind.TIME_UNTIL_RETURN, at, "u1", away=600), 1000)
        assert later.times == (1200,)

    def test_no_surviving_mass_is_empty(self):
        profile = lunch_step_profile()
        spec = QuerySpec(QueryKind.TIME_UNTIL_RETURN, wednesday_at(profile, 12.5), "u1", away=1800)
        cdf = sim.monte_carlo_oracle(profile, spec, 1000)
        assert cdf.is_empty

    def test_dkw_bound_between_sample_sizes(self):
        profile = sim.calibration_profiles()[1]
        spec = QuerySpec(QueryKind.TIME_UNTIL_RETURN, wednesday_at(profile, 10.0), "u1", away=300)
        n1, n2 = 2000, 4000
        a = sim.monte_carlo_oracle(profile, spec, n1, seed=1)
        b = sim.monte_carlo_oracle(profile, spec, n2, seed=2)
        # each run lies within eps_n of the truth with probability 1 - 0.0027 (3 sigma)
        eps = lambda n: math.sqrt(math.log(2 / 0.0027) / (2 * n))
        assert sup_distance(a, b, 3 * SECONDS_PER_DAY) <= eps(n1) + eps(n2)

    def test_rejects_unsupported_scenarios(self):
        spec = QuerySpec(QueryKind.TIME_UNTIL_RETURN, wednesday_at(sim.default_profile(), 10), "u1", away=60)
        with pytest.raises(InvalidInput):
            sim.monte_carlo_oracle(sim.default_profile(), spec, 1000)
        with pytest.raises(InvalidInput):
            sim.monte_carlo_oracle(sim.calibration_profiles()[0], spec, 10)
        with pytest.raises(InvalidInput):
            sim.monte_carlo_oracle(
                sim.calibration_profiles()[0], QuerySpec(QueryKind.TIME_UNTIL_RETURN, spec.at, "u1"), 1000
            )
