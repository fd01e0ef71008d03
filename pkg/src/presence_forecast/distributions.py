"""Cumulative distributions over time-until-event.

A :class:`DurationCdf` is a right-continuous nondecreasing function on
integer seconds, stored as breakpoints. In ``step`` mode it holds its value
until the next breakpoint; in ``linear`` mode it interpolates between them.
Before the first breakpoint it is 0 and after the last it stays at the
terminal mass, which is below 1 when some mass lies past the modeled range.
"""

from __future__ import annotations

import enum
import math
from collections import Counter
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

import numpy as np

from .core import Duration
from .errors import InvalidInput, NoData, NoSurvivingMass, QuantileUnattainable
from .learn import DurationBinning


class Interp(str, enum.Enum):
    STEP = "step"
    LINEAR = "linear"


@dataclass(frozen=True)
class DurationCdf:
    times: tuple[int, ...]
    probs: tuple[float, ...]
    mode: Interp = Interp.STEP
    # Empirical CDFs keep their integer tallies so conditioning stays exact:
    # probs[i] == tallies[i] / n.
    tallies: tuple[int, ...] | None = None
    n: int | None = None

    def __post_init__(self):
        object.__setattr__(self, "mode", Interp(self.mode))
        if len(self.times) != len(self.probs):
            raise InvalidInput("times and probs differ in length")
        for a, b in zip(self.times, self.times[1:]):
            if b <= a:
                raise InvalidInput("breakpoint times must strictly increase")
        for a, b in zip(self.probs, self.probs[1:]):
            if b < a:
                raise InvalidInput("CDF values must be nondecreasing")
        if self.probs and (self.probs[0] < 0 or self.probs[-1] > 1):
            raise InvalidInput("CDF values must lie in [0, 1]")
        if self.times and self.times[0] < 0:
            raise InvalidInput("negative breakpoint time")

    @property
    def f_max(self) -> float:
        return self.probs[-1] if self.probs else 0.0

    @property
    def is_empty(self) -> bool:
        """True for the all-zero CDF (no event observed at all)."""
        return self.f_max == 0.0

    def __call__(self, t: float) -> float:
        return float(self.evaluate(np.asarray([t], dtype=float))[0])

    def evaluate(self, t: np.ndarray) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        if not self.times:
            return np.zeros_like(t)
        xs = np.asarray(self.times, dtype=float)
        ys = np.asarray(self.probs, dtype=float)
        if self.mode is Interp.STEP:
            i = np.searchsorted(xs, t, side="right") - 1
            return np.where(i >= 0, ys[np.clip(i, 0, None)], 0.0)
        return np.interp(t, xs, ys, left=0.0, right=ys[-1]) * (t >= xs[0])

    def pairs(self) -> list[list]:
        return [[t, p] for t, p in zip(self.times, self.probs)]


def empirical_cdf(waits: Iterable[Duration], censored: Sequence[bool] | None = None) -> DurationCdf:
    """Step CDF ``F(t) = #(wait <= t) / n``.

    With ``censored`` flags containing any True, the product-limit estimate
    is used instead, treating censored waits as lower bounds.
    """
    waits = list(waits)
    if not waits:
        raise NoData("no waits to estimate from")
    if censored is not None and any(censored):
        return _product_limit(waits, censored)
    counts = sorted(Counter(waits).items())
    n = len(waits)
    tallies = []
    running = 0
    for _, c in counts:
        running += c
        tallies.append(running)
    return DurationCdf(
        tuple(int(t) for t, _ in counts),
        tuple(c / n for c in tallies),
        Interp.STEP,
        tuple(tallies),
        n,
    )


def _product_limit(waits: Sequence[Duration], censored: Sequence[bool]) -> DurationCdf:
    events = Counter(w for w, c in zip(waits, censored) if not c)
    if not events:
        raise NoData("every wait is censored")
    at_risk = len(waits)
    order = sorted(Counter(waits).items())
    surv = 1.0
    times, probs = [], []
    for t, total in order:
        d = events.get(t, 0)
        if d:
            surv *= 1 - d / at_risk
            times.append(int(t))
            probs.append(min(1.0, 1 - surv))
        at_risk -= total
    return DurationCdf(tuple(times), tuple(probs), Interp.STEP)


def cdf_from_leaf(dist: Sequence[float], binning: DurationBinning = DurationBinning()) -> DurationCdf:
    """Piecewise-linear CDF from bin probabilities; open-bin mass withheld."""
    if len(dist) != binning.n_bins:
        raise InvalidInput(f"expected {binning.n_bins} bin probabilities, got {len(dist)}")
    if any(p < 0 for p in dist) or abs(sum(dist) - 1) > 1e-9:
        raise InvalidInput("bin probabilities must be a distribution")
    times = [0]
    probs = [0.0]
    acc = 0.0
    for edge, p in zip(binning.edges_s, dist[:-1]):
        acc += p
        times.append(edge)
        probs.append(min(acc, 1.0))
    return DurationCdf(tuple(times), tuple(probs), Interp.LINEAR)


def condition_on_elapsed(cdf: DurationCdf, d: Duration) -> DurationCdf:
    """Remaining-time CDF given the wait exceeds ``d``.

    ``F'(t) = (F(d + t) - F(d)) / (1 - F(d))``. Survivors are strictly
    longer than ``d``, so at ``d = 0`` any mass at zero is removed.
    """
    if d < 0:
        raise InvalidInput("elapsed time must be nonnegative")
    fd = cdf(d)
    if fd >= cdf.f_max:
        raise NoSurvivingMass(f"no probability mass beyond {d} s")

    if cdf.tallies is not None:
        k = sum(1 for t in cdf.times if t <= d)
        base = cdf.tallies[k - 1] if k else 0
        rest = cdf.n - base
        tallies = tuple(c - base for c in cdf.tallies[k:])
        return DurationCdf(
            tuple(t - d for t in cdf.times[k:]),
            tuple(c / rest for c in tallies),
            Interp.STEP,
            tallies,
            rest,
        )

    scale = 1.0 - fd
    times, probs = [], []
    if cdf.mode is Interp.LINEAR and d >= cdf.times[0]:
        # d falls inside the interpolated range: the ramp restarts from 0
        times.append(0)
        probs.append(0.0)
    for t, p in zip(cdf.times, cdf.probs):
        if t > d:
            times.append(t - d)
            probs.append(min(1.0, max(0.0, (p - fd) / scale)))
    return DurationCdf(tuple(times), tuple(probs), cdf.mode)


def shift(cdf: DurationCdf, offset: Duration) -> DurationCdf:
    """CDF of ``offset + T``; both modes are 0 before the first breakpoint, so translation suffices."""
    if offset < 0:
        raise InvalidInput("shift offset must be nonnegative")
    if offset == 0 or not cdf.times:
        return cdf
    return DurationCdf(tuple(t + offset for t in cdf.times), cdf.probs, cdf.mode, cdf.tallies, cdf.n)


def point_mass(at: Duration) -> DurationCdf:
    return DurationCdf((at,), (1.0,), Interp.STEP)


def quantile(cdf: DurationCdf, p: float) -> Duration:
    """Smallest whole second ``t`` with ``F(t) >= p``."""
    if not 0 < p <= 1:
        raise InvalidInput("p must lie in (0, 1]")
    if p > cdf.f_max:
        raise QuantileUnattainable(f"p={p} exceeds terminal mass {cdf.f_max:.6g}")
    for i, (t, f) in enumerate(zip(cdf.times, cdf.probs)):
        if f >= p:
            if cdf.mode is Interp.STEP or i == 0:
                return t
            t0, f0 = cdf.times[i - 1], cdf.probs[i - 1]
            exact = t0 + (p - f0) / (f - f0) * (t - t0)
            guess = max(t0, min(t, math.ceil(exact - 1e-9)))
            while guess < t and cdf(guess) < p:
                guess += 1
            while guess > t0 and cdf(guess - 1) >= p:
                guess -= 1
            return guess
    raise QuantileUnattainable(f"p={p} not reached")  # pragma: no cover


# ---------------------------------------------------------------------------
# Expected cost of interruption


@dataclass(frozen=True)
class InterruptCosts:
    """Cost per interruptability level, and the default cost per time period."""

    low: float
    medium: float
    high: float
    default: Mapping[str, float]

    def __post_init__(self):
        if min(self.low, self.medium, self.high) < 0 or any(v < 0 for v in self.default.values()):
            raise InvalidInput("costs must be nonnegative")


def expected_cost_of_interruption(
    p_attend: float,
    interrupt_dist: Sequence[float],
    costs: InterruptCosts,
    period_key: str,
) -> float:
    """``p * sum_i p_i c_i + (1 - p) * c_default``."""
    if not 0 <= p_attend <= 1:
        raise InvalidInput("p_attend must lie in [0, 1]")
    if len(interrupt_dist) != 3 or any(q < 0 for q in interrupt_dist) or abs(sum(interrupt_dist) - 1) > 1e-9:
        raise InvalidInput("interruptability distribution must be three probabilities summing to 1")
    if period_key not in costs.default:
        raise InvalidInput(f"no default cost for period {period_key!r}")
    p_low, p_med, p_high = interrupt_dist
    return math.fsum(
        (
            p_attend * p_low * costs.low,
            p_attend * p_med * costs.medium,
            p_attend * p_high * costs.high,
            (1 - p_attend) * costs.default[period_key],
        )
    )


# ---------------------------------------------------------------------------
# Meeting integration


@dataclass(frozen=True)
class MeetingTerm:
    """A meeting's contribution over its scope, times relative to the query."""

    scope: tuple[Duration, Duration]
    cdf: DurationCdf
    p_attend: float
    appointment_id: str = ""


def truncate_scopes(terms: Sequence[MeetingTerm]) -> list[MeetingTerm]:
    """Cut each scope at the start of the next; drop scopes left empty."""
    ordered = sorted(terms, key=lambda m: (m.scope[0], m.scope[1], m.appointment_id))
    out = []
    for i, m in enumerate(ordered):
        start, end = m.scope
        if i + 1 < len(ordered):
            end = min(end, ordered[i + 1].scope[0])
        if end > start:
            out.append(MeetingTerm((start, end), m.cdf, m.p_attend, m.appointment_id))
    return out


def evaluation_grid(horizon: Duration, resolution: Duration = 60) -> np.ndarray:
    if horizon <= 0 or resolution <= 0:
        raise InvalidInput("horizon and resolution must be positive")
    grid = np.arange(0, horizon + 1, resolution, dtype=np.int64)
    if grid[-1] != horizon:
        grid = np.append(grid, horizon)
    return grid


def mix_on_grid(f0: DurationCdf, meetings: Sequence[MeetingTerm], grid: np.ndarray) -> np.ndarray:
    """Pointwise mixture before the monotone repair.

    Inside scope ``m``: ``p_m F_m + (1 - p_m) F0``; elsewhere ``F0``.
    """
    for a, b in zip(sorted(meetings, key=lambda m: m.scope), sorted(meetings, key=lambda m: m.scope)[1:]):
        if b.scope[0] < a.scope[1]:
            raise InvalidInput(f"meeting scopes overlap: {a.appointment_id} and {b.appointment_id}")
    base = f0.evaluate(grid)
    g = base.copy()
    for m in meetings:
        if not 0 <= m.p_attend <= 1:
            raise InvalidInput("p_attend must lie in [0, 1]")
        mask = (grid >= m.scope[0]) & (grid < m.scope[1])
        if mask.any():
            g[mask] = m.p_attend * m.cdf.evaluate(grid[mask]) + (1 - m.p_attend) * base[mask]
    return g


def integrate_meetings(
    f0: DurationCdf,
    meetings: Sequence[MeetingTerm],
    horizon: Duration,
    resolution: Duration = 60,
) -> DurationCdf:
    """Fold meeting-conditioned CDFs into the no-meeting CDF over ``[0, horizon]``.

    The mixture is repaired to be monotone with a running maximum and clipped
    to [0, 1]; it is not renormalized.
    """
    grid = evaluation_grid(horizon, resolution)
    g = np.clip(np.maximum.accumulate(mix_on_grid(f0, meetings, grid)), 0.0, 1.0)
    step = f0.mode is Interp.STEP and all(m.cdf.mode is Interp.STEP for m in meetings)
    return DurationCdf(tuple(int(t) for t in grid), tuple(float(v) for v in g), Interp.STEP if step else Interp.LINEAR)


def sup_distance(a: DurationCdf, b: DurationCdf, upto: Duration) -> float:
    """Sup-norm of ``a - b`` on ``[0, upto]``, checked at every breakpoint and its left limit."""
    pts = {0, upto}
    for t in a.times + b.times:
        for x in (t - 1, t):
            if 0 <= x <= upto:
                pts.add(x)
    grid = np.array(sorted(pts), dtype=float)
    return float(np.max(np.abs(a.evaluate(grid) - b.evaluate(grid))))
