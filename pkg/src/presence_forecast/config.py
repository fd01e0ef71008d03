"""Engine configuration: every tunable default in one JSON document."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Any, Mapping

from .cases import DEFAULT_LADDER, BackoffPolicy
from .core import DEFAULT_PERIODS, DayClass, Period, Taxonomy
from .distributions import InterruptCosts
from .errors import InvalidInput
from .learn import DEFAULT_BIN_EDGES_MIN, DurationBinning
from .meetings import DEFAULT_SUBJECT_KEYWORDS
from .timeline import DEFAULT_IDLE_THRESHOLD


def _default_costs() -> dict:
    return {"low": 10.0, "medium": 4.0, "high": 1.0, "default": 2.0}


@dataclass(frozen=True)
class EngineConfig:
    idle_threshold: int = DEFAULT_IDLE_THRESHOLD
    periods: tuple[tuple[str, str, str], ...] = DEFAULT_PERIODS
    utc_offsets: Mapping[str, int] = field(default_factory=dict)
    ladder: tuple[tuple[str, ...], ...] = DEFAULT_LADDER
    n_min: int = 25
    alpha_total: float | None = None
    min_leaf: int = 5
    bin_edges_min: tuple[float, ...] = DEFAULT_BIN_EDGES_MIN
    n_tree: int = 100
    include_censored: bool = False
    scope_padding: int = 900
    horizon: int = 8 * 3600
    grid_resolution: int = 60
    confidence_threshold: float = 0.8
    f_hi: float = 0.5
    f_lo: float = 0.1
    subject_keywords: tuple[tuple[str, str], ...] = DEFAULT_SUBJECT_KEYWORDS
    costs: Mapping[str, Any] = field(default_factory=_default_costs)
    train_holdout: float | int = 0.15
    location_model: bool = False
    office_location: str = "office"

    def __post_init__(self):
        for name in ("periods", "ladder", "bin_edges_min", "subject_keywords"):
            object.__setattr__(self, name, tuple(tuple(x) if isinstance(x, (list, tuple)) else x for x in getattr(self, name)))
        object.__setattr__(self, "utc_offsets", dict(self.utc_offsets))
        object.__setattr__(self, "costs", dict(self.costs))
        if self.idle_threshold <= 0:
            raise InvalidInput("idle_threshold must be positive")
        if not 0 < self.confidence_threshold <= 1:
            raise InvalidInput("confidence_threshold must lie in (0, 1]")
        if self.horizon <= 0 or self.grid_resolution <= 0 or self.scope_padding < 0:
            raise InvalidInput("horizon and grid resolution must be positive, padding nonnegative")
        if not 0 <= self.f_lo < self.f_hi <= 1:
            raise InvalidInput("need 0 <= f_lo < f_hi <= 1")
        # fail at load time, not at first query
        self.taxonomy()
        self.policy()
        self.binning()
        self.interrupt_costs()

    def taxonomy(self, user: str | None = None) -> Taxonomy:
        return Taxonomy.from_config(self.periods, self.utc_offsets.get(user, 0) if user else 0)

    def policy(self) -> BackoffPolicy:
        return BackoffPolicy(tuple(tuple(level) for level in self.ladder), self.n_min)

    def binning(self) -> DurationBinning:
        return DurationBinning(tuple(self.bin_edges_min))

    def interrupt_costs(self) -> InterruptCosts:
        c = self.costs
        default = c.get("default", 2.0)
        if isinstance(default, Mapping):
            table = {str(k): float(v) for k, v in default.items()}
        else:
            table = {f"{p.value}/{d.value}": float(default) for p in Period for d in DayClass}
        return InterruptCosts(float(c["low"]), float(c["medium"]), float(c["high"]), table)

    def to_dict(self) -> dict:
        d = asdict(self)
        for k, v in d.items():
            if isinstance(v, tuple):
                d[k] = [list(x) if isinstance(x, tuple) else x for x in v]
        return d

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "EngineConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise InvalidInput(f"unknown config keys: {', '.join(sorted(unknown))}")
        return cls(**dict(data))


def load_config(path: str | Path | None) -> EngineConfig:
    if path is None:
        return EngineConfig()
    try:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as e:
        raise InvalidInput(f"config {path}: {e}") from None
    return EngineConfig.from_dict(data)
