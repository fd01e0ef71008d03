"""Presence and availability forecasting from activity logs and calendars."""

from .cases import (
    BackoffPolicy,
    Case,
    CalendarStatus,
    ContextAttributes,
    DeviceFilter,
    Landmark,
    QueryKind,
    QuerySpec,
    build_reference_class,
    extract_cases,
    proximal_context,
)
from .config import EngineConfig, load_config
from .core import (
    DeviceProfile,
    EventKind,
    PresenceSegment,
    RawEvent,
    State,
    Taxonomy,
    TimePeriod,
    classify_time_period,
    format_ts,
    parse_duration,
    parse_ts,
)
from .distributions import (
    DurationCdf,
    InterruptCosts,
    MeetingTerm,
    cdf_from_leaf,
    condition_on_elapsed,
    empirical_cdf,
    expected_cost_of_interruption,
    integrate_meetings,
    quantile,
)
from .engine import ForecastResult, Snapshot, forecast
from .errors import (
    EngineError,
    InsufficientHistory,
    InvalidInput,
    MalformedQuery,
    ModelDegenerate,
    NoData,
    NotFound,
    NoSurvivingMass,
    OutOfOrder,
    QuantileUnattainable,
)
from .learn import DecisionTree, DurationBinning, bin_duration, evaluate_holdout, leaf_score, learn_tree, predict_distribution
from .store import AnnotationRecord, AppointmentRecord, DirectoryStub, EventLog, Store
from .timeline import coalesce_timeline

__version__ = "0.1.0"

__all__ = [
    "AnnotationRecord",
    "AppointmentRecord",
    "BackoffPolicy",
    "CalendarStatus",
    "Case",
    "ContextAttributes",
    "DecisionTree",
    "DeviceFilter",
    "DeviceProfile",
    "DirectoryStub",
    "DurationBinning",
    "DurationCdf",
    "EngineConfig",
    "EngineError",
    "EventKind",
    "EventLog",
    "ForecastResult",
    "InsufficientHistory",
    "InterruptCosts",
    "InvalidInput",
    "Landmark",
    "MalformedQuery",
    "MeetingTerm",
    "ModelDegenerate",
    "NoData",
    "NoSurvivingMass",
    "NotFound",
    "OutOfOrder",
    "PresenceSegment",
    "QuantileUnattainable",
    "QueryKind",
    "QuerySpec",
    "RawEvent",
    "Snapshot",
    "State",
    "Store",
    "Taxonomy",
    "TimePeriod",
    "bin_duration",
    "build_reference_class",
    "cdf_from_leaf",
    "classify_time_period",
    "coalesce_timeline",
    "condition_on_elapsed",
    "empirical_cdf",
    "evaluate_holdout",
    "expected_cost_of_interruption",
    "extract_cases",
    "forecast",
    "format_ts",
    "integrate_meetings",
    "leaf_score",
    "learn_tree",
    "load_config",
    "parse_duration",
    "parse_ts",
    "predict_distribution",
    "proximal_context",
    "quantile",
]
