"""Wire format shared by the CLI and the HTTP service.

Requests and responses are JSON objects. Durations are integer seconds and
timestamps are RFC 3339 UTC strings (integers are accepted on input).

``forecast`` request::

    {"user": "u1", "kind": "time_until_return", "at": "2024-03-05T10:15:00Z",
     "params": {"min_stay": 900, "away": 1500}, "confidence_threshold": 0.8}

``params`` may hold ``min_stay``, ``min_absence``, ``away``, ``app``,
``capability`` and ``location``, each legal only for its query kind.

``forecast`` response::

    {"kind": ..., "cdf": [[seconds, probability], ...],
     "quantiles": {"0.5": seconds or null, "0.8": ..., "0.9": ...},
     "backoff_level": 1, "n_cases": 412, "elapsed": 1500,
     "summary": "...", "meeting_terms": [{"appointment_id": ..., "p_attend": ...}]}

``attendance`` and ``interruptability`` take ``{"user", "appointment_id"}``.
``eci`` takes ``user`` with ``at`` or ``appointment_id``; ``p_attend``,
``interrupt_dist`` and ``period_key`` override inferred values.

Errors come back as ``{"error": {"code": "NoData", "message": "..."}}``.
"""

from __future__ import annotations

import json
from typing import Any, Mapping

from .cases import DeviceFilter, QueryKind, QuerySpec
from .core import parse_ts
from .engine import ForecastResult, Snapshot, eci, forecast, interrupt_dist, p_attend
from .errors import EngineError, InvalidInput, MalformedQuery, NotFound

QUERY_KEYS = frozenset({"user", "kind", "at", "params", "confidence_threshold"})
PARAM_KEYS = frozenset({"min_stay", "min_absence", "away", "app", "capability", "location"})
ENDPOINTS = ("forecast", "attendance", "interruptability", "eci")


def encode(obj: Any) -> bytes:
    """Canonical bytes: sorted keys, no spaces, one trailing newline."""
    return (json.dumps(obj, sort_keys=True, separators=(",", ":"), ensure_ascii=False) + "\n").encode("utf-8")


def _require(payload: Mapping, key: str, kind: type | tuple[type, ...] = str):
    if key not in payload:
        raise MalformedQuery(f"missing field {key!r}")
    value = payload[key]
    if not isinstance(value, kind) or isinstance(value, bool):
        raise MalformedQuery(f"field {key!r} has the wrong type")
    return value


def _seconds(params: Mapping, key: str) -> int | None:
    v = params.get(key)
    if v is None:
        return None
    if not isinstance(v, int) or isinstance(v, bool) or v < 0:
        raise MalformedQuery(f"{key} must be a nonnegative integer number of seconds")
    return v


def _timestamp(payload: Mapping, key: str = "at") -> int:
    v = _require(payload, key, (str, int))
    try:
        return parse_ts(v)
    except (InvalidInput, ValueError) as e:
        raise MalformedQuery(f"bad timestamp for {key!r}: {e}") from None


def parse_query(payload: Mapping) -> tuple[QuerySpec, float | None]:
    if not isinstance(payload, Mapping):
        raise MalformedQuery("request body must be an object")
    unknown = set(payload) - QUERY_KEYS
    if unknown:
        raise MalformedQuery(f"unknown fields: {', '.join(sorted(unknown))}")
    user = _require(payload, "user")
    try:
        kind = QueryKind(_require(payload, "kind"))
    except ValueError:
        raise MalformedQuery(f"unknown kind {payload['kind']!r}") from None
    at = _timestamp(payload)
    params = payload.get("params") or {}
    if not isinstance(params, Mapping):
        raise MalformedQuery("params must be an object")
    unknown = set(params) - PARAM_KEYS
    if unknown:
        raise MalformedQuery(f"unknown params: {', '.join(sorted(unknown))}")
    threshold = payload.get("confidence_threshold")
    if threshold is not None and (isinstance(threshold, bool) or not isinstance(threshold, (int, float))):
        raise MalformedQuery("confidence_threshold must be a number")
    device_filter = None
    if params.get("capability") is not None or params.get("location") is not None:
        device_filter = DeviceFilter(params.get("capability"), params.get("location"))
    try:
        spec = QuerySpec(
            kind=kind,
            at=at,
            user=user,
            min_stay=_seconds(params, "min_stay"),
            min_absence=_seconds(params, "min_absence"),
            device_filter=device_filter,
            app=params.get("app"),
            away=_seconds(params, "away"),
        )
    except InvalidInput as e:
        raise MalformedQuery(str(e)) from None
    return spec, None if threshold is None else float(threshold)


def result_to_wire(result: ForecastResult) -> dict:
    return {
        "kind": result.kind.value,
        "cdf": [[int(t), float(p)] for t, p in zip(result.cdf.times, result.cdf.probs)],
        "quantiles": dict(result.quantiles),
        "backoff_level": result.backoff_level,
        "n_cases": result.n_cases,
        "elapsed": result.elapsed,
        "summary": result.summary,
        "meeting_terms": [{"appointment_id": a, "p_attend": p} for a, p in result.meeting_terms],
    }


def _appointment(snapshot: Snapshot, payload: Mapping):
    ud = snapshot.user(_require(payload, "user"))
    return ud, ud.appointment(_require(payload, "appointment_id"))


def dispatch(snapshot: Snapshot, endpoint: str, payload: Mapping) -> dict:
    """Run one request; raises :class:`EngineError` on failure."""
    if endpoint == "forecast":
        spec, threshold = parse_query(payload)
        return result_to_wire(forecast(spec, snapshot, threshold))
    if not isinstance(payload, Mapping):
        raise MalformedQuery("request body must be an object")
    if endpoint == "attendance":
        ud, appt = _appointment(snapshot, payload)
        return {"user": ud.user, "appointment_id": appt.id, "p_attend": p_attend(ud, appt, snapshot)}
    if endpoint == "interruptability":
        ud, appt = _appointment(snapshot, payload)
        low, med, high = interrupt_dist(ud, appt, snapshot)
        return {"user": ud.user, "appointment_id": appt.id, "dist": {"low": low, "medium": med, "high": high}}
    if endpoint == "eci":
        unknown = set(payload) - {"user", "at", "appointment_id", "p_attend", "interrupt_dist", "period_key"}
        if unknown:
            raise MalformedQuery(f"unknown fields: {', '.join(sorted(unknown))}")
        p = payload.get("p_attend")
        if p is not None and (isinstance(p, bool) or not isinstance(p, (int, float))):
            raise MalformedQuery("p_attend must be a number")
        dist = payload.get("interrupt_dist")
        if dist is not None and (not isinstance(dist, list) or not all(isinstance(x, (int, float)) for x in dist)):
            raise MalformedQuery("interrupt_dist must be a list of three numbers")
        return eci(
            snapshot,
            user=payload.get("user"),
            at=_timestamp(payload) if "at" in payload else None,
            appointment_id=payload.get("appointment_id"),
            p=None if p is None else float(p),
            dist=dist,
            period_key=payload.get("period_key"),
        )
    raise NotFound(f"unknown endpoint {endpoint!r}")


def error_payload(err: EngineError) -> dict:
    return {"error": {"code": err.code, "message": str(err)}}


def status_for(err: EngineError) -> int:
    if isinstance(err, NotFound):
        return 404
    if isinstance(err, InvalidInput):
        return 400
    return 422


def handle(snapshot: Snapshot, endpoint: str, payload: Mapping) -> tuple[int, dict]:
    """Status code and response object; never raises for engine errors."""
    try:
        return 200, dispatch(snapshot, endpoint, payload)
    except EngineError as e:
        return status_for(e), error_payload(e)
