"""Command-line entry point: ``presence-forecast <command> ...``."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path
from typing import Sequence

from . import api
from .cases import QueryKind, QuerySpec
from .config import EngineConfig, load_config
from .core import DeviceProfile, RawEvent, format_ts, parse_duration, parse_ts
from .distributions import sup_distance
from .engine import Snapshot, forecast
from .errors import EngineError, InvalidInput
from .meetings import draft_attendance_labels, read_annotation_form, train_model, write_annotation_form
from .store import AnnotationRecord, AppointmentRecord, DirectoryStub, Store, read_records, resolve_annotations
from .timeline import coalesce_timeline, filter_by_device

CDF_TABLE_MINUTES = (1, 2, 5, 10, 15, 20, 30, 45, 60, 90, 120, 180, 240, 360, 480)


def _records(path: str) -> list[dict]:
    if not Path(path).is_file():
        raise InvalidInput(f"no such file: {path}")
    records, dropped = read_records(Path(path))
    if dropped:
        logging.warning("%s: dropped %d malformed trailing line(s)", path, dropped)
    return records


def _out(text: str) -> None:
    sys.stdout.write(text if text.endswith("\n") else text + "\n")


# ---------------------------------------------------------------------------
# commands


def cmd_ingest(args, cfg: EngineConfig) -> int:
    store = Store(args.store)
    counts = {}
    if args.devices:
        store.save_devices(DeviceProfile.from_record(r) for r in _records(args.devices))
        counts["devices"] = len(store.load_devices())
    if args.directory:
        store.save_directory(DirectoryStub.from_records(_records(args.directory)))
        counts["directory"] = True
    if args.events:
        counts["events"] = store.append_events([RawEvent.from_record(r) for r in _records(args.events)])
    if args.calendar or args.annotations or args.annotation_form:
        if not args.user:
            raise InvalidInput("--user is required for calendar and annotation files")
    if args.calendar:
        counts["appointments"] = store.append_appointments(
            args.user, [AppointmentRecord.from_record(r) for r in _records(args.calendar)]
        )
    if args.annotations:
        counts["annotations"] = store.append_annotations(
            args.user, [AnnotationRecord.from_record(r) for r in _records(args.annotations)]
        )
    if args.annotation_form:
        counts["annotations"] = counts.get("annotations", 0) + store.append_annotations(
            args.user, read_annotation_form(args.annotation_form)
        )
    _out(json.dumps(counts, sort_keys=True))
    return 0


def cmd_coalesce(args, cfg: EngineConfig) -> int:
    store = Store(args.store)
    span = None
    if args.start or args.end:
        span = (parse_ts(args.start) if args.start else 0, parse_ts(args.end) if args.end else 2**62)
    events = store.load_range(args.user, span)
    if not events:
        raise InvalidInput(f"no events for {args.user}")
    horizon = (span[0], span[1]) if span and args.start and args.end else None
    for seg in coalesce_timeline(events, cfg.idle_threshold, horizon):
        _out(json.dumps(seg.to_record(), sort_keys=True))
    return 0


def cmd_annotate_form(args, cfg: EngineConfig) -> int:
    store = Store(args.store)
    calendar = store.load_calendar(args.user)
    existing = store.load_annotations(args.user)
    drafts = []
    if not args.no_drafts:
        devices = store.load_devices()
        office = filter_by_device(
            store.load_range(args.user), devices, lambda p: p.location == cfg.office_location
        )
        if office:
            timeline = coalesce_timeline(office, cfg.idle_threshold)
            drafts = draft_attendance_labels(calendar, timeline, cfg.f_hi, cfg.f_lo)
        if args.save_drafts and drafts:
            store.append_annotations(args.user, drafts)
    merged = resolve_annotations(list(drafts) + list(existing.values()))
    n = write_annotation_form(args.out, calendar, merged)
    _out(json.dumps({"meetings": n, "drafts": len(drafts)}, sort_keys=True))
    return 0


def _holdout(text: str | None, cfg: EngineConfig) -> int | float:
    if text is None:
        return cfg.train_holdout
    return float(text) if "." in text else int(text)


def cmd_train(args, cfg: EngineConfig) -> int:
    store = Store(args.store)
    calendar = store.load_calendar(args.user)
    annotations = store.load_annotations(args.user)
    directory = store.load_directory()
    targets = ["attendance", "interruptability"] + (["location"] if cfg.location_model else [])
    report = {}
    for target in targets:
        model, metrics = train_model(
            target, calendar, annotations, directory, args.user, cfg.taxonomy(args.user),
            _holdout(args.holdout, cfg), cfg.alpha_total, cfg.min_leaf, cfg.subject_keywords,
        )
        model.save(store.model_path(args.user, target))
        report[target] = metrics
    _out(json.dumps(report, sort_keys=True))
    return 0


def _forecast_payload(args) -> dict:
    params = {}
    for key in ("min_stay", "min_absence", "away"):
        v = getattr(args, key)
        if v is not None:
            params[key] = parse_duration(v)
    for key in ("capability", "location", "app"):
        v = getattr(args, key)
        if v is not None:
            params[key] = v
    payload = {"user": args.user, "kind": args.kind, "at": args.at, "params": params}
    if args.threshold is not None:
        payload["confidence_threshold"] = args.threshold
    return payload


def cmd_forecast(args, cfg: EngineConfig) -> int:
    snap = Snapshot.from_store(Store(args.store), cfg)
    spec, threshold = api.parse_query(_forecast_payload(args))
    result = forecast(spec, snap, threshold)
    if args.json:
        sys.stdout.buffer.write(api.encode(api.result_to_wire(result)))
        sys.stdout.flush()
        return 0
    _out(f"{result.kind.value}  elapsed {result.elapsed // 60} min  backoff level {result.backoff_level}"
         f"  cases {result.n_cases}  estimator {result.estimator}")
    _out("minutes  P(event by then)")
    for m in CDF_TABLE_MINUTES:
        if m * 60 <= cfg.horizon:
            _out(f"{m:7d}  {result.cdf(m * 60):.4f}")
    for a, p in result.meeting_terms:
        _out(f"meeting {a}: p_attend {p:.3f}")
    _out(result.summary)
    return 0


def cmd_eci(args, cfg: EngineConfig) -> int:
    payload: dict = {}
    snap = Snapshot.from_store(Store(args.store), cfg) if args.store else Snapshot(cfg, {}, {}, DirectoryStub())
    if args.user:
        payload["user"] = args.user
    if args.at:
        payload["at"] = args.at
    if args.appointment:
        payload["appointment_id"] = args.appointment
    if args.p_attend is not None:
        payload["p_attend"] = args.p_attend
    if args.dist:
        payload["interrupt_dist"] = [float(x) for x in args.dist.split(",")]
    if args.period_key:
        payload["period_key"] = args.period_key
    wire = api.dispatch(snap, "eci", payload)
    if args.json:
        sys.stdout.buffer.write(api.encode(wire))
    else:
        _out(repr(wire["eci"]))
    return 0


def cmd_evaluate(args, cfg: EngineConfig) -> int:
    from . import sim

    store = Store(args.store)
    calendar = store.load_calendar(args.user)
    annotations = store.load_annotations(args.user)
    directory = store.load_directory()
    report: dict = {}
    for target in ("attendance", "interruptability"):
        try:
            _, metrics = train_model(
                target, calendar, annotations, directory, args.user, cfg.taxonomy(args.user),
                _holdout(args.holdout, cfg), cfg.alpha_total, cfg.min_leaf, cfg.subject_keywords,
            )
            report[target] = metrics
        except EngineError as e:
            report[target] = {"error": e.code, "message": str(e)}

    profile_path = Path(args.profile) if args.profile else store.root / "sim_profile.json"
    calib: dict = {"status": "skipped", "reason": "no simulated profile"}
    if profile_path.exists():
        profile = sim.profile_from_dict(json.loads(profile_path.read_text()))
        if profile.has_meetings or profile.laptop_in_meeting or profile.evening_laptop:
            calib = {"status": "skipped", "reason": "oracle needs a meeting-free desk-only profile"}
        else:
            snap = Snapshot.from_store(store, cfg)
            spec = QuerySpec(QueryKind.TIME_UNTIL_RETURN, parse_ts(args.at), args.user,
                             min_stay=parse_duration(args.min_stay), away=parse_duration(args.away))
            result = forecast(spec, snap)
            oracle = sim.monte_carlo_oracle(profile, spec, args.samples, seed=args.seed, idle_threshold=cfg.idle_threshold)
            calib = {
                "status": "ok",
                "sup_norm": sup_distance(result.cdf, oracle, cfg.horizon),
                "n_cases": result.n_cases,
                "backoff_level": result.backoff_level,
            }
    report["calibration"] = calib
    _out(json.dumps(report, sort_keys=True))
    return 0


def cmd_simulate(args, cfg: EngineConfig) -> int:
    from dataclasses import replace

    from . import sim

    profile = sim.load_profile(args.profile)
    if args.seed is not None:
        profile = replace(profile, seed=args.seed)
    out = Path(args.out)
    if (out / "events.jsonl").exists():
        raise InvalidInput(f"{out} already holds an event log")
    events, appts, truth = sim.generate_user(profile, args.days)
    sim.write_store(Store(out), profile, events, appts, truth, annotate=not args.no_annotations)
    _out(json.dumps({"events": len(events), "appointments": len(appts), "days": args.days,
                     "first": format_ts(events[0].ts) if events else None}, sort_keys=True))
    return 0


def cmd_serve(args, cfg: EngineConfig) -> int:
    from .service import SnapshotHolder, serve

    store = Store(args.store)
    holder = SnapshotHolder(Snapshot.from_store(store, cfg), lambda: Snapshot.from_store(Store(args.store), cfg, retrain=True))
    serve(holder, args.host, args.port)
    return 0


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="presence-forecast", description="Presence and availability forecasts.")
    parser.add_argument("--config", help="engine config (JSON)")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name: str, fn, help: str, store_required: bool = True) -> argparse.ArgumentParser:
        p = sub.add_parser(name, help=help)
        p.add_argument("--store", required=store_required, help="store directory")
        p.set_defaults(fn=fn)
        return p

    p = add("ingest", cmd_ingest, "append records to a store")
    p.add_argument("--user")
    p.add_argument("--events")
    p.add_argument("--calendar")
    p.add_argument("--annotations")
    p.add_argument("--annotation-form", dest="annotation_form")
    p.add_argument("--devices")
    p.add_argument("--directory")

    p = add("coalesce", cmd_coalesce, "print a user's presence timeline")
    p.add_argument("--user", required=True)
    p.add_argument("--from", dest="start")
    p.add_argument("--to", dest="end")

    p = add("annotate-form", cmd_annotate_form, "write an editable annotation form")
    p.add_argument("--user", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--no-drafts", action="store_true")
    p.add_argument("--save-drafts", action="store_true", help="also store the draft labels")

    p = add("train", cmd_train, "train and save meeting models")
    p.add_argument("--user", required=True)
    p.add_argument("--holdout", help="trailing meetings held out: a count, or a fraction like 0.15")

    p = add("forecast", cmd_forecast, "answer a forecast query")
    p.add_argument("--user", required=True)
    p.add_argument("--kind", required=True, choices=[k.value for k in QueryKind])
    p.add_argument("--at", required=True)
    p.add_argument("--min-stay", dest="min_stay")
    p.add_argument("--min-absence", dest="min_absence")
    p.add_argument("--away")
    p.add_argument("--capability")
    p.add_argument("--location")
    p.add_argument("--app")
    p.add_argument("--threshold", type=float)
    p.add_argument("--json", action="store_true", help="print the wire result")

    p = add("eci", cmd_eci, "expected cost of interruption", store_required=False)
    p.add_argument("--user")
    p.add_argument("--at")
    p.add_argument("--appointment")
    p.add_argument("--p-attend", dest="p_attend", type=float)
    p.add_argument("--dist", help="p_low,p_med,p_high")
    p.add_argument("--period-key", dest="period_key", help="e.g. morning/weekday")
    p.add_argument("--json", action="store_true")

    p = add("evaluate", cmd_evaluate, "holdout metrics and calibration against the simulator")
    p.add_argument("--user", required=True)
    p.add_argument("--holdout")
    p.add_argument("--profile", help="simulator profile file (defaults to the one saved by simulate)")
    p.add_argument("--at", default="2024-12-16T10:15:00Z")
    p.add_argument("--away", default="10m")
    p.add_argument("--min-stay", dest="min_stay", default="0s")
    p.add_argument("--samples", type=int, default=100_000)
    p.add_argument("--seed", type=int, default=0)

    p = sub.add_parser("simulate", help="write a simulated user's store")
    p.add_argument("--out", required=True)
    p.add_argument("--days", type=int, default=180)
    p.add_argument("--seed", type=int)
    p.add_argument("--profile", default="default", help="stock profile name or profile file")
    p.add_argument("--no-annotations", action="store_true")
    p.set_defaults(fn=cmd_simulate)

    p = add("serve", cmd_serve, "run the HTTP query service")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8080)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        cfg = load_config(args.config)
        return args.fn(args, cfg)
    except EngineError as e:
        sys.stderr.write(f"{e.code}: {e}\n")
        return 1
    except (OSError, json.JSONDecodeError, KeyError) as e:
        sys.stderr.write(f"{type(e).__name__}: {e}\n")
        return 1


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
