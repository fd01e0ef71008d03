"""Appointment features, draft attendance labels, and meeting models."""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping, Sequence

from .core import PresenceSegment, State, Taxonomy, classify_time_period, format_ts
from .errors import InvalidInput, ModelDegenerate
from .learn import Attribute, Dataset, DecisionTree, evaluate_holdout, learn_tree, predict_distribution
from .store import (
    AnnotationRecord,
    AnnotationSource,
    AppointmentRecord,
    BusyFlag,
    DirectoryStub,
    Interruptability,
    ResponseStatus,
    UserRole,
)
from .cases import CONTEXT_DOMAINS

DEFAULT_SUBJECT_KEYWORDS: tuple[tuple[str, str], ...] = (
    ("1:1", "one_on_one"),
    ("one on one", "one_on_one"),
    ("all hands", "all_hands"),
    ("review", "review"),
    ("interview", "interview"),
    ("sync", "sync"),
    ("seminar", "talk"),
    ("talk", "talk"),
)

DURATION_BINS = ("le30", "31-60", "61-120", "gt120")
ATTENDEE_BINS = ("1-2", "3-5", "6-10", "gt10")
RELATIONS = ("self", "manager", "manager_of_manager", "direct_report", "peer", "other")
BOOL = ("false", "true")


def _b(x: bool) -> str:
    return "true" if x else "false"


@dataclass(frozen=True)
class AppointmentFeatures:
    organized_by_alias: bool
    duration_bin: str
    role: UserRole
    response_status: ResponseStatus
    recurrent: bool
    busy_flag: bool
    attendee_count_bin: str
    direct_reports_invited: bool
    organizer_relation: str
    location_known: bool
    subject_token_class: str
    period: str
    day_class: str

    def as_attributes(self) -> dict[str, str]:
        return {
            "organized_by_alias": _b(self.organized_by_alias),
            "duration_bin": self.duration_bin,
            "role": self.role.value,
            "response_status": self.response_status.value,
            "recurrent": _b(self.recurrent),
            "busy_flag": _b(self.busy_flag),
            "attendee_count_bin": self.attendee_count_bin,
            "direct_reports_invited": _b(self.direct_reports_invited),
            "organizer_relation": self.organizer_relation,
            "location_known": _b(self.location_known),
            "subject_token_class": self.subject_token_class,
            "period": self.period,
            "day_class": self.day_class,
        }


def feature_schema(keywords: Sequence[tuple[str, str]] = DEFAULT_SUBJECT_KEYWORDS) -> tuple[Attribute, ...]:
    subject_classes = tuple(dict.fromkeys(cls for _, cls in keywords)) + ("other",)
    return (
        Attribute("organized_by_alias", BOOL),
        Attribute("duration_bin", DURATION_BINS),
        Attribute("role", tuple(r.value for r in UserRole)),
        Attribute("response_status", tuple(s.value for s in ResponseStatus)),
        Attribute("recurrent", BOOL),
        Attribute("busy_flag", BOOL),
        Attribute("attendee_count_bin", ATTENDEE_BINS),
        Attribute("direct_reports_invited", BOOL),
        Attribute("organizer_relation", RELATIONS),
        Attribute("location_known", BOOL),
        Attribute("subject_token_class", subject_classes),
        Attribute("period", CONTEXT_DOMAINS["period"]),
        Attribute("day_class", CONTEXT_DOMAINS["day_class"]),
    )


def _duration_bin(seconds: int) -> str:
    minutes = seconds / 60
    if minutes <= 30:
        return "le30"
    if minutes <= 60:
        return "31-60"
    if minutes <= 120:
        return "61-120"
    return "gt120"


def _attendee_bin(n: int) -> str:
    if n <= 2:
        return "1-2"
    if n <= 5:
        return "3-5"
    if n <= 10:
        return "6-10"
    return "gt10"


def organizer_relation(organizer: str, user: str, directory: DirectoryStub) -> str:
    if organizer == user:
        return "self"
    mgr = directory.manager_of(user)
    if mgr is not None and organizer == mgr:
        return "manager"
    if mgr is not None and organizer == directory.manager_of(mgr):
        return "manager_of_manager"
    org_mgr = directory.manager_of(organizer)
    if org_mgr == user:
        return "direct_report"
    if mgr is not None and org_mgr == mgr:
        return "peer"
    return "other"


def subject_class(subject: str, keywords: Sequence[tuple[str, str]] = DEFAULT_SUBJECT_KEYWORDS) -> str:
    low = subject.lower()
    for token, cls in keywords:
        if token in low:
            return cls
    return "other"


def extract_features(
    appt: AppointmentRecord,
    directory: DirectoryStub,
    user: str,
    taxonomy: Taxonomy,
    keywords: Sequence[tuple[str, str]] = DEFAULT_SUBJECT_KEYWORDS,
) -> AppointmentFeatures:
    tp = classify_time_period(appt.start, taxonomy)
    return AppointmentFeatures(
        organized_by_alias=appt.organizer in directory.aliases,
        duration_bin=_duration_bin(appt.end - appt.start),
        role=appt.user_role,
        response_status=appt.response_status,
        recurrent=appt.recurrent,
        busy_flag=appt.busy_flag is BusyFlag.BUSY,
        attendee_count_bin=_attendee_bin(len(appt.attendees)),
        direct_reports_invited=any(directory.manager_of(a) == user for a in appt.attendees),
        organizer_relation=organizer_relation(appt.organizer, user, directory),
        location_known=bool(appt.location_field.strip()),
        subject_token_class=subject_class(appt.subject, keywords),
        period=tp.period.value,
        day_class=tp.day_class.value,
    )


# ---------------------------------------------------------------------------
# Draft labels


def activity_coverage(appt: AppointmentRecord, timeline: Sequence[PresenceSegment]) -> float:
    covered = 0
    for seg in timeline:
        if seg.end <= appt.start:
            continue
        if seg.start >= appt.end:
            break
        if seg.state is State.PRESENT:
            covered += min(seg.end, appt.end) - max(seg.start, appt.start)
    return covered / (appt.end - appt.start)


def draft_attendance_labels(
    calendar: Iterable[AppointmentRecord],
    office_timeline: Sequence[PresenceSegment],
    f_hi: float = 0.5,
    f_lo: float = 0.1,
) -> list[AnnotationRecord]:
    """Guess attendance from desk activity during each meeting.

    Activity through at least ``f_hi`` of a meeting suggests it was skipped;
    activity through at most ``f_lo`` suggests it was attended. Meetings in
    between, or outside the logged timeline, get no draft.
    """
    if not 0 <= f_lo < f_hi <= 1:
        raise InvalidInput("need 0 <= f_lo < f_hi <= 1")
    if not office_timeline:
        return []
    lo, hi = office_timeline[0].start, office_timeline[-1].end
    out = []
    for appt in calendar:
        if appt.start < lo or appt.end > hi:
            continue
        f = activity_coverage(appt, office_timeline)
        if f >= f_hi:
            out.append(AnnotationRecord(appt.id, attended=False, source=AnnotationSource.HEURISTIC_DRAFT))
        elif f <= f_lo:
            out.append(AnnotationRecord(appt.id, attended=True, source=AnnotationSource.HEURISTIC_DRAFT))
    return out


FORM_FIELDS = ("appointment_id", "start", "end", "subject", "attended", "interruptability", "location")


def write_annotation_form(
    path: str | Path,
    calendar: Iterable[AppointmentRecord],
    annotations: Mapping[str, AnnotationRecord],
) -> int:
    """One editable line per meeting, in order of occurrence, prefilled from ``annotations``."""
    rows = []
    for appt in sorted(calendar, key=lambda a: (a.start, a.id)):
        ann = annotations.get(appt.id)
        rows.append(
            {
                "appointment_id": appt.id,
                "start": format_ts(appt.start),
                "end": format_ts(appt.end),
                "subject": appt.subject,
                "attended": ann.attended if ann else None,
                "interruptability": ann.interruptability.value if ann and ann.interruptability else None,
                "location": ann.location if ann else None,
            }
        )
    Path(path).write_text("".join(json.dumps(r, ensure_ascii=False) + "\n" for r in rows), encoding="utf-8")
    return len(rows)


def read_annotation_form(path: str | Path) -> list[AnnotationRecord]:
    """Rows with at least one filled field, as manual annotations."""
    out = []
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        if not line.strip():
            continue
        row = json.loads(line)
        level = row.get("interruptability")
        if row.get("attended") is None and not level and not row.get("location"):
            continue
        out.append(
            AnnotationRecord(
                row["appointment_id"],
                attended=row.get("attended"),
                interruptability=Interruptability(level) if level else None,
                location=row.get("location") or None,
                source=AnnotationSource.MANUAL,
            )
        )
    return out


# ---------------------------------------------------------------------------
# Models

ATTENDANCE_CLASSES = ("not_attended", "attended")
INTERRUPT_CLASSES = tuple(i.value for i in Interruptability)


@dataclass
class MeetingModel:
    """A decision tree over appointment features for one annotated target."""

    target: str
    tree: DecisionTree
    keywords: tuple[tuple[str, str], ...] = DEFAULT_SUBJECT_KEYWORDS

    def features(self, appt: AppointmentRecord, directory: DirectoryStub, user: str, taxonomy: Taxonomy) -> dict[str, str]:
        return extract_features(appt, directory, user, taxonomy, self.keywords).as_attributes()

    def predict(self, appt: AppointmentRecord, directory: DirectoryStub, user: str, taxonomy: Taxonomy) -> tuple[float, ...]:
        return predict_distribution(self.tree, self.features(appt, directory, user, taxonomy))

    def save(self, path: str | Path) -> None:
        head = {"target": self.target, "keywords": [list(k) for k in self.keywords]}
        records = [head] + self.tree.to_records()
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text("".join(json.dumps(r, separators=(",", ":")) + "\n" for r in records))

    @classmethod
    def load(cls, path: str | Path) -> "MeetingModel":
        head, *rest = [json.loads(x) for x in Path(path).read_text().splitlines() if x.strip()]
        return cls(head["target"], DecisionTree.from_records(rest), tuple(tuple(k) for k in head["keywords"]))


AttendanceModel = MeetingModel
InterruptabilityModel = MeetingModel


def _label(target: str, ann: AnnotationRecord | None, classes: Sequence[str]) -> int | None:
    if ann is None:
        return None
    if target == "attendance":
        return None if ann.attended is None else int(ann.attended)
    if target == "interruptability":
        return None if ann.interruptability is None else classes.index(ann.interruptability.value)
    if target == "location":
        return None if ann.location is None else classes.index(ann.location)
    raise InvalidInput(f"unknown target {target!r}")


def train_model(
    target: str,
    calendar: Sequence[AppointmentRecord],
    annotations: Mapping[str, AnnotationRecord],
    directory: DirectoryStub,
    user: str,
    taxonomy: Taxonomy,
    holdout: int | float = 0.15,
    alpha_total: float | None = None,
    min_leaf: int = 5,
    keywords: Sequence[tuple[str, str]] = DEFAULT_SUBJECT_KEYWORDS,
) -> tuple[MeetingModel, dict | None]:
    """Train on the chronologically earlier labeled meetings, score the rest.

    ``holdout`` is a count of trailing meetings (int) or a fraction (float).
    Returns the model and holdout metrics (None when the holdout is empty).
    """
    if target == "attendance":
        classes: tuple[str, ...] = ATTENDANCE_CLASSES
    elif target == "interruptability":
        classes = INTERRUPT_CLASSES
    elif target == "location":
        classes = tuple(sorted({a.location for a in annotations.values() if a.location}))
        if len(classes) < 2:
            raise ModelDegenerate("need at least two annotated locations")
    else:
        raise InvalidInput(f"unknown target {target!r}")

    keywords = tuple(tuple(k) for k in keywords)
    schema = feature_schema(keywords)
    labeled = []
    for appt in sorted(calendar, key=lambda a: (a.start, a.id)):
        label = _label(target, annotations.get(appt.id), classes)
        if label is not None:
            attrs = extract_features(appt, directory, user, taxonomy, keywords).as_attributes()
            labeled.append((attrs, label))

    n_hold = holdout if isinstance(holdout, int) else int(round(holdout * len(labeled)))
    if not 0 <= n_hold < len(labeled):
        raise ModelDegenerate(f"{len(labeled)} labeled meetings cannot support a holdout of {n_hold}")
    train_rows = labeled[: len(labeled) - n_hold]
    present = {label for _, label in train_rows}
    missing = [c for i, c in enumerate(classes) if i not in present]
    if missing:
        raise ModelDegenerate(f"{target}: no training cases for {', '.join(missing)}")

    train = Dataset.from_dicts(schema, train_rows, len(classes), classes)
    tree = learn_tree(train, alpha_total, min_leaf)
    model = MeetingModel(target, tree, keywords)
    metrics = None
    if n_hold:
        hold = Dataset.from_dicts(schema, labeled[len(labeled) - n_hold :], len(classes), classes)
        metrics = evaluate_holdout(tree, hold)
        metrics["n_train"] = len(train_rows)
    return model, metrics


def train_attendance_model(calendar, annotations, directory, user, taxonomy, holdout: int | float = 0.15, **kw):
    return train_model("attendance", calendar, annotations, directory, user, taxonomy, holdout, **kw)


def train_interruptability_model(calendar, annotations, directory, user, taxonomy, holdout: int | float = 0.15, **kw):
    return train_model("interruptability", calendar, annotations, directory, user, taxonomy, holdout, **kw)


def predict_attendance(model: MeetingModel, appt: AppointmentRecord, directory: DirectoryStub, user: str, taxonomy: Taxonomy) -> float:
    if model.target != "attendance":
        raise InvalidInput("not an attendance model")
    return model.predict(appt, directory, user, taxonomy)[1]


def predict_interruptability(
    model: MeetingModel, appt: AppointmentRecord, directory: DirectoryStub, user: str, taxonomy: Taxonomy
) -> tuple[float, float, float]:
    if model.target != "interruptability":
        raise InvalidInput("not an interruptability model")
    p = model.predict(appt, directory, user, taxonomy)
    return p[0], p[1], p[2]
