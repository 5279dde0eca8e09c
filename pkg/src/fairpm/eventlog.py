"""Event log data model: events, traces, logs, prefix windows, and fold splits.

Logs are read from IEEE XES XML or from CSV with an explicit column mapping.
All types are immutable after construction and safe to share between threads.
"""
from __future__ import annotations

import csv
import io
import xml.etree.ElementTree as ET
from dataclasses import dataclass, field
from datetime import datetime, timezone

import numpy as np

#: Reserved activity label used to left-pad windows of short prefixes.
PAD_ACTIVITY = "__PAD__"


class _Absent:
    """Marker for a missing attribute value (never confused with None or 0)."""

    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self):
        return "ABSENT"

    def __bool__(self):
        return False


#: Returned when an event or trace does not record an attribute.
ABSENT = _Absent()


class LogValidationError(ValueError):
    """A log violates a structural contract (bad row, missing key, ...)."""


class XesParseError(ValueError):
    """Input is not well-formed XES; carries the XML line position if known."""

    def __init__(self, message, line=None, column=None):
        super().__init__(message)
        self.line = line
        self.column = column


def as_utc_ms(ts: datetime) -> datetime:
    """Normalize a timestamp to UTC and millisecond resolution."""
    if ts.tzinfo is None:
        ts = ts.replace(tzinfo=timezone.utc)
    ts = ts.astimezone(timezone.utc)
    return ts.replace(microsecond=(ts.microsecond // 1000) * 1000)


@dataclass(frozen=True)
class Event:
    case_id: str
    activity: str
    timestamp: datetime
    payload: dict = field(default_factory=dict)

    def __post_init__(self):
        if not self.activity:
            raise LogValidationError("event activity must be non-empty")

    def attr(self, name):
        """Payload lookup; returns ABSENT for attributes the event does not record."""
        return self.payload.get(name, ABSENT)


@dataclass(frozen=True)
class Trace:
    case_id: str
    events: tuple
    case_attributes: dict = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "events", tuple(self.events))
        for e in self.events:
            if e.case_id != self.case_id:
                raise LogValidationError(
                    f"event case id {e.case_id!r} does not match trace {self.case_id!r}"
                )
        for a, b in zip(self.events, self.events[1:]):
            if b.timestamp < a.timestamp:
                raise LogValidationError(
                    f"events of trace {self.case_id!r} are not ordered by timestamp"
                )

    def __len__(self):
        return len(self.events)

    def attr(self, name):
        """Case attribute lookup; returns ABSENT when unrecorded."""
        return self.case_attributes.get(name, ABSENT)


@dataclass(frozen=True)
class EventLog:
    traces: tuple
    activity_alphabet: tuple
    case_attribute_schema: tuple  # of (name, kind) with kind in {"categorical", "numeric"}

    @classmethod
    def from_traces(cls, traces) -> "EventLog":
        """Build a log, deriving the activity alphabet and case-attribute kinds."""
        traces = tuple(traces)
        activities = sorted({e.activity for t in traces for e in t.events})
        kinds: dict[str, str] = {}
        for t in traces:
            for name, value in t.case_attributes.items():
                numeric = isinstance(value, (int, float)) and not isinstance(value, bool)
                kind = "numeric" if numeric else "categorical"
                prev = kinds.get(name)
                if prev is None:
                    kinds[name] = kind
                elif prev != kind:
                    # mixed types degrade to categorical
                    kinds[name] = "categorical"
        schema = tuple(sorted(kinds.items()))
        return cls(traces=traces, activity_alphabet=tuple(activities),
                   case_attribute_schema=schema)

    def __len__(self):
        return len(self.traces)


@dataclass(frozen=True)
class Prefix:
    """A fixed-width window over the head of a trace plus the next activity.

    ``events`` holds exactly ``window`` events, left-padded with PAD events
    whose timestamp equals the first real event's (so time deltas are zero).
    ``length`` is the unpadded prefix length l; the target is the activity
    of event l+1 in the source trace.
    """

    source_case_id: str
    events: tuple
    target_activity: str
    case_attributes: dict
    length: int
    case_start: datetime


def parse_xes(data) -> EventLog:
    """Parse an IEEE XES document (bytes or str) into an EventLog.

    Trace-level ``concept:name`` becomes the case id, event-level
    ``concept:name``/``time:timestamp`` become activity and timestamp.
    Remaining trace attributes become case attributes, remaining event
    attributes payload entries.
    """
    if isinstance(data, str):
        data = data.encode("utf-8")
    try:
        root = ET.fromstring(data)
    except ET.ParseError as exc:
        line, col = exc.position if exc.position else (None, None)
        raise XesParseError(f"malformed XES XML: {exc}", line=line, column=col) from exc

    traces = []
    for idx, trace_el in enumerate(_children(root, "trace")):
        case_id = None
        case_attrs = {}
        for child in trace_el:
            tag = _local(child.tag)
            if tag == "event":
                continue
            key, value = _parse_attribute(child)
            if key is None:
                continue
            if key == "concept:name":
                case_id = str(value)
            else:
                case_attrs[key] = value
        if case_id is None:
            case_id = f"trace-{idx}"

        events = []
        for ev_el in _children(trace_el, "event"):
            activity = None
            timestamp = None
            payload = {}
            for child in ev_el:
                key, value = _parse_attribute(child)
                if key is None:
                    continue
                if key == "concept:name":
                    activity = str(value)
                elif key == "time:timestamp":
                    timestamp = value
                else:
                    payload[key] = value
            if activity is None:
                raise LogValidationError(
                    f"event without concept:name in trace {case_id!r}"
                )
            if timestamp is None:
                raise LogValidationError(
                    f"event {activity!r} without time:timestamp in trace {case_id!r}"
                )
            events.append(Event(case_id=case_id, activity=activity,
                                timestamp=timestamp, payload=payload))
        events.sort(key=lambda e: e.timestamp)  # stable: input order kept on ties
        traces.append(Trace(case_id=case_id, events=tuple(events),
                            case_attributes=case_attrs))
    return EventLog.from_traces(traces)


def write_xes(log: EventLog) -> bytes:
    """Serialize a log to XES; ``parse_xes(write_xes(log))`` is field-equal."""
    root = ET.Element("log", {"xes.version": "1.0", "xes.features": ""})
    ET.SubElement(root, "extension", {
        "name": "Concept", "prefix": "concept",
        "uri": "http://www.xes-standard.org/concept.xesext"})
    ET.SubElement(root, "extension", {
        "name": "Time", "prefix": "time",
        "uri": "http://www.xes-standard.org/time.xesext"})
    for trace in log.traces:
        trace_el = ET.SubElement(root, "trace")
        _write_attribute(trace_el, "concept:name", trace.case_id)
        for key in sorted(trace.case_attributes):
            _write_attribute(trace_el, key, trace.case_attributes[key])
        for event in trace.events:
            ev_el = ET.SubElement(trace_el, "event")
            _write_attribute(ev_el, "concept:name", event.activity)
            _write_attribute(ev_el, "time:timestamp", event.timestamp)
            for key in sorted(event.payload):
                _write_attribute(ev_el, key, event.payload[key])
    buf = io.BytesIO()
    ET.ElementTree(root).write(buf, encoding="UTF-8", xml_declaration=True)
    return buf.getvalue()


@dataclass(frozen=True)
class CsvMapping:
    """Declares the role of every CSV column; roles are never inferred."""

    case_id: str
    activity: str
    timestamp: str
    case_columns: tuple = ()
    event_columns: tuple = ()
    numeric_columns: tuple = ()  # subset of case/event columns parsed as float

    def declared(self):
        return {self.case_id, self.activity, self.timestamp,
                *self.case_columns, *self.event_columns}


def parse_csv(data, mapping: CsvMapping) -> EventLog:
    """Parse CSV rows into a log: group by case, sort by timestamp (stable).

    Case-level columns must be constant within a case; a violation raises
    LogValidationError naming the case and column.
    """
    if isinstance(data, bytes):
        data = data.decode("utf-8")
    reader = csv.DictReader(io.StringIO(data))
    if reader.fieldnames is None:
        raise LogValidationError("CSV input has no header row")
    undeclared = set(reader.fieldnames) - mapping.declared()
    if undeclared:
        raise LogValidationError(
            f"CSV columns {sorted(undeclared)} have no declared role")
    missing = mapping.declared() - set(reader.fieldnames)
    if missing:
        raise LogValidationError(f"CSV is missing mapped columns {sorted(missing)}")

    numeric = set(mapping.numeric_columns)

    def coerce(col, raw):
        if col in numeric:
            try:
                return float(raw)
            except ValueError as exc:
                raise LogValidationError(
                    f"column {col!r}: non-numeric value {raw!r}") from exc
        return raw

    by_case: dict[str, list] = {}
    case_attrs: dict[str, dict] = {}
    order: list[str] = []
    for rownum, row in enumerate(reader, start=2):
        cid = row[mapping.case_id]
        if cid not in by_case:
            by_case[cid] = []
            case_attrs[cid] = {}
            order.append(cid)
        attrs = case_attrs[cid]
        for col in mapping.case_columns:
            value = coerce(col, row[col])
            if col in attrs and attrs[col] != value:
                raise LogValidationError(
                    f"case {cid!r}: case-level column {col!r} changes value "
                    f"(row {rownum})")
            attrs[col] = value
        ts = _parse_timestamp(row[mapping.timestamp])
        payload = {col: coerce(col, row[col]) for col in mapping.event_columns}
        by_case[cid].append(Event(case_id=cid, activity=row[mapping.activity],
                                  timestamp=ts, payload=payload))

    traces = []
    for cid in order:
        events = sorted(by_case[cid], key=lambda e: e.timestamp)
        traces.append(Trace(case_id=cid, events=tuple(events),
                            case_attributes=case_attrs[cid]))
    return EventLog.from_traces(traces)


def extract_prefixes(log: EventLog, window: int = 3) -> list:
    """Slide a window over every trace, yielding one Prefix per next-activity.

    A trace of length n contributes prefixes for l = 1..n-1, each holding the
    last min(l, window) events left-padded with PAD to exactly ``window``
    events. Order is deterministic: traces in log order, l ascending.
    """
    if window < 1:
        raise ValueError("window must be >= 1")
    prefixes = []
    for trace in log.traces:
        n = len(trace.events)
        if n < 2:
            continue
        start_ts = trace.events[0].timestamp
        for l in range(1, n):
            visible = trace.events[max(0, l - window):l]
            pad_count = window - len(visible)
            if pad_count:
                pad_ts = visible[0].timestamp
                pads = tuple(Event(case_id=trace.case_id, activity=PAD_ACTIVITY,
                                   timestamp=pad_ts) for _ in range(pad_count))
                events = pads + tuple(visible)
            else:
                events = tuple(visible)
            prefixes.append(Prefix(
                source_case_id=trace.case_id,
                events=events,
                target_activity=trace.events[l].activity,
                case_attributes=trace.case_attributes,
                length=l,
                case_start=start_ts,
            ))
    return prefixes


def split_folds(log: EventLog, k: int, seed: int) -> list:
    """Partition traces into k folds; returns [(train_log, val_log), ...].

    Trace-atomic, equal-sized within one, deterministic for a fixed seed.
    """
    if k < 2:
        raise ValueError("k must be >= 2")
    n = len(log.traces)
    if k > n:
        raise ValueError(f"cannot split {n} traces into {k} folds")
    rng = np.random.default_rng(seed)
    perm = rng.permutation(n)
    folds = []
    for j in range(k):
        val_idx = set(int(i) for i in perm[j::k])
        val = [t for i, t in enumerate(log.traces) if i in val_idx]
        train = [t for i, t in enumerate(log.traces) if i not in val_idx]
        folds.append((EventLog.from_traces(train), EventLog.from_traces(val)))
    return folds


# -- XML helpers ------------------------------------------------------------

def _local(tag):
    return tag.rsplit("}", 1)[-1]


def _children(el, name):
    return [c for c in el if _local(c.tag) == name]


def _parse_attribute(el):
    tag = _local(el.tag)
    attrib = el.attrib
    key = attrib.get("key")
    if key is None or "value" not in attrib:
        return None, None
    raw = attrib["value"]
    if tag == "string":
        return key, raw
    if tag == "int":
        return key, int(raw)
    if tag == "float":
        return key, float(raw)
    if tag == "boolean":
        return key, raw.strip().lower() == "true"
    if tag == "date":
        return key, _parse_timestamp(raw)
    return None, None  # containers / unknown kinds are skipped


def _write_attribute(parent, key, value):
    if isinstance(value, datetime):
        ts = as_utc_ms(value)
        text = ts.isoformat(timespec="milliseconds").replace("+00:00", "Z")
        ET.SubElement(parent, "date", {"key": key, "value": text})
    elif isinstance(value, bool):
        ET.SubElement(parent, "boolean", {"key": key,
                                          "value": "true" if value else "false"})
    elif isinstance(value, int):
        ET.SubElement(parent, "int", {"key": key, "value": str(value)})
    elif isinstance(value, float):
        ET.SubElement(parent, "float", {"key": key, "value": repr(value)})
    else:
        ET.SubElement(parent, "string", {"key": key, "value": str(value)})


def _parse_timestamp(raw) -> datetime:
    text = raw.strip()
    if text.endswith("Z"):
        text = text[:-1] + "+00:00"
    try:
        ts = datetime.fromisoformat(text)
    except ValueError as exc:
        raise LogValidationError(f"unparseable timestamp {raw!r}") from exc
    return as_utc_ms(ts)
