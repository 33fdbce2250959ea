"""Normalized security events, NDJSON ingestion and time-window slicing."""

from __future__ import annotations

import bisect
import json
import logging
import re
from dataclasses import dataclass, field
from datetime import datetime, timedelta, timezone
from pathlib import Path
from typing import Any, Iterable, Iterator, Mapping, Optional, Union

logger = logging.getLogger(__name__)

Scalar = Union[str, int, float, bool, None]

_IPV4_RE = re.compile(r"^(\d{1,3})\.(\d{1,3})\.(\d{1,3})\.(\d{1,3})$")
_RFC3339_RE = re.compile(
    r"^(\d{4})-(\d{2})-(\d{2})[Tt ](\d{2}):(\d{2}):(\d{2})(\.\d+)?([Zz]|[+-]\d{2}:?\d{2})$"
)

# dotted input name -> LogEvent attribute
TYPED_FIELDS: dict[str, str] = {
    "source.ip": "source_ip",
    "destination.ip": "destination_ip",
    "destination.port": "destination_port",
    "event.dataset": "event_dataset",
    "event.module": "event_module",
    "event.code": "event_code",
    "rule.name": "rule_name",
    "rule.severity": "rule_severity",
    "http.uri": "http_uri",
    "message": "message",
}
FIELD_ALIASES = {"message.keyword": "message"}


class EventError(ValueError):
    """Base class for ingestion failures."""


class MalformedRecord(EventError):
    pass


class BadTimestamp(EventError):
    pass


class EmptyStore(EventError):
    pass


def is_ipv4(value: Any) -> bool:
    if not isinstance(value, str):
        return False
    m = _IPV4_RE.match(value)
    return bool(m) and all(int(octet) <= 255 for octet in m.groups())


def ipv4_to_int(value: str) -> int:
    """Numeric value of a dotted quad; raises ValueError for anything else."""
    if not is_ipv4(value):
        raise ValueError(f"not an IPv4 address: {value!r}")
    a, b, c, d = (int(x) for x in value.split("."))
    return (a << 24) | (b << 16) | (c << 8) | d


def canonical_ipv4(value: str) -> str:
    """Drop leading zeros from a dotted quad; other strings come back unchanged."""
    parts = value.split(".")
    if len(parts) != 4 or not all(p.isascii() and p.isdigit() for p in parts):
        return value
    return ".".join(str(int(x)) for x in parts)


def parse_timestamp(value: Any) -> datetime:
    """Parse an RFC 3339 string into an aware UTC datetime truncated to milliseconds."""
    if not isinstance(value, str):
        raise BadTimestamp(f"timestamp must be a string, got {type(value).__name__}")
    m = _RFC3339_RE.match(value.strip())
    if not m:
        raise BadTimestamp(f"unparseable timestamp {value!r}")
    year, month, day, hour, minute, second = (int(g) for g in m.groups()[:6])
    frac, offset = m.group(7), m.group(8)
    millis = int((frac[1:] + "000")[:3]) if frac else 0
    if offset in ("Z", "z"):
        tz = timezone.utc
    else:
        sign = -1 if offset[0] == "-" else 1
        digits = offset[1:].replace(":", "")
        tz = timezone(sign * timedelta(hours=int(digits[:2]), minutes=int(digits[2:])))
    try:
        ts = datetime(year, month, day, hour, minute, second, millis * 1000, tzinfo=tz)
    except ValueError as exc:
        raise BadTimestamp(f"invalid timestamp {value!r}: {exc}") from exc
    return ts.astimezone(timezone.utc)


def format_timestamp(ts: datetime) -> str:
    ts = ts.astimezone(timezone.utc)
    return ts.strftime("%Y-%m-%dT%H:%M:%S.") + f"{ts.microsecond // 1000:03d}Z"


@dataclass(frozen=True)
class LogEvent:
    timestamp: datetime
    message: str
    source_ip: Optional[str] = None
    destination_ip: Optional[str] = None
    destination_port: Optional[int] = None
    event_dataset: Optional[str] = None
    event_module: Optional[str] = None
    event_code: Optional[str] = None
    rule_name: Optional[str] = None
    rule_severity: Optional[int] = None
    http_uri: Optional[str] = None
    extra: Mapping[str, Scalar] = field(default_factory=dict)

    def get(self, name: str) -> Any:
        """Value of a dotted field name, from the typed slot or from ``extra``.

        Absent fields return None.
        """
        name = FIELD_ALIASES.get(name, name)
        if name == "@timestamp":
            return format_timestamp(self.timestamp)
        attr = TYPED_FIELDS.get(name)
        if attr is not None:
            value = getattr(self, attr)
            if value is not None:
                return value
        return self.extra.get(name)

    def to_record(self) -> dict[str, Scalar]:
        record: dict[str, Scalar] = {"@timestamp": format_timestamp(self.timestamp)}
        for dotted, attr in TYPED_FIELDS.items():
            value = getattr(self, attr)
            if value is not None:
                record[dotted] = value
        for key in sorted(self.extra):
            record.setdefault(key, self.extra[key])
        return record

    def to_json(self) -> str:
        return json.dumps(self.to_record(), ensure_ascii=False, separators=(",", ":"))


def _flatten(obj: Mapping[str, Any], prefix: str = "") -> dict[str, Scalar]:
    flat: dict[str, Scalar] = {}
    for key, value in obj.items():
        name = f"{prefix}{key}"
        if isinstance(value, dict):
            flat.update(_flatten(value, name + "."))
        elif isinstance(value, list):
            # lists are not scalars; keep them addressable as their JSON text
            flat[name] = json.dumps(value, ensure_ascii=False, separators=(",", ":"))
        else:
            flat[name] = value
    return flat


def _as_int(value: Any, name: str, lo: int, hi: int) -> int:
    if isinstance(value, bool):
        raise MalformedRecord(f"{name}: boolean is not an integer")
    if isinstance(value, str) and value.strip().lstrip("-").isdigit():
        value = int(value.strip())
    if isinstance(value, float) and value.is_integer():
        value = int(value)
    if not isinstance(value, int):
        raise MalformedRecord(f"{name}: expected integer, got {value!r}")
    if not lo <= value <= hi:
        raise MalformedRecord(f"{name}: {value} outside [{lo}, {hi}]")
    return value


def _as_str(value: Any) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float) and value.is_integer():
        return str(int(value))
    return str(value)


def parse_event(raw_record: str) -> LogEvent:
    """Parse one NDJSON line into a :class:`LogEvent`.

    Raises MalformedRecord or BadTimestamp.
    """
    try:
        obj = json.loads(raw_record)
    except (json.JSONDecodeError, TypeError) as exc:
        raise MalformedRecord(f"not valid JSON: {exc}") from exc
    if not isinstance(obj, dict):
        raise MalformedRecord("record is not a JSON object")
    flat = _flatten(obj)

    if "@timestamp" not in flat or flat["@timestamp"] is None:
        raise BadTimestamp("missing @timestamp")
    timestamp = parse_timestamp(flat.pop("@timestamp"))

    slots: dict[str, Any] = {}
    extra: dict[str, Scalar] = {}
    for name, value in flat.items():
        attr = TYPED_FIELDS.get(name)
        if attr is None:
            extra[name] = value
            continue
        if value is None:
            continue
        if attr in ("source_ip", "destination_ip"):
            if is_ipv4(value):
                slots[attr] = canonical_ipv4(value)
            else:
                extra[name] = value
        elif attr == "destination_port":
            slots[attr] = _as_int(value, name, 0, 65535)
        elif attr == "rule_severity":
            slots[attr] = _as_int(value, name, 1, 5)
        else:
            slots[attr] = _as_str(value)

    slots.setdefault("message", raw_record.rstrip("\r\n"))
    return LogEvent(timestamp=timestamp, extra=extra, **slots)


@dataclass(frozen=True)
class TimeWindow:
    """Half-open interval ``[start, end)`` in UTC."""

    start: datetime
    end: datetime

    def __post_init__(self) -> None:
        if self.start.tzinfo is None or self.end.tzinfo is None:
            raise ValueError("window bounds must be timezone-aware")
        if not self.start < self.end:
            raise ValueError(f"window start {self.start} is not before end {self.end}")

    def contains(self, ts: datetime) -> bool:
        return self.start <= ts < self.end

    @classmethod
    def parse(cls, start: str, end: str) -> "TimeWindow":
        return cls(parse_timestamp(start), parse_timestamp(end))

    def label(self) -> str:
        return f"{format_timestamp(self.start)}/{format_timestamp(self.end)}"


@dataclass(frozen=True)
class EventStore:
    scenario_id: str
    events: tuple[LogEvent, ...]
    total_ingested: int
    total_rejected: int = 0

    def __post_init__(self) -> None:
        object.__setattr__(self, "_keys", [e.timestamp for e in self.events])

    @classmethod
    def from_events(cls, scenario_id: str, events: Iterable[LogEvent], rejected: int = 0) -> "EventStore":
        # sorted() is stable: timestamp ties keep ingestion order
        ordered = tuple(sorted(events, key=lambda e: e.timestamp))
        return cls(scenario_id, ordered, len(ordered), rejected)

    def __len__(self) -> int:
        return len(self.events)

    def __iter__(self) -> Iterator[LogEvent]:
        return iter(self.events)

    def span(self) -> TimeWindow:
        """Smallest window covering every event."""
        if not self.events:
            raise EmptyStore(f"store {self.scenario_id!r} has no events")
        return TimeWindow(self.events[0].timestamp, self.events[-1].timestamp + timedelta(milliseconds=1))

    def window_slice(self, window: TimeWindow) -> list[LogEvent]:
        keys = self._keys  # type: ignore[attr-defined]
        lo = bisect.bisect_left(keys, window.start)
        hi = bisect.bisect_left(keys, window.end)
        return list(self.events[lo:hi])


def window_slice(store: EventStore, window: TimeWindow) -> list[LogEvent]:
    return store.window_slice(window)


def ingest_lines(lines: Iterable[str], scenario_id: str) -> EventStore:
    events: list[LogEvent] = []
    rejected = 0
    for lineno, line in enumerate(lines, 1):
        if not line.strip():
            continue
        try:
            events.append(parse_event(line))
        except EventError as exc:
            rejected += 1
            logger.debug("line %d rejected: %s", lineno, exc)
    if not events:
        raise EmptyStore(f"no events parsed for scenario {scenario_id!r}")
    if rejected:
        logger.info("%s: %d records rejected", scenario_id, rejected)
    return EventStore.from_events(scenario_id, events, rejected)


def ingest_ndjson(path: Union[str, Path], scenario_id: str) -> EventStore:
    """Load an NDJSON file into an :class:`EventStore`.

    Blank lines are not records. Raises OSError if the file cannot be read
    and EmptyStore if no line parses.
    """
    with open(path, encoding="utf-8") as fh:
        return ingest_lines(fh, scenario_id)


def sliding_windows(span: TimeWindow, minutes: int) -> list[TimeWindow]:
    """Consecutive windows of ``minutes`` covering ``span``.

    A trailing remainder shorter than half a window is folded into the
    previous window instead of becoming a sliver of its own.
    """
    if minutes <= 0:
        raise ValueError("window length must be positive")
    step = timedelta(minutes=minutes)
    bounds = [span.start]
    while bounds[-1] + step < span.end:
        bounds.append(bounds[-1] + step)
    if len(bounds) > 1 and span.end - bounds[-1] < step / 2:
        bounds.pop()
    bounds.append(span.end)
    return [TimeWindow(a, b) for a, b in zip(bounds, bounds[1:])]
