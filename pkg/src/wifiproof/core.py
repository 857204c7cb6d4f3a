"""Domain types shared by every other module.

All types are immutable. Network identity is the BSSID; the SSID travels
along as metadata only.
"""

from __future__ import annotations

import enum
import functools
import math
import re
from dataclasses import dataclass, field, replace
from datetime import datetime, timedelta, timezone
from typing import Iterable, Optional

import isodate

from .errors import (
    ConfigInvalid,
    InvalidTimestamp,
    KindMismatch,
    MalformedBssid,
    OutOfRangeField,
    ValidationError,
)

UTC = timezone.utc
MIN_OBS_TIME = datetime(2000, 1, 1, tzinfo=UTC)

LocationId = str
DeviceId = str
UserId = str

_BSSID_RE = re.compile(r"^([0-9a-f]{2}:){5}[0-9a-f]{2}$")

# Channel-width codes as written by the Android scanner, plus the literal labels.
CHANNEL_WIDTHS = ("20", "40", "80", "80+80", "160")
CHANNEL_WIDTH_CODES = {"0": "20", "1": "40", "2": "80", "3": "80+80", "4": "160"}


def normalize_bssid(value: str) -> str:
    if not isinstance(value, str):
        raise MalformedBssid(repr(value))
    bssid = value.strip().lower().replace("-", ":")
    if not _BSSID_RE.match(bssid):
        raise MalformedBssid(repr(value))
    return bssid


def to_utc(value: datetime) -> datetime:
    """Convert an aware datetime to UTC, truncated to whole seconds."""
    if not isinstance(value, datetime):
        raise InvalidTimestamp(repr(value))
    if value.tzinfo is None or value.utcoffset() is None:
        raise InvalidTimestamp(f"naive datetime {value.isoformat()}")
    return value.astimezone(UTC).replace(microsecond=0)


def parse_time(text: str) -> datetime:
    """Parse an ISO-8601 timestamp; a trailing ``Z`` and naive values mean UTC."""
    try:
        value = datetime.fromisoformat(text.strip().replace("Z", "+00:00"))
    except (AttributeError, ValueError) as exc:
        raise InvalidTimestamp(repr(text)) from exc
    if value.tzinfo is None:
        value = value.replace(tzinfo=UTC)
    return to_utc(value)


def format_time(value: datetime) -> str:
    return value.astimezone(UTC).strftime("%Y-%m-%dT%H:%M:%SZ")


def parse_duration(value) -> timedelta:
    """Accept a timedelta, a number of seconds or an ISO-8601 duration string."""
    if isinstance(value, timedelta):
        return value
    if isinstance(value, (int, float)) and not isinstance(value, bool):
        return timedelta(seconds=value)
    try:
        parsed = isodate.parse_duration(str(value).strip())
    except (isodate.ISO8601Error, ValueError) as exc:
        raise ConfigInvalid(f"bad duration {value!r}") from exc
    if not isinstance(parsed, timedelta):
        raise ConfigInvalid(f"calendar durations are not supported: {value!r}")
    return parsed


def format_duration(value: timedelta) -> str:
    return isodate.duration_isoformat(value) if value else "PT0S"


@functools.total_ordering
@dataclass(frozen=True, eq=False)
class NetworkId:
    """A Wi-Fi transmitter. Equality, hashing and ordering use the BSSID only."""

    bssid: str
    ssid: str = ""

    def __eq__(self, other: object) -> bool:
        if isinstance(other, NetworkId):
            return self.bssid == other.bssid
        return NotImplemented

    def __hash__(self) -> int:
        return hash(self.bssid)

    def __lt__(self, other: "NetworkId") -> bool:
        if not isinstance(other, NetworkId):
            return NotImplemented
        return self.bssid < other.bssid

    def __str__(self) -> str:
        return self.bssid

    def normalized(self) -> "NetworkId":
        return NetworkId(normalize_bssid(self.bssid), self.ssid or "")


def network(bssid: str, ssid: str = "") -> NetworkId:
    """Build a normalized :class:`NetworkId`."""
    return NetworkId(normalize_bssid(bssid), ssid)


@dataclass(frozen=True)
class GeoFix:
    latitude: float
    longitude: float
    altitude: Optional[float] = None
    accuracy: Optional[float] = None

    def validated(self) -> "GeoFix":
        if not _finite(self.latitude) or not -90 <= self.latitude <= 90:
            raise OutOfRangeField("latitude", self.latitude)
        if not _finite(self.longitude) or not -180 <= self.longitude <= 180:
            raise OutOfRangeField("longitude", self.longitude)
        if self.altitude is not None and not _finite(self.altitude):
            raise OutOfRangeField("altitude", self.altitude)
        if self.accuracy is not None and (not _finite(self.accuracy) or self.accuracy < 0):
            raise OutOfRangeField("accuracy", self.accuracy)
        return self


@dataclass(frozen=True)
class RadioMeta:
    """Radio metadata carried for completeness; no algorithm interprets it."""

    capabilities: str = ""
    frequency: Optional[int] = None
    level: Optional[int] = None
    centerfreq0: Optional[int] = None
    centerfreq1: Optional[int] = None
    channel_width: Optional[str] = None

    def validated(self) -> "RadioMeta":
        for name in ("frequency", "level", "centerfreq0", "centerfreq1"):
            value = getattr(self, name)
            if value is not None and (isinstance(value, bool) or not isinstance(value, int)):
                raise OutOfRangeField(name, value)
        if not isinstance(self.capabilities or "", str):
            raise ValidationError("capabilities must be a string")
        if self.frequency is not None and not 2400 <= self.frequency <= 6000:
            raise OutOfRangeField("frequency", self.frequency)
        if self.level is not None and not -120 <= self.level <= 0:
            raise OutOfRangeField("level", self.level)
        for name in ("centerfreq0", "centerfreq1"):
            value = getattr(self, name)
            if value is not None and value < 0:
                raise OutOfRangeField(name, value)
        width = self.channel_width
        if width is not None:
            width = CHANNEL_WIDTH_CODES.get(str(width), str(width))
            if width not in CHANNEL_WIDTHS:
                raise OutOfRangeField("channel_width", self.channel_width)
        if width == self.channel_width and self.capabilities is not None:
            return self
        return replace(self, channel_width=width, capabilities=self.capabilities or "")


class SignalType(str, enum.Enum):
    WIFI = "WIFI"


@dataclass(frozen=True)
class Observation:
    """One row of a Wi-Fi scan: a device saw a transmitter at a location."""

    id: str
    obs_time: datetime
    location: LocationId
    device: DeviceId
    transmitter: NetworkId
    radio: RadioMeta = field(default_factory=RadioMeta)
    position: Optional[GeoFix] = None
    signal_type: SignalType = SignalType.WIFI

    @property
    def bssid(self) -> str:
        return self.transmitter.bssid


def validate_observation(raw: Observation) -> Observation:
    """Return a normalized copy of ``raw`` or raise a :class:`ValidationError`.

    Normalization lowercases the BSSID and converts ``obs_time`` to UTC at
    second precision. The function is idempotent.
    """
    if not isinstance(raw.transmitter, NetworkId):
        raise MalformedBssid(repr(raw.transmitter))
    for name in ("id", "location", "device"):
        value = getattr(raw, name)
        if not isinstance(value, str) or not value.strip():
            raise ValidationError(f"{name} must be a non-empty string")
    obs_time = to_utc(raw.obs_time)
    if obs_time < MIN_OBS_TIME:
        raise InvalidTimestamp(f"{format_time(obs_time)} precedes 2000-01-01")
    if raw.signal_type not in (SignalType.WIFI, SignalType.WIFI.value):
        raise ValidationError(f"unsupported signal type {raw.signal_type!r}")
    transmitter = raw.transmitter
    if not isinstance(transmitter.bssid, str) or transmitter.ssid is None or not _BSSID_RE.match(transmitter.bssid):
        transmitter = transmitter.normalized()
    return Observation(
        raw.id.strip(),
        obs_time,
        raw.location.strip(),
        raw.device.strip(),
        transmitter,
        raw.radio.validated(),
        raw.position.validated() if raw.position is not None else None,
        SignalType.WIFI,
    )


@dataclass(frozen=True)
class Location:
    id: LocationId
    name: str = ""
    coordinates: Optional[GeoFix] = None


@dataclass(frozen=True)
class Device:
    id: DeviceId
    name: str = ""
    user: UserId = ""


@dataclass(frozen=True)
class User:
    id: UserId
    name: str = ""


class WindowKind(str, enum.Enum):
    EPOCH = "EPOCH"
    PERIOD = "PERIOD"
    SPAN = "SPAN"


@dataclass(frozen=True)
class TimeWindow:
    """A closed time interval ``[start, end]``; membership includes both ends."""

    start: datetime
    end: datetime
    kind: WindowKind = WindowKind.SPAN

    def __post_init__(self):
        object.__setattr__(self, "start", to_utc(self.start))
        object.__setattr__(self, "end", to_utc(self.end))
        object.__setattr__(self, "kind", WindowKind(self.kind))
        if self.start > self.end:
            raise InvalidTimestamp(
                f"window start {format_time(self.start)} after end {format_time(self.end)}"
            )

    @classmethod
    def around(cls, center: datetime, delta: timedelta, kind=WindowKind.SPAN) -> "TimeWindow":
        return cls(center - delta, center + delta, kind)

    @property
    def duration(self) -> timedelta:
        return self.end - self.start

    def __contains__(self, t: datetime) -> bool:
        return self.start <= t <= self.end

    def contains_window(self, other: "TimeWindow") -> bool:
        return self.start <= other.start and other.end <= self.end

    def to_json(self) -> dict:
        return {"start": format_time(self.start), "end": format_time(self.end), "kind": self.kind.value}

    @classmethod
    def from_json(cls, data: dict, kind=None) -> "TimeWindow":
        return cls(parse_time(data["start"]), parse_time(data["end"]), kind or data.get("kind", "SPAN"))


def window_hierarchy_ok(epoch: TimeWindow, period: TimeWindow, span: TimeWindow) -> bool:
    """True iff duration(epoch) > duration(period) > duration(span)."""
    for window, kind in ((epoch, WindowKind.EPOCH), (period, WindowKind.PERIOD), (span, WindowKind.SPAN)):
        if window.kind is not kind:
            raise KindMismatch(f"expected {kind.value}, got {window.kind.value}")
    return epoch.duration > period.duration > span.duration


@dataclass(frozen=True)
class LocationClaim:
    """A prover's assertion that ``claimant`` was at ``loc`` at ``time``."""

    claimant: DeviceId
    loc: LocationId
    time: datetime
    evidence: frozenset = frozenset()
    submitted_at: Optional[datetime] = None

    def __post_init__(self):
        object.__setattr__(self, "time", to_utc(self.time))
        submitted = self.time if self.submitted_at is None else to_utc(self.submitted_at)
        object.__setattr__(self, "submitted_at", submitted)
        object.__setattr__(self, "evidence", frozenset(n.normalized() for n in self.evidence))
        if self.time > submitted:
            raise InvalidTimestamp("claim time is later than its submission time")

    def to_json(self) -> dict:
        return {
            "device": self.claimant,
            "loc": self.loc,
            "time": format_time(self.time),
            "evidence": sorted(n.bssid for n in self.evidence),
            "submitted_at": format_time(self.submitted_at),
        }

    @classmethod
    def from_json(cls, data: dict) -> "LocationClaim":
        try:
            evidence = []
            for item in data.get("evidence", []):
                if isinstance(item, dict):
                    evidence.append(network(item["bssid"], item.get("ssid", "")))
                else:
                    evidence.append(network(item))
            submitted = data.get("submitted_at")
            return cls(
                claimant=str(data["device"]),
                loc=str(data["loc"]),
                time=parse_time(data["time"]),
                evidence=frozenset(evidence),
                submitted_at=parse_time(submitted) if submitted else None,
            )
        except KeyError as exc:
            raise ValidationError(f"claim is missing field {exc.args[0]!r}") from exc
        except TypeError as exc:
            raise ValidationError(f"malformed claim: {exc}") from exc


@dataclass(frozen=True)
class LocationCertificate:
    claim: LocationClaim
    proof: bool
    proof_delta: timedelta
    span: TimeWindow
    witness_count: int
    issued_at: datetime
    engine_config_digest: str
    reason: Optional[str] = None
    candidates: tuple = ()

    def __post_init__(self):
        if self.proof_delta < timedelta(0) or self.witness_count < 0:
            raise ValidationError("proof_delta and witness_count must be non-negative")
        if self.proof:
            expected = TimeWindow.around(self.claim.time, self.proof_delta)
            if self.proof_delta <= timedelta(0) or (self.span.start, self.span.end) != (
                expected.start,
                expected.end,
            ):
                raise ValidationError("certificate span does not match claim.time +/- proof_delta")

    def to_json(self) -> dict:
        claim = self.claim.to_json()
        claim.pop("submitted_at")
        return {
            "claim": claim,
            "proof": self.proof,
            "proof_delta_seconds": int(self.proof_delta.total_seconds()),
            "span": {"start": format_time(self.span.start), "end": format_time(self.span.end)},
            "witness_count": self.witness_count,
            "issued_at": format_time(self.issued_at),
            "engine_config_digest": self.engine_config_digest,
            "reason": self.reason,
            "candidates": list(self.candidates),
        }


def _finite(x) -> bool:
    return isinstance(x, (int, float)) and math.isfinite(x)


def networks(items: Iterable[str]) -> frozenset:
    return frozenset(network(b) for b in items)
