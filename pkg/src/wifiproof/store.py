"""Append-only observation store, CSV ingestion and the select/project/order
query vocabulary used by the set algorithms.

On disk a store is a directory holding ``observations.log`` (one canonical
JSON record per line, append-only) and ``registry.json`` (locations, devices
and users). The in-memory index is rebuilt when the directory is opened.

Readers work on immutable :class:`StoreSnapshot` objects. Writers serialize
on a lock and publish a fresh snapshot when a batch is committed, so a query
never sees a half-applied batch.
"""

from __future__ import annotations

import bisect
import csv
import heapq
import io
import json
import logging
import os
import threading
from collections import Counter
from dataclasses import dataclass, field
from datetime import date, datetime, time
from pathlib import Path
from types import MappingProxyType
from typing import IO, Iterable, Iterator, Mapping, Optional, Sequence, Union
from zoneinfo import ZoneInfo

from .core import (
    CHANNEL_WIDTH_CODES,
    Device,
    DeviceId,
    GeoFix,
    Location,
    LocationId,
    NetworkId,
    Observation,
    RadioMeta,
    TimeWindow,
    User,
    format_time,
    parse_time,
    validate_observation,
)
from .errors import (
    DuplicateId,
    EmptyFilter,
    EmptySource,
    InvalidTimestamp,
    MalformedBssid,
    MissingColumn,
    OutOfRangeField,
    ProofError,
    UnknownDevice,
    UnknownLocation,
    ValidationError,
    reason_tag,
)

log = logging.getLogger(__name__)

CSV_COLUMNS = (
    "device_id",
    "date",
    "time",
    "ref_name",
    "latitude",
    "longitude",
    "altitude",
    "accuracy",
    "SSID",
    "BSSID",
    "capabilities",
    "frequency",
    "level",
    "centerfreq0",
    "centerfreq1",
    "channelwidth",
)

# Local clock of the collection sites; date/time columns are fused in this zone.
SOURCE_TZ = ZoneInfo("Europe/Lisbon")

LOG_NAME = "observations.log"
REGISTRY_NAME = "registry.json"


@dataclass
class IngestReport:
    accepted: int = 0
    rejected: int = 0
    reasons: Counter = field(default_factory=Counter)

    def reject(self, tag: str) -> None:
        self.rejected += 1
        self.reasons[tag] += 1

    def __add__(self, other: "IngestReport") -> "IngestReport":
        return IngestReport(
            self.accepted + other.accepted,
            self.rejected + other.rejected,
            self.reasons + other.reasons,
        )

    def to_json(self) -> dict:
        return {
            "accepted": self.accepted,
            "rejected": self.rejected,
            "reasons": dict(sorted(self.reasons.items())),
        }


@dataclass(frozen=True)
class ObsFilter:
    time_window: Optional[TimeWindow] = None
    location: Optional[LocationId] = None
    device: Optional[DeviceId] = None

    def is_empty(self) -> bool:
        return self.time_window is None and self.location is None and self.device is None


def _sort_key(o: Observation):
    return (o.obs_time, o.device, o.transmitter.bssid)


class StoreSnapshot:
    """Immutable view of a store at one instant."""

    def __init__(self, by_location, locations, devices, users):
        self._by_location: Mapping[LocationId, tuple] = MappingProxyType(by_location)
        self._times = {loc: [o.obs_time for o in rows] for loc, rows in by_location.items()}
        self.locations: Mapping[LocationId, Location] = MappingProxyType(dict(locations))
        self.devices: Mapping[DeviceId, Device] = MappingProxyType(dict(devices))
        self.users: Mapping[str, User] = MappingProxyType(dict(users))

    def snapshot(self) -> "StoreSnapshot":
        return self

    def __len__(self) -> int:
        return sum(len(rows) for rows in self._by_location.values())

    def observations(self) -> list:
        """Every observation, ordered by (location, obs_time, device, bssid)."""
        out = []
        for loc in sorted(self._by_location):
            out.extend(self._by_location[loc])
        return out

    def observed_locations(self) -> list:
        return sorted(loc for loc, rows in self._by_location.items() if rows)

    def query(self, flt: ObsFilter) -> list:
        """Select observations matching every set field of ``flt``.

        Results are ordered by (location, obs_time, device, bssid).
        """
        if flt.is_empty():
            raise EmptyFilter("at least one filter field must be set")
        if flt.location is not None and flt.location not in self.locations:
            raise UnknownLocation(flt.location)
        if flt.device is not None and flt.device not in self.devices:
            raise UnknownDevice(flt.device)
        locs = [flt.location] if flt.location is not None else sorted(self._by_location)
        out = []
        for loc in locs:
            rows = self._by_location.get(loc, ())
            if flt.time_window is not None:
                times = self._times[loc] if rows else []
                lo = bisect.bisect_left(times, flt.time_window.start)
                hi = bisect.bisect_right(times, flt.time_window.end)
                rows = rows[lo:hi]
            if flt.device is not None:
                rows = [o for o in rows if o.device == flt.device]
            out.extend(rows)
        return out

    def time_range(self) -> Optional[TimeWindow]:
        firsts = [rows[0].obs_time for rows in self._by_location.values() if rows]
        lasts = [rows[-1].obs_time for rows in self._by_location.values() if rows]
        if not firsts:
            return None
        return TimeWindow(min(firsts), max(lasts))


def distinct_transmitters(obs: Iterable[Observation]) -> frozenset:
    return frozenset(o.transmitter for o in obs)


def occurrence_counts(obs: Iterable[Observation]) -> Counter:
    return Counter(o.transmitter for o in obs)


class ObservationStore:
    """Observation store, optionally persisted to a directory.

    >>> store = ObservationStore()          # in memory
    >>> store = ObservationStore.open(path) # persisted, index rebuilt from the log
    """

    def __init__(self, path: Union[str, os.PathLike, None] = None):
        self.path = Path(path) if path is not None else None
        self._lock = threading.Lock()
        self._ids: set = set()
        self._locations: dict = {}
        self._devices: dict = {}
        self._users: dict = {}
        self._rows: dict = {}
        self._snapshot = StoreSnapshot({}, {}, {}, {})
        if self.path is not None:
            self.path.mkdir(parents=True, exist_ok=True)
            self._load()

    @classmethod
    def open(cls, path) -> "ObservationStore":
        return cls(path)

    # -- reading -----------------------------------------------------------

    def snapshot(self) -> StoreSnapshot:
        return self._snapshot

    def query(self, flt: ObsFilter) -> list:
        return self._snapshot.query(flt)

    def __len__(self) -> int:
        return len(self._snapshot)

    # -- writing -----------------------------------------------------------

    def register_location(self, location: Location) -> None:
        with self._lock:
            self._locations[location.id] = location
            self._publish()
            self._save_registry()

    def register_device(self, device: Device, user: Optional[User] = None) -> None:
        with self._lock:
            self._devices[device.id] = device
            if user is not None:
                self._users[user.id] = user
            elif device.user and device.user not in self._users:
                self._users[device.user] = User(device.user, device.user)
            self._publish()
            self._save_registry()

    def append(self, observations: Iterable[Observation], report: Optional[IngestReport] = None) -> IngestReport:
        """Validate and append a batch; invalid observations are counted, not raised.

        Observations with an empty ``id`` receive a store-assigned sequential id.
        Unknown locations and devices are registered on the fly.
        """
        report = report if report is not None else IngestReport()
        with self._lock:
            accepted = []
            batch_ids = set()
            seq = len(self._ids)
            registry_changed = False
            for raw in observations:
                if not raw.id:
                    seq += 1
                    while f"obs-{seq:08d}" in self._ids or f"obs-{seq:08d}" in batch_ids:
                        seq += 1
                    raw = _with_id(raw, f"obs-{seq:08d}")
                try:
                    obs = validate_observation(raw)
                    if obs.id in self._ids or obs.id in batch_ids:
                        raise DuplicateId(obs.id)
                except ProofError as exc:
                    report.reject(reason_tag(exc))
                    continue
                batch_ids.add(obs.id)
                accepted.append(obs)
                registry_changed |= self._auto_register(obs)
            if accepted:
                self._write_log(accepted)
                self._ids |= batch_ids
                by_loc: dict = {}
                for obs in accepted:
                    by_loc.setdefault(obs.location, []).append(obs)
                for loc, new in by_loc.items():
                    new.sort(key=_sort_key)
                    self._rows[loc] = tuple(heapq.merge(self._rows.get(loc, ()), new, key=_sort_key))
            if registry_changed:
                self._save_registry()
            if accepted or registry_changed:
                self._publish()
            report.accepted += len(accepted)
        return report

    def ingest_csv(self, source: Union[bytes, IO[bytes], IO[str]], device_hint: Optional[DeviceId] = None) -> IngestReport:
        """Parse an LXspots-style CSV stream and append every valid row.

        The delimiter is sniffed among comma, semicolon and tab. ``device_hint``
        fills rows whose ``device_id`` column is blank.
        """
        report = IngestReport()
        observations = []
        for item in parse_csv(source, device_hint=device_hint):
            if isinstance(item, Observation):
                observations.append(item)
            else:
                report.reject(item)
        return self.append(observations, report)

    # -- internals ---------------------------------------------------------

    def _auto_register(self, obs: Observation) -> bool:
        changed = False
        if obs.location not in self._locations:
            self._locations[obs.location] = Location(obs.location, obs.location, obs.position)
            changed = True
        if obs.device not in self._devices:
            self._devices[obs.device] = Device(obs.device, obs.device, obs.device)
            if obs.device not in self._users:
                self._users[obs.device] = User(obs.device, obs.device)
            changed = True
        return changed

    def _publish(self) -> None:
        self._snapshot = StoreSnapshot(dict(self._rows), self._locations, self._devices, self._users)

    def _write_log(self, observations: Sequence[Observation]) -> None:
        if self.path is None:
            return
        with open(self.path / LOG_NAME, "a", encoding="utf-8") as fh:
            for obs in observations:
                fh.write(json.dumps(observation_to_record(obs), sort_keys=True, separators=(",", ":")))
                fh.write("\n")
            fh.flush()
            os.fsync(fh.fileno())

    def _save_registry(self) -> None:
        if self.path is None:
            return
        doc = {
            "locations": [_location_json(l) for _, l in sorted(self._locations.items())],
            "devices": [{"id": d.id, "name": d.name, "user": d.user} for _, d in sorted(self._devices.items())],
            "users": [{"id": u.id, "name": u.name} for _, u in sorted(self._users.items())],
        }
        tmp = self.path / (REGISTRY_NAME + ".tmp")
        tmp.write_text(json.dumps(doc, indent=1, sort_keys=True, ensure_ascii=False), encoding="utf-8")
        os.replace(tmp, self.path / REGISTRY_NAME)

    def _load(self) -> None:
        reg_path = self.path / REGISTRY_NAME
        if reg_path.exists():
            doc = json.loads(reg_path.read_text(encoding="utf-8"))
            for item in doc.get("locations", []):
                coords = item.get("coordinates")
                self._locations[item["id"]] = Location(item["id"], item.get("name", ""), GeoFix(**coords) if coords else None)
            for item in doc.get("devices", []):
                self._devices[item["id"]] = Device(item["id"], item.get("name", ""), item.get("user", ""))
            for item in doc.get("users", []):
                self._users[item["id"]] = User(item["id"], item.get("name", ""))
        log_path = self.path / LOG_NAME
        rows: dict = {}
        if log_path.exists():
            with open(log_path, encoding="utf-8") as fh:
                for lineno, line in enumerate(fh, 1):
                    if not line.strip():
                        continue
                    try:
                        obs = validate_observation(record_to_observation(json.loads(line)))
                    except (ValueError, KeyError, ProofError) as exc:
                        log.warning("%s:%d skipped unreadable record (%s)", log_path, lineno, exc)
                        continue
                    self._ids.add(obs.id)
                    self._auto_register(obs)
                    rows.setdefault(obs.location, []).append(obs)
        self._rows = {loc: tuple(sorted(r, key=_sort_key)) for loc, r in rows.items()}
        self._publish()


def _with_id(obs: Observation, obs_id: str) -> Observation:
    return Observation(obs_id, obs.obs_time, obs.location, obs.device, obs.transmitter, obs.radio, obs.position, obs.signal_type)


def _location_json(loc: Location) -> dict:
    coords = None
    if loc.coordinates is not None:
        c = loc.coordinates
        coords = {"latitude": c.latitude, "longitude": c.longitude, "altitude": c.altitude, "accuracy": c.accuracy}
    return {"id": loc.id, "name": loc.name, "coordinates": coords}


# -- record / CSV conversion ----------------------------------------------


def observation_to_record(obs: Observation) -> dict:
    """Canonical JSON record, the line format of ``observations.log``."""
    r = obs.radio
    rec = {
        "id": obs.id,
        "obs_time": format_time(obs.obs_time),
        "location": obs.location,
        "device": obs.device,
        "signal_type": obs.signal_type.value,
        "bssid": obs.transmitter.bssid,
        "ssid": obs.transmitter.ssid,
        "capabilities": r.capabilities,
        "frequency": r.frequency,
        "level": r.level,
        "centerfreq0": r.centerfreq0,
        "centerfreq1": r.centerfreq1,
        "channel_width": r.channel_width,
        "position": None,
    }
    if obs.position is not None:
        p = obs.position
        rec["position"] = {"latitude": p.latitude, "longitude": p.longitude, "altitude": p.altitude, "accuracy": p.accuracy}
    return rec


def record_to_observation(rec: Mapping) -> Observation:
    pos = rec.get("position")
    return Observation(
        id=rec.get("id") or "",
        obs_time=parse_time(rec["obs_time"]),
        location=rec["location"],
        device=rec["device"],
        transmitter=NetworkId(rec["bssid"], rec.get("ssid") or ""),
        radio=RadioMeta(
            capabilities=rec.get("capabilities") or "",
            frequency=rec.get("frequency"),
            level=rec.get("level"),
            centerfreq0=rec.get("centerfreq0"),
            centerfreq1=rec.get("centerfreq1"),
            channel_width=rec.get("channel_width"),
        ),
        position=GeoFix(**pos) if pos else None,
    )


def _num(row: Mapping, name: str, kind=float):
    text = (row.get(name) or "").strip()
    if not text:
        return None
    try:
        value = float(text)
    except ValueError as exc:
        raise OutOfRangeField(name, text) from exc
    if kind is int:
        if value != int(value):
            raise OutOfRangeField(name, text)
        return int(value)
    return value


def fuse_local_time(day: str, clock: str, tz=SOURCE_TZ) -> datetime:
    try:
        local = datetime.combine(date.fromisoformat(day.strip()), time.fromisoformat(clock.strip()))
    except (AttributeError, ValueError) as exc:
        raise InvalidTimestamp(f"{day!r} {clock!r}") from exc
    return local.replace(tzinfo=tz)


def row_to_observation(row: Mapping, device_hint: Optional[DeviceId] = None, obs_id: str = "") -> Observation:
    """Build an (unvalidated) observation from one CSV row keyed by column name."""
    bssid = (row.get("BSSID") or "").strip()
    if not bssid:
        raise MalformedBssid("missing BSSID")
    lat, lon = _num(row, "latitude"), _num(row, "longitude")
    position = None
    if lat is not None and lon is not None:
        position = GeoFix(lat, lon, _num(row, "altitude"), _num(row, "accuracy"))
    width = (row.get("channelwidth") or "").strip() or None
    if width is not None and width.replace(".", "", 1).isdigit():
        width = str(int(float(width)))
    # map the numeric width code here so validation need not copy the radio record
    width = CHANNEL_WIDTH_CODES.get(width, width)
    return Observation(
        id=obs_id,
        obs_time=fuse_local_time(row.get("date") or "", row.get("time") or ""),
        location=(row.get("ref_name") or "").strip(),
        device=(row.get("device_id") or "").strip() or (device_hint or ""),
        transmitter=NetworkId(bssid, row.get("SSID") or ""),
        radio=RadioMeta(
            capabilities=row.get("capabilities") or "",
            frequency=_num(row, "frequency", int),
            level=_num(row, "level", int),
            centerfreq0=_num(row, "centerfreq0", int),
            centerfreq1=_num(row, "centerfreq1", int),
            channel_width=width,
        ),
        position=position,
    )


def sniff_delimiter(header_line: str) -> str:
    try:
        return csv.Sniffer().sniff(header_line, delimiters=",;\t").delimiter
    except csv.Error:
        return max(",;\t", key=header_line.count)


def parse_csv(source, device_hint: Optional[DeviceId] = None) -> Iterator[Union[Observation, str]]:
    """Yield an :class:`Observation` per parseable row, or a reason tag per bad row."""
    if isinstance(source, (bytes, bytearray)):
        text = bytes(source).decode("utf-8-sig")
    else:
        data = source.read()
        text = data.decode("utf-8-sig") if isinstance(data, (bytes, bytearray)) else data.lstrip("﻿")
    if not text.strip():
        raise EmptySource("no header row")
    header_line = text.lstrip().splitlines()[0]
    reader = csv.reader(io.StringIO(text.lstrip()), delimiter=sniff_delimiter(header_line))
    header = [h.strip() for h in next(reader)]
    canonical = {c.lower(): c for c in CSV_COLUMNS}
    names = [canonical.get(h.lower(), h) for h in header]
    missing = [c for c in CSV_COLUMNS if c not in names]
    if missing:
        raise MissingColumn(missing)
    for fields in reader:
        if not fields or all(not f.strip() for f in fields):
            continue
        if len(fields) != len(names):
            yield "MalformedRow"
            continue
        try:
            yield row_to_observation(dict(zip(names, fields)), device_hint)
        except ValidationError as exc:
            yield reason_tag(exc)


def observations_to_csv(observations: Iterable[Observation], fh: IO[str], tz=SOURCE_TZ) -> None:
    """Write observations in the ingestion CSV schema (comma-delimited)."""
    writer = csv.writer(fh, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)
    for o in observations:
        local = o.obs_time.astimezone(tz)
        p, r = o.position, o.radio

        def fmt(v):
            return "" if v is None else v

        writer.writerow(
            [
                o.device,
                local.date().isoformat(),
                local.time().isoformat("seconds"),
                o.location,
                fmt(p and p.latitude),
                fmt(p and p.longitude),
                fmt(p and p.altitude),
                fmt(p and p.accuracy),
                o.transmitter.ssid,
                o.transmitter.bssid,
                r.capabilities,
                fmt(r.frequency),
                fmt(r.level),
                fmt(r.centerfreq0),
                fmt(r.centerfreq1),
                _WIDTH_CODES.get(r.channel_width, fmt(r.channel_width)),
            ]
        )


_WIDTH_CODES = {"20": "0", "40": "1", "80": "2", "80+80": "3", "160": "4"}
