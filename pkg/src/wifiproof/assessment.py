"""Evaluation harness for stable-set identification and volatile matching.

Works on any store, so it can be pointed at the LXspots Lisbon traces or at
simulator output. Reference figures for the Lisbon traces are kept in
:data:`LXSPOTS_REFERENCE` and can be checked with the ``check_*`` helpers.
"""

from __future__ import annotations

import csv
import io
import unicodedata
from dataclasses import dataclass, field
from datetime import date, datetime, time, timedelta
from itertools import permutations
from typing import Dict, List, Mapping, Optional, Sequence, Tuple

from .core import DeviceId, LocationId, TimeWindow, WindowKind
from .errors import InsufficientDevices, NoObservations
from .netsets import StableMap, bottom_fraction_volatile, stable_match_rate
from .store import SOURCE_TZ, ObsFilter, distinct_transmitters

LXSPOTS_LOCATIONS = ("Jerónimos", "Comércio", "Sé", "Oceanário", "Alvalade", "Gulbenkian")
LXSPOTS_TRAINING_DAYS = (
    date(2019, 7, 19),
    date(2019, 7, 26),
    *(date(2019, 7, 29) + timedelta(days=i) for i in range(7)),
    date(2019, 8, 19),
)
LXSPOTS_TEST_DAY = date(2020, 1, 19)
LXSPOTS_INTERVALS = tuple(timedelta(minutes=m) for m in (15, 7.5, 3.75, 1.875))

LXSPOTS_REFERENCE = {
    "total": dict(zip(LXSPOTS_LOCATIONS, (677, 551, 363, 243, 163, 292))),
    "stable": dict(zip(LXSPOTS_LOCATIONS, (70, 58, 47, 25, 17, 30))),
    "match_rate": {"Alvalade": 0.98, "Gulbenkian": 0.89, "Jerónimos": 0.14},
    "volatile_by_location": {
        "Jerónimos": (6, 6, 5, 3),
        "Comércio": (5, 1, 0, 0),
        "Sé": (6, 4, 2, 0),
        "Oceanário": (6, 5, 0, 0),
        "Alvalade": (6, 6, 6, 4),
        "Gulbenkian": (6, 6, 6, 6),
    },
    "volatile_by_device": {"A": (11, 10, 6, 4), "B": (12, 10, 7, 5), "C": (12, 8, 6, 4)},
    "volatile_percent": (97, 78, 53, 36),
}


def canonical_name(name: str) -> str:
    """Accent- and case-insensitive key, so ``Jeronimos`` matches ``Jerónimos``."""
    decomposed = unicodedata.normalize("NFKD", name)
    return "".join(c for c in decomposed if not unicodedata.combining(c)).casefold().strip()


def resolve_names(wanted: Sequence[str], available: Sequence[str]) -> Dict[str, str]:
    """Map each wanted name to the matching id in ``available`` (missing names are omitted)."""
    index = {canonical_name(a): a for a in available}
    return {w: index[canonical_name(w)] for w in wanted if canonical_name(w) in index}


def local_day_window(first: date, last: Optional[date] = None, kind=WindowKind.EPOCH) -> TimeWindow:
    """Whole local days ``first..last`` (inclusive) in the collection time zone."""
    last = last or first
    start = datetime.combine(first, time(0, 0, 0), SOURCE_TZ)
    end = datetime.combine(last, time(23, 59, 59), SOURCE_TZ)
    return TimeWindow(start, end, kind)


def lxspots_training_window() -> TimeWindow:
    return local_day_window(LXSPOTS_TRAINING_DAYS[0], LXSPOTS_TRAINING_DAYS[-1])


def lxspots_test_window() -> TimeWindow:
    return local_day_window(LXSPOTS_TEST_DAY, kind=WindowKind.PERIOD)


# -- stable identification ------------------------------------------------


def eval_stable_identification(store, stable: StableMap, test_window: TimeWindow) -> Dict[Tuple[str, str], float]:
    """Match rate of each device's test-window observations against the fingerprint, per (location, device)."""
    rows = store.snapshot().query(ObsFilter(time_window=test_window))
    if not rows:
        raise NoObservations("no observations in the test window")
    grouped: Dict[Tuple[str, str], list] = {}
    for obs in rows:
        if obs.location in stable:
            grouped.setdefault((obs.location, obs.device), []).append(obs)
    return {
        key: stable_match_rate(stable, key[0], distinct_transmitters(obs))
        for key, obs in sorted(grouped.items())
    }


def mean_rate_by_location(rates: Mapping[Tuple[str, str], float]) -> Dict[str, float]:
    acc: Dict[str, list] = {}
    for (loc, _), rate in rates.items():
        acc.setdefault(loc, []).append(rate)
    return {loc: sum(v) / len(v) for loc, v in sorted(acc.items())}


# -- volatile matching ----------------------------------------------------


@dataclass
class MatchTable:
    """Success counts per row key and interval, each out of ``pair_total``."""

    rows: Dict[str, Tuple[int, ...]]
    intervals: Tuple[timedelta, ...]
    pair_total: int
    label: str = "key"

    def __post_init__(self):
        for key, cells in self.rows.items():
            if len(cells) != len(self.intervals) or any(not 0 <= c <= self.pair_total for c in cells):
                raise ValueError(f"bad row {key}: {cells}")

    def column_totals(self) -> Tuple[int, ...]:
        return tuple(sum(cells[i] for cells in self.rows.values()) for i in range(len(self.intervals)))

    def percentages(self) -> Tuple[float, ...]:
        denom = self.pair_total * len(self.rows)
        return tuple(100.0 * t / denom if denom else 0.0 for t in self.column_totals())

    def headers(self) -> List[str]:
        return [self.label] + [_minutes(i) for i in self.intervals]

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(self.headers())
        for key, cells in self.rows.items():
            writer.writerow([key, *cells])
        return buf.getvalue()

    def to_text(self) -> str:
        table = [self.headers()] + [[k, *map(str, v)] for k, v in self.rows.items()]
        widths = [max(len(r[i]) for r in table) for i in range(len(table[0]))]
        lines = []
        for n, row in enumerate(table):
            cells = [row[0].ljust(widths[0])] + [c.rjust(w) for c, w in zip(row[1:], widths[1:])]
            lines.append(" | ".join(cells))
            if n == 0:
                lines.append("-+-".join("-" * w for w in widths))
        lines.append(f"(out of {self.pair_total} pairs)")
        return "\n".join(lines)


def parse_minutes(text: str) -> timedelta:
    return timedelta(minutes=float(text))


def _minutes(d: timedelta) -> str:
    return f"{d.total_seconds() / 60:g} min"


@dataclass
class VolatileMatching:
    by_location: MatchTable
    by_device: MatchTable
    outcomes: Dict[Tuple[str, str, str, timedelta], bool] = field(default_factory=dict)


def _split(rows, start: datetime, length: timedelta, span: timedelta) -> List[list]:
    """Partition ``rows`` into consecutive half-open sub-intervals; the last one is closed."""
    n = max(1, round(span / length))
    parts: List[list] = [[] for _ in range(n)]
    end = start + span
    for obs in rows:
        if obs.obs_time < start or obs.obs_time > end:
            continue
        i = min(int((obs.obs_time - start) / length), n - 1)
        parts[i].append(obs)
    return parts


def eval_volatile_matching(
    store,
    stable: StableMap,
    session_window: TimeWindow,
    subdivisions: Sequence[timedelta] = LXSPOTS_INTERVALS,
    fraction: float = 0.10,
    *,
    session_length: Optional[timedelta] = None,
    first_only: bool = False,
    locations: Optional[Sequence[LocationId]] = None,
) -> VolatileMatching:
    """Score every ordered (prover, witness) pair per location and sub-interval length.

    At each location the session starts with its first observation inside
    ``session_window`` and lasts ``session_length`` (default: the longest
    subdivision). For a sub-interval length, the session is cut into
    consecutive pieces; each device's volatile set in a piece is its
    bottom-``fraction`` networks minus the fingerprint. A pair succeeds when
    the two volatile sets share a network in any piece, or in the first piece
    when ``first_only`` is set.
    """
    subdivisions = tuple(subdivisions)
    span = session_length or max(subdivisions)
    snap = store.snapshot()
    rows_by_loc: Dict[str, list] = {}
    for obs in snap.query(ObsFilter(time_window=session_window)):
        rows_by_loc.setdefault(obs.location, []).append(obs)
    if locations is not None:
        rows_by_loc = {loc: rows_by_loc.get(loc, []) for loc in locations}
    if not rows_by_loc:
        raise NoObservations("no observations in the session window")

    devices_all = sorted({o.device for rows in rows_by_loc.values() for o in rows})
    outcomes: Dict[Tuple[str, str, str, timedelta], bool] = {}
    by_location: Dict[str, Tuple[int, ...]] = {}
    per_device: Dict[str, List[int]] = {d: [0] * len(subdivisions) for d in devices_all}
    pair_total = None
    for loc in sorted(rows_by_loc):
        rows = rows_by_loc[loc]
        devices = sorted({o.device for o in rows})
        if len(devices) < 2:
            raise InsufficientDevices(f"{loc}: {len(devices)} device(s) in session")
        start = min(o.obs_time for o in rows)
        fingerprint = stable.get(loc)
        counts = []
        for j, length in enumerate(subdivisions):
            volatile = {}
            for dev in devices:
                parts = _split([o for o in rows if o.device == dev], start, length, span)
                volatile[dev] = [bottom_fraction_volatile(p, fraction, fingerprint) if p else frozenset() for p in parts]
            ok = 0
            for prover, witness in permutations(devices, 2):
                pieces = list(zip(volatile[prover], volatile[witness]))
                if first_only:
                    pieces = pieces[:1]
                success = any(a & b for a, b in pieces)
                outcomes[(loc, prover, witness, length)] = success
                ok += success
                per_device[prover][j] += success
            counts.append(ok)
        total = len(devices) * (len(devices) - 1)
        pair_total = total if pair_total is None else max(pair_total, total)
        by_location[loc] = tuple(counts)

    device_total = (len(devices_all) - 1) * len(rows_by_loc)
    return VolatileMatching(
        MatchTable(by_location, subdivisions, pair_total or 0, "Location"),
        MatchTable({d: tuple(v) for d, v in per_device.items()}, subdivisions, device_total, "Device"),
        outcomes,
    )


# -- reference checks -----------------------------------------------------


@dataclass(frozen=True)
class Check:
    name: str
    ok: bool
    detail: str

    def line(self) -> str:
        return f"{'PASS' if self.ok else 'FAIL'}  {self.name}: {self.detail}"


def _lookup(values: Mapping[str, object], names: Sequence[str]) -> Dict[str, object]:
    resolved = resolve_names(names, list(values))
    return {name: values[resolved[name]] for name in names if name in resolved}


def check_totals(totals: Mapping[str, int]) -> Check:
    ref = LXSPOTS_REFERENCE["total"]
    got = _lookup(totals, list(ref))
    ok = all(got.get(k) == v for k, v in ref.items())
    return Check("distinct transmitters (exact)", ok, f"got {got}, expected {ref}")


def check_stable_sizes(sizes: Mapping[str, int], tolerance: int = 5) -> Check:
    ref = LXSPOTS_REFERENCE["stable"]
    got = _lookup(sizes, list(ref))
    ok = all(k in got and abs(got[k] - v) <= tolerance for k, v in ref.items())
    return Check(f"stable set sizes (+/-{tolerance})", ok, f"got {got}, expected {ref}")


def check_match_rates(rates: Mapping[str, float], tolerance: float = 0.05) -> Check:
    ref = LXSPOTS_REFERENCE["match_rate"]
    got = _lookup(rates, list(ref))
    ok = all(k in got and abs(got[k] - v) <= tolerance + 1e-12 for k, v in ref.items())
    shown = {k: round(v, 3) for k, v in got.items()}
    return Check(f"stable identification rates (+/-{tolerance})", ok, f"got {shown}, expected {ref}")


def check_volatile_by_location(
    table: MatchTable, pct_tolerance: float = 5.0, min_cells: int = 20, cell_tolerance: int = 1
) -> List[Check]:
    ref_pct = LXSPOTS_REFERENCE["volatile_percent"]
    pct = table.percentages()
    pct_ok = len(pct) == len(ref_pct) and all(abs(a - b) <= pct_tolerance for a, b in zip(pct, ref_pct))
    ref_rows = LXSPOTS_REFERENCE["volatile_by_location"]
    got = _lookup(table.rows, list(ref_rows))
    close = sum(
        1 for k, ref in ref_rows.items() if k in got for a, b in zip(got[k], ref) if abs(a - b) <= cell_tolerance
    )
    return [
        Check(f"volatile aggregate percentages (+/-{pct_tolerance:g} pts)", pct_ok,
              f"got {tuple(round(p, 1) for p in pct)}, expected {ref_pct}"),
        Check(f"per-location table cells within +/-{cell_tolerance} (>= {min_cells} of 24)", close >= min_cells,
              f"{close} of 24 cells"),
    ]


def check_volatile_by_device(table: MatchTable, cell_tolerance: int = 1) -> Check:
    ref_rows = LXSPOTS_REFERENCE["volatile_by_device"]
    got = _lookup(table.rows, list(ref_rows))
    ok = all(k in got and all(abs(a - b) <= cell_tolerance for a, b in zip(got[k], v)) for k, v in ref_rows.items())
    return Check(f"per-device table cells within +/-{cell_tolerance}", ok, f"got {got}, expected {ref_rows}")
