"""Stable and volatile network sets.

Two families live here:

* set-algebra strategies: the stable fingerprint of a location is the
  intersection of what every device saw there during the epoch; the volatile
  set of a span is the intersection of what every witness saw minus the
  stable fingerprint;
* count-ranking strategies: the most frequently observed fraction of networks
  is the stable set, and the least frequently observed fraction seen by one
  device is that device's volatile set.
"""

from __future__ import annotations

import enum
import json
import math
from collections import Counter
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Optional

from .core import (
    DeviceId,
    LocationClaim,
    LocationId,
    NetworkId,
    TimeWindow,
    WindowKind,
    network,
)
from .errors import (
    ConfigInvalid,
    EmptyStableSet,
    InsufficientWitnesses,
    KindMismatch,
    NoObservations,
    NonDisjointStableSets,
    UnknownLocation,
)
from .store import ObsFilter, distinct_transmitters, occurrence_counts


class StableStrategy(str, enum.Enum):
    DEVICE_INTERSECTION = "DEVICE_INTERSECTION"
    TOP_FRACTION = "TOP_FRACTION"


@dataclass(frozen=True)
class StableMap:
    """Per-location stable fingerprint computed over one epoch."""

    sets: Mapping[LocationId, frozenset]
    epoch: TimeWindow
    strategy: StableStrategy = StableStrategy.DEVICE_INTERSECTION
    fraction: Optional[float] = None
    dropped: frozenset = frozenset()

    def __post_init__(self):
        object.__setattr__(self, "sets", {loc: frozenset(ids) for loc, ids in sorted(self.sets.items())})
        object.__setattr__(self, "strategy", StableStrategy(self.strategy))
        object.__setattr__(self, "dropped", frozenset(self.dropped))

    def __getitem__(self, loc: LocationId) -> frozenset:
        try:
            return self.sets[loc]
        except KeyError:
            raise UnknownLocation(loc) from None

    def __contains__(self, loc) -> bool:
        return loc in self.sets

    def __len__(self) -> int:
        return len(self.sets)

    def get(self, loc: LocationId, default=frozenset()) -> frozenset:
        return self.sets.get(loc, default)

    @property
    def locations(self) -> list:
        return sorted(self.sets)

    def check(self) -> "StableMap":
        """Raise unless every set is non-empty and the sets are pairwise disjoint."""
        for loc in self.locations:
            if not self.sets[loc]:
                raise EmptyStableSet(loc)
        shared = _shared_members(self.sets)
        if shared:
            raise NonDisjointStableSets(shared)
        return self

    def sizes(self) -> dict:
        return {loc: len(ids) for loc, ids in self.sets.items()}

    def to_json(self) -> dict:
        return {
            "strategy": self.strategy.value,
            "fraction": self.fraction,
            "epoch": {"start": self.epoch.to_json()["start"], "end": self.epoch.to_json()["end"]},
            "locations": {
                loc: [{"bssid": n.bssid, "ssid": n.ssid} for n in sorted(ids)] for loc, ids in self.sets.items()
            },
            "dropped": sorted(n.bssid for n in self.dropped),
        }

    def dumps(self) -> str:
        """Deterministic JSON: locations and BSSIDs sorted."""
        return json.dumps(self.to_json(), indent=1, sort_keys=True, ensure_ascii=False) + "\n"

    @classmethod
    def from_json(cls, doc: Mapping) -> "StableMap":
        return cls(
            sets={
                loc: frozenset(network(item["bssid"], item.get("ssid", "")) for item in items)
                for loc, items in doc["locations"].items()
            },
            epoch=TimeWindow.from_json(doc["epoch"], kind=WindowKind.EPOCH),
            strategy=doc.get("strategy", StableStrategy.DEVICE_INTERSECTION),
            fraction=doc.get("fraction"),
            dropped=frozenset(network(b) for b in doc.get("dropped", [])),
        )

    @classmethod
    def loads(cls, text: str) -> "StableMap":
        return cls.from_json(json.loads(text))


@dataclass(frozen=True)
class VolatileSet:
    loc: LocationId
    span: TimeWindow
    ids: frozenset
    witness_devices: frozenset = field(default_factory=frozenset)


def _shared_members(sets: Mapping[LocationId, frozenset]) -> set:
    seen = Counter()
    for ids in sets.values():
        seen.update(ids)
    return {n for n, c in seen.items() if c > 1}


def _ceil_fraction(fraction: float, n: int) -> int:
    # round() first so that 0.1 * 70 does not ceil to 8
    return math.ceil(round(fraction * n, 9))


def _check_fraction(fraction: float) -> None:
    if not (isinstance(fraction, (int, float)) and 0 < fraction <= 1):
        raise ConfigInvalid(f"fraction must lie in (0, 1], got {fraction!r}")


def select_top(counts: Mapping[NetworkId, int], fraction: float) -> frozenset:
    """The ``ceil(fraction * n)`` most frequent networks, extended through a tie at the cut.

    Ranking is by descending count, then ascending BSSID.
    """
    _check_fraction(fraction)
    ranked = sorted(counts.items(), key=lambda kv: (-kv[1], kv[0].bssid))
    return _cut(ranked, _ceil_fraction(fraction, len(ranked)))


def select_bottom(counts: Mapping[NetworkId, int], fraction: float) -> frozenset:
    """The ``ceil(fraction * n)`` least frequent networks, extended through a tie at the cut."""
    _check_fraction(fraction)
    ranked = sorted(counts.items(), key=lambda kv: (kv[1], kv[0].bssid))
    return _cut(ranked, _ceil_fraction(fraction, len(ranked)))


def _cut(ranked, k: int) -> frozenset:
    if k <= 0 or not ranked:
        return frozenset()
    boundary = ranked[k - 1][1]
    while k < len(ranked) and ranked[k][1] == boundary:
        k += 1
    return frozenset(n for n, _ in ranked[:k])


def _epoch_rows(store, epoch: TimeWindow) -> dict:
    rows: dict = {}
    for obs in store.snapshot().query(ObsFilter(time_window=epoch)):
        rows.setdefault(obs.location, []).append(obs)
    if not rows:
        raise NoObservations(f"no observations in [{epoch.to_json()['start']}, {epoch.to_json()['end']}]")
    return rows


def compute_stable_intersection(store, epoch: TimeWindow, *, strict: bool = True) -> StableMap:
    """Fingerprint each location by the networks every device saw there during ``epoch``.

    Only devices with at least one observation at a location take part in
    that location's intersection. With ``strict`` (the default) an empty
    fingerprint raises :class:`EmptyStableSet` and a network shared by two
    locations raises :class:`NonDisjointStableSets`.
    """
    sets = {}
    for loc, rows in sorted(_epoch_rows(store, epoch).items()):
        per_device: dict = {}
        for obs in rows:
            per_device.setdefault(obs.device, set()).add(obs.transmitter)
        sets[loc] = frozenset.intersection(*(frozenset(s) for s in per_device.values()))
    stable = StableMap(sets, _as_epoch(epoch), StableStrategy.DEVICE_INTERSECTION)
    return stable.check() if strict else stable


def compute_stable_top_fraction(store, epoch: TimeWindow, fraction: float, *, strict: bool = True) -> StableMap:
    """Fingerprint each location by its most frequently observed networks.

    Occurrences are counted over all devices within ``epoch``. A network
    selected at more than one location is removed from all of them and listed
    in ``StableMap.dropped``.
    """
    _check_fraction(fraction)
    selected = {
        loc: select_top(occurrence_counts(rows), fraction)
        for loc, rows in sorted(_epoch_rows(store, epoch).items())
    }
    shared = _shared_members(selected)
    sets = {loc: ids - shared for loc, ids in selected.items()}
    stable = StableMap(sets, _as_epoch(epoch), StableStrategy.TOP_FRACTION, fraction, frozenset(shared))
    return stable.check() if strict else stable


def _as_epoch(window: TimeWindow) -> TimeWindow:
    return TimeWindow(window.start, window.end, WindowKind.EPOCH)


def stable_match_rate(stable: StableMap, loc: LocationId, probe: Iterable[NetworkId]) -> float:
    """Fraction of the location's fingerprint present in ``probe``."""
    fingerprint = stable[loc]
    if not fingerprint:
        return 0.0
    return len(fingerprint & frozenset(probe)) / len(fingerprint)


def compute_volatile_ids(
    store,
    claim: LocationClaim,
    span: TimeWindow,
    witness_threshold: int,
    stable: StableMap,
) -> VolatileSet:
    """Networks every witness saw at the claimed location during ``span``, minus the fingerprint.

    Witnesses are the devices other than the claimant with at least one
    observation at ``claim.loc`` inside ``span``.
    """
    if span.kind is not WindowKind.SPAN:
        raise KindMismatch(f"expected SPAN, got {span.kind.value}")
    if witness_threshold < 1:
        raise ConfigInvalid("witness_threshold must be >= 1")
    fingerprint = stable[claim.loc]
    snap = store.snapshot()
    if claim.loc not in snap.locations:
        raise UnknownLocation(claim.loc)
    seen: dict = {}
    for obs in snap.query(ObsFilter(time_window=span, location=claim.loc)):
        if obs.device != claim.claimant:
            seen.setdefault(obs.device, set()).add(obs.transmitter)
    if len(seen) < witness_threshold:
        raise InsufficientWitnesses(len(seen), witness_threshold)
    common = frozenset.intersection(*(frozenset(s) for s in seen.values()))
    return VolatileSet(claim.loc, span, common - fingerprint, frozenset(seen))


def compute_volatile_bottom_fraction(
    store,
    loc: LocationId,
    window: TimeWindow,
    device: DeviceId,
    fraction: float,
    stable: StableMap,
) -> frozenset:
    """One device's least frequently observed networks at ``loc`` during ``window``, minus the fingerprint."""
    _check_fraction(fraction)
    snap = store.snapshot()
    if loc not in snap.locations:
        raise UnknownLocation(loc)
    rows = [o for o in snap.query(ObsFilter(time_window=window, location=loc)) if o.device == device]
    if not rows:
        raise NoObservations(f"device {device} has no observations at {loc} in window")
    return bottom_fraction_volatile(rows, fraction, stable.get(loc))


def bottom_fraction_volatile(rows, fraction: float, fingerprint: frozenset) -> frozenset:
    """Bottom-fraction selection over an explicit observation list, minus ``fingerprint``."""
    return select_bottom(occurrence_counts(rows), fraction) - fingerprint


__all__ = [
    "StableMap",
    "StableStrategy",
    "VolatileSet",
    "bottom_fraction_volatile",
    "compute_stable_intersection",
    "compute_stable_top_fraction",
    "compute_volatile_bottom_fraction",
    "compute_volatile_ids",
    "distinct_transmitters",
    "select_bottom",
    "select_top",
    "stable_match_rate",
]
