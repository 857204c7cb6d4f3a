"""Synthetic Wi-Fi scenes with planted ground truth.

A scene plants a set of stable access points per location, a list of
transient hotspots with explicit visibility windows, and device itineraries
(dwell windows with a fixed scan interval). :func:`simulate_scans` turns a
scene into an observation stream that the store can ingest directly or via
the CSV schema.

Randomness comes from numpy's PCG64 bit generator, using only its raw 64-bit
output stream, which numpy keeps stable across releases. Uniform draws are
derived from the raw words here rather than through ``Generator`` methods,
whose algorithms are allowed to change.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from datetime import timedelta
from typing import Dict, List, Optional, Tuple

import numpy as np

from .core import (
    DeviceId,
    LocationId,
    NetworkId,
    Observation,
    RadioMeta,
    TimeWindow,
    normalize_bssid,
    parse_duration,
)
from .errors import ConfigInvalid

SIM_FREQUENCY = 2412
LEVEL_RANGE = (-90, -30)


class RawStream:
    """Deterministic draws from the PCG64 raw output."""

    def __init__(self, seed: int):
        self._bits = np.random.PCG64(seed & 0xFFFFFFFFFFFFFFFF)

    def word(self) -> int:
        return int(self._bits.random_raw())

    def uniform(self) -> float:
        return (self.word() >> 11) * (1.0 / (1 << 53))

    def integer(self, low: int, high: int) -> int:
        """Uniform integer in ``[low, high]``."""
        return low + int(self.uniform() * (high - low + 1))


@dataclass(frozen=True)
class LocationSpec:
    id: LocationId
    stable_ap_count: int
    detection_probability: float = 1.0


@dataclass(frozen=True)
class TransientSpec:
    bssid: str
    loc: LocationId
    visibility_window: TimeWindow
    ssid: str = ""


@dataclass(frozen=True)
class ItineraryStep:
    device: DeviceId
    loc: LocationId
    dwell_window: TimeWindow
    scan_interval: timedelta = timedelta(minutes=1)


@dataclass(frozen=True)
class SceneConfig:
    seed: int
    locations: Tuple[LocationSpec, ...]
    transients: Tuple[TransientSpec, ...] = ()
    itineraries: Tuple[ItineraryStep, ...] = ()
    horizon: Optional[TimeWindow] = None

    def __post_init__(self):
        object.__setattr__(self, "locations", tuple(self.locations))
        object.__setattr__(self, "transients", tuple(self.transients))
        object.__setattr__(self, "itineraries", tuple(self.itineraries))

    def resolved_horizon(self) -> Optional[TimeWindow]:
        if self.horizon is not None:
            return self.horizon
        if not self.itineraries:
            return None
        return TimeWindow(
            min(s.dwell_window.start for s in self.itineraries),
            max(s.dwell_window.end for s in self.itineraries),
        )

    def validate(self) -> "SceneConfig":
        ids = [l.id for l in self.locations]
        if len(set(ids)) != len(ids):
            raise ConfigInvalid("duplicate location id")
        for spec in self.locations:
            if spec.stable_ap_count < 0:
                raise ConfigInvalid(f"{spec.id}: stable_ap_count < 0")
            if not 0 < spec.detection_probability <= 1:
                raise ConfigInvalid(f"{spec.id}: detection_probability outside (0, 1]")
        horizon = self.resolved_horizon()
        seen = set()
        for t in self.transients:
            bssid = normalize_bssid(t.bssid)
            if bssid in seen:
                raise ConfigInvalid(f"duplicate transient {bssid}")
            seen.add(bssid)
            if t.loc not in ids:
                raise ConfigInvalid(f"transient {bssid} at unknown location {t.loc}")
            if horizon is not None and not horizon.contains_window(t.visibility_window):
                raise ConfigInvalid(f"transient {bssid} visible outside the simulated horizon")
        per_device: Dict[str, List[TimeWindow]] = {}
        for step in self.itineraries:
            if step.loc not in ids:
                raise ConfigInvalid(f"itinerary of {step.device} at unknown location {step.loc}")
            if step.scan_interval <= timedelta(0) or step.scan_interval % timedelta(seconds=1):
                raise ConfigInvalid("scan_interval must be a positive whole number of seconds")
            per_device.setdefault(step.device, []).append(step.dwell_window)
        for device, windows in per_device.items():
            windows.sort(key=lambda w: w.start)
            for a, b in zip(windows, windows[1:]):
                if b.start <= a.end:
                    raise ConfigInvalid(f"device {device} has overlapping dwell windows")
        return self


@dataclass(frozen=True)
class Scene:
    config: SceneConfig
    stable: Dict[LocationId, frozenset] = field(default_factory=dict)
    transient_visibility: Dict[NetworkId, TimeWindow] = field(default_factory=dict)

    @property
    def ground_truth(self) -> dict:
        return {"stable": self.stable, "transient_visibility": self.transient_visibility}


def _mac(word: int) -> str:
    # locally administered, unicast
    value = (word & 0xFFFFFFFFFFFF) | (0x02 << 40)
    value &= ~(0x01 << 40)
    return ":".join(f"{(value >> s) & 0xFF:02x}" for s in range(40, -8, -8))


def generate_scene(config: SceneConfig) -> Scene:
    """Draw stable access points for every location; fully determined by ``config.seed``."""
    config.validate()
    rng = RawStream(config.seed)
    taken = {normalize_bssid(t.bssid) for t in config.transients}
    stable: Dict[LocationId, frozenset] = {}
    for spec in config.locations:
        aps = []
        while len(aps) < spec.stable_ap_count:
            bssid = _mac(rng.word())
            if bssid in taken:
                continue
            taken.add(bssid)
            aps.append(NetworkId(bssid, f"{spec.id}-ap{len(aps)}"))
        if aps:
            stable[spec.id] = frozenset(aps)
    visibility = {
        NetworkId(normalize_bssid(t.bssid), t.ssid): t.visibility_window for t in config.transients
    }
    return Scene(config, stable, visibility)


def simulate_scans(scene: Scene) -> List[Observation]:
    """One scan per ``scan_interval`` per itinerary step.

    Each scan reports every stable AP of the location independently with the
    location's detection probability, plus every transient at that location
    whose visibility window contains the scan time.
    """
    cfg = scene.config
    rng = RawStream(cfg.seed ^ 0x5CA5CA5CA5CA5CA5)
    specs = {l.id: l for l in cfg.locations}
    transients = [
        (NetworkId(normalize_bssid(t.bssid), t.ssid), t.loc, t.visibility_window) for t in cfg.transients
    ]
    steps = sorted(cfg.itineraries, key=lambda s: (s.device, s.dwell_window.start))
    out: List[Observation] = []
    for step in steps:
        spec = specs[step.loc]
        aps = sorted(scene.stable.get(step.loc, ()))
        t = step.dwell_window.start
        k = 0
        while t <= step.dwell_window.end:
            seen = [ap for ap in aps if rng.uniform() < spec.detection_probability]
            seen += [n for n, loc, window in transients if loc == step.loc and t in window]
            for ap in seen:
                out.append(
                    Observation(
                        id=f"sim-{cfg.seed}-{len(out):07d}",
                        obs_time=t,
                        location=step.loc,
                        device=step.device,
                        transmitter=ap,
                        radio=RadioMeta(
                            capabilities="[ESS]",
                            frequency=SIM_FREQUENCY,
                            level=rng.integer(*LEVEL_RANGE),
                            centerfreq0=0,
                            centerfreq1=0,
                            channel_width="20",
                        ),
                        position=None,
                    )
                )
            k += 1
            t = step.dwell_window.start + k * step.scan_interval
    return out


def scene_from_json(doc: dict) -> SceneConfig:
    """Build a :class:`SceneConfig` from its JSON form (times ISO-8601, intervals in seconds or ISO durations)."""
    def window(w):
        return TimeWindow.from_json(w)

    return SceneConfig(
        seed=int(doc["seed"]),
        locations=tuple(
            LocationSpec(l["id"], int(l.get("stable_ap_count", 0)), float(l.get("detection_probability", 1.0)))
            for l in doc["locations"]
        ),
        transients=tuple(
            TransientSpec(t["bssid"], t["loc"], window(t["visibility_window"]), t.get("ssid", ""))
            for t in doc.get("transients", [])
        ),
        itineraries=tuple(
            ItineraryStep(
                s["device"],
                s["loc"],
                window(s["dwell_window"]),
                parse_duration(s.get("scan_interval", 60)),
            )
            for s in doc.get("itineraries", [])
        ),
        horizon=window(doc["horizon"]) if doc.get("horizon") else None,
    )
