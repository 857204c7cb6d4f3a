"""Location estimation, time-bound proofs and certificate issuance."""

from __future__ import annotations

import hashlib
import json
import logging
import math
from dataclasses import dataclass, field
from datetime import datetime, timedelta
from typing import Iterable, List, Optional, Union

from .core import (
    UTC,
    LocationCertificate,
    LocationClaim,
    LocationId,
    NetworkId,
    TimeWindow,
    WindowKind,
    format_duration,
    format_time,
    parse_duration,
    parse_time,
    to_utc,
)
from .errors import ConfigInvalid, InsufficientWitnesses, UnknownLocation
from .netsets import StableMap, compute_volatile_ids

log = logging.getLogger(__name__)

DEFAULT_DELTAS = tuple(timedelta(minutes=m) for m in (120, 60, 30, 15, 10, 5, 1, 0))

LOCATION_MISMATCH = "LOCATION_MISMATCH"
NO_CORROBORATION = "NO_CORROBORATION"

Threshold = Union[int, float]


@dataclass(frozen=True)
class VerifierConfig:
    """Verifier parameters.

    ``location_threshold`` is an absolute match count when it is an ``int``
    and a fraction of the location's fingerprint when it is a ``float``.
    """

    deltas: tuple = DEFAULT_DELTAS
    location_threshold: Threshold = 0.5
    witness_threshold: int = 2
    epoch: timedelta = timedelta(days=7)
    period: timedelta = timedelta(days=1)
    period_anchor: datetime = datetime(1970, 1, 1, tzinfo=UTC)

    def __post_init__(self):
        object.__setattr__(self, "deltas", tuple(parse_duration(d) for d in self.deltas))
        object.__setattr__(self, "epoch", parse_duration(self.epoch))
        object.__setattr__(self, "period", parse_duration(self.period))
        object.__setattr__(self, "period_anchor", to_utc(self.period_anchor))

    def validate(self) -> "VerifierConfig":
        if not self.deltas:
            raise ConfigInvalid("deltas must not be empty")
        if any(a <= b for a, b in zip(self.deltas, self.deltas[1:])):
            raise ConfigInvalid("deltas must be strictly descending")
        if self.deltas[-1] < timedelta(0):
            raise ConfigInvalid("deltas must be non-negative")
        if self.deltas[0] > self.period:
            raise ConfigInvalid("every delta must be <= the period")
        if not self.epoch > self.period > timedelta(0):
            raise ConfigInvalid("epoch > period > 0 must hold")
        t = self.location_threshold
        if isinstance(t, bool) or not isinstance(t, (int, float)):
            raise ConfigInvalid(f"location_threshold {t!r}")
        if isinstance(t, int) and t < 1:
            raise ConfigInvalid("absolute location_threshold must be >= 1")
        if isinstance(t, float) and not 0 < t <= 1:
            raise ConfigInvalid("fractional location_threshold must lie in (0, 1]")
        if isinstance(self.witness_threshold, bool) or not isinstance(self.witness_threshold, int) or self.witness_threshold < 1:
            raise ConfigInvalid("witness_threshold must be an integer >= 1")
        return self

    def to_json(self) -> dict:
        return {
            "deltas": [format_duration(d) for d in self.deltas],
            "location_threshold": self.location_threshold,
            "witness_threshold": self.witness_threshold,
            "epoch": format_duration(self.epoch),
            "period": format_duration(self.period),
            "period_anchor": format_time(self.period_anchor),
        }

    @classmethod
    def from_json(cls, doc: dict) -> "VerifierConfig":
        kwargs = dict(doc)
        if "period_anchor" in kwargs:
            kwargs["period_anchor"] = parse_time(kwargs["period_anchor"])
        if "deltas" in kwargs:
            kwargs["deltas"] = tuple(kwargs["deltas"])
        try:
            return cls(**kwargs).validate()
        except TypeError as exc:
            raise ConfigInvalid(str(exc)) from exc

    def digest(self) -> str:
        payload = json.dumps(self.to_json(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(payload.encode()).hexdigest()[:16]


def resolve_threshold(threshold: Threshold, fingerprint_size: int) -> int:
    if isinstance(threshold, float):
        # at least one match is always required
        return max(1, math.ceil(round(threshold * fingerprint_size, 9)))
    return threshold


def qualifying_locations(prover_obs: Iterable[NetworkId], stable: StableMap, threshold: Threshold) -> list:
    """Every location whose fingerprint overlap with ``prover_obs`` meets the threshold, ascending."""
    evidence = frozenset(prover_obs)
    return [
        loc
        for loc in stable.locations
        if len(stable[loc] & evidence) >= resolve_threshold(threshold, len(stable[loc]))
    ]


def estimate_location(prover_obs: Iterable[NetworkId], stable: StableMap, threshold: Threshold) -> Optional[LocationId]:
    """First location, in ascending id order, matched by the prover's networks; ``None`` if none."""
    matches = qualifying_locations(prover_obs, stable, threshold)
    return matches[0] if matches else None


@dataclass(frozen=True)
class ProofStep:
    """What happened at one delta of the descending scan."""

    delta: timedelta
    span: TimeWindow
    proof_set: frozenset
    witnesses: frozenset = field(default_factory=frozenset)
    insufficient: Optional[InsufficientWitnesses] = None


def time_bound_proof(
    store,
    claim: LocationClaim,
    config: VerifierConfig,
    stable: StableMap,
    *,
    trace: Optional[List[ProofStep]] = None,
):
    """Find the smallest delta around ``claim.time`` still corroborated by witnesses.

    Deltas are visited from largest to smallest; the scan stops at the first
    delta whose shared volatile networks miss the claim's evidence. Too few
    witnesses at a delta counts as an empty intersection. Returns
    ``(proof, proof_delta)``; a delta of zero never yields a proof.

    If ``trace`` is given, one :class:`ProofStep` is appended per visited delta.
    """
    config.validate()
    if claim.loc not in stable:
        raise UnknownLocation(claim.loc)
    proof_delta = timedelta(0)
    for delta in config.deltas:
        span = TimeWindow.around(claim.time, delta, WindowKind.SPAN)
        try:
            volatile = compute_volatile_ids(store, claim, span, config.witness_threshold, stable)
        except InsufficientWitnesses as exc:
            if trace is not None:
                trace.append(ProofStep(delta, span, frozenset(), insufficient=exc))
            break
        proof_set = volatile.ids & claim.evidence
        if trace is not None:
            trace.append(ProofStep(delta, span, proof_set, volatile.witness_devices))
        if not proof_set:
            break
        if delta == timedelta(0):
            log.info("zero-delta proof set non-empty for %s at %s (not counted)", claim.claimant, format_time(claim.time))
        proof_delta = delta
    return proof_delta > timedelta(0), proof_delta


def period_containing(t: datetime, config: VerifierConfig) -> TimeWindow:
    offset = (to_utc(t) - config.period_anchor) // config.period
    start = config.period_anchor + offset * config.period
    return TimeWindow(start, start + config.period - timedelta(seconds=1), WindowKind.PERIOD)


def claim_admissible(claim: LocationClaim, config: VerifierConfig, now: datetime) -> bool:
    """A claim may be verified only once the period containing its time has closed."""
    return to_utc(now) > period_containing(claim.time, config).end


def issue_certificate(
    store,
    claim: LocationClaim,
    config: VerifierConfig,
    stable: StableMap,
    *,
    now: Optional[datetime] = None,
) -> LocationCertificate:
    """Estimate the prover's location, then bound the visit in time."""
    config.validate()
    if claim.loc not in stable:
        raise UnknownLocation(claim.loc)
    issued_at = to_utc(now or datetime.now(UTC))
    candidates = tuple(qualifying_locations(claim.evidence, stable, config.location_threshold))
    estimated = candidates[0] if candidates else None
    if estimated != claim.loc:
        return LocationCertificate(
            claim=claim,
            proof=False,
            proof_delta=timedelta(0),
            span=TimeWindow(claim.time, claim.time),
            witness_count=0,
            issued_at=issued_at,
            engine_config_digest=config.digest(),
            reason=LOCATION_MISMATCH,
            candidates=candidates,
        )
    trace: List[ProofStep] = []
    proof, proof_delta = time_bound_proof(store, claim, config, stable, trace=trace)
    step = next(s for s in trace if s.delta == proof_delta) if proof else trace[0]
    witnesses = step.insufficient.found if step.insufficient else len(step.witnesses)
    return LocationCertificate(
        claim=claim,
        proof=proof,
        proof_delta=proof_delta,
        span=TimeWindow.around(claim.time, proof_delta),
        witness_count=witnesses,
        issued_at=issued_at,
        engine_config_digest=config.digest(),
        reason=None if proof else NO_CORROBORATION,
        candidates=candidates,
    )
