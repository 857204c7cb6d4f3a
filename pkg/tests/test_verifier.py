from datetime import datetime, timedelta, timezone

import pytest

from conftest import DAY1, mac, make_obs, store_of
from scenes import HOTSPOT, time_bound_scene
from wifiproof.core import LocationClaim, TimeWindow, WindowKind, network
from wifiproof.errors import ConfigInvalid, UnknownLocation
from wifiproof.netsets import StableMap
from wifiproof.verifier import (
    DEFAULT_DELTAS,
    LOCATION_MISMATCH,
    VerifierConfig,
    claim_admissible,
    estimate_location,
    issue_certificate,
    period_containing,
    qualifying_locations,
    time_bound_proof,
)

UTC = timezone.utc
EPOCH = TimeWindow(DAY1 - timedelta(days=7), DAY1, WindowKind.EPOCH)
MIN = timedelta(minutes=1)


def ids(*ns):
    return frozenset(network(mac(n)) for n in ns)


STABLE = StableMap({"L": ids(1, 2, 3, 4), "M": ids(5, 6)}, EPOCH)


def test_estimate_full_containment():
    assert estimate_location(ids(1, 2, 3, 4), STABLE, 4) == "L"


def test_estimate_empty_evidence():
    assert estimate_location(frozenset(), STABLE, 1) is None
    assert estimate_location(frozenset(), STABLE, 0.5) is None


def test_estimate_tie_goes_to_smaller_id():
    evidence = ids(1, 2, 5, 6)
    assert qualifying_locations(evidence, STABLE, 2) == ["L", "M"]
    assert estimate_location(evidence, STABLE, 2) == "L"


def test_estimate_fraction_threshold():
    assert estimate_location(ids(1, 2), STABLE, 0.5) == "L"
    assert estimate_location(ids(1), STABLE, 0.5) is None
    assert estimate_location(ids(5), STABLE, 0.5) == "M"


def test_estimate_ignores_unfingerprinted_networks():
    assert estimate_location(ids(5, 6, 70, 71, 72), STABLE, 2) == estimate_location(ids(5, 6), STABLE, 2)


def test_config_defaults_and_validation():
    cfg = VerifierConfig()
    assert cfg.deltas == DEFAULT_DELTAS and len(cfg.deltas) == 8
    assert cfg.witness_threshold == 2
    assert VerifierConfig.from_json(cfg.to_json()) == cfg
    assert cfg.digest() == VerifierConfig().digest()
    assert cfg.digest() != VerifierConfig(witness_threshold=3).digest()
    bad = [
        VerifierConfig(deltas=(MIN, 2 * MIN)),
        VerifierConfig(deltas=(-MIN,)),
        VerifierConfig(deltas=(timedelta(days=2),)),
        VerifierConfig(epoch=timedelta(days=1)),
        VerifierConfig(witness_threshold=0),
    ]
    for cfg in bad:
        with pytest.raises(ConfigInvalid):
            cfg.validate()
    with pytest.raises(ConfigInvalid):
        VerifierConfig(deltas=("PT5Q",))


def test_config_accepts_iso_durations():
    cfg = VerifierConfig(deltas=("PT10M", "PT5M", "PT0S"), epoch="P7D", period="P1D")
    assert cfg.deltas == (10 * MIN, 5 * MIN, timedelta(0))


def _witness_store(offsets_by_device, volatile=50, claimant_extra=()):
    """Stable networks 1..4 plus network ``volatile`` seen at the given minute offsets."""
    rows = []
    for device, offsets in offsets_by_device.items():
        for off in offsets:
            t = DAY1 + timedelta(seconds=off)
            rows += [make_obs(b, device=device, t=t) for b in (1, 2, 3, 4, volatile)]
    rows += [make_obs(b, device="P", t=DAY1) for b in (1, 2, 3, 4, *claimant_extra)]
    return store_of(rows)


def test_empty_evidence_never_proves():
    store = _witness_store({"W1": [0], "W2": [0]})
    claim = LocationClaim("P", "L", DAY1)
    assert time_bound_proof(store, claim, VerifierConfig(), STABLE) == (False, timedelta(0))


def test_five_minute_scene():
    # both witnesses see the hotspot only 4 minutes from the claim
    store = _witness_store({"W1": [-240], "W2": [240]})
    claim = LocationClaim("P", "L", DAY1, ids(1, 2, 3, 4, 50))
    assert time_bound_proof(store, claim, VerifierConfig(), STABLE) == (True, 5 * MIN)


def test_one_minute_scene():
    # shared at 30 s, nothing shared at the claim instant itself
    store = _witness_store({"W1": [-30], "W2": [30]})
    claim = LocationClaim("P", "L", DAY1, ids(1, 2, 3, 4, 50))
    trace = []
    assert time_bound_proof(store, claim, VerifierConfig(), STABLE, trace=trace) == (True, MIN)
    assert [s.delta for s in trace] == list(DEFAULT_DELTAS)
    assert trace[-1].insufficient is not None


def test_zero_delta_success_does_not_prove():
    store = _witness_store({"W1": [0], "W2": [0]})
    claim = LocationClaim("P", "L", DAY1, ids(50))
    proof, delta = time_bound_proof(store, claim, VerifierConfig(), STABLE)
    assert (proof, delta) == (False, timedelta(0))


def test_unknown_location():
    store = _witness_store({"W1": [0], "W2": [0]})
    with pytest.raises(UnknownLocation):
        time_bound_proof(store, LocationClaim("P", "Q", DAY1), VerifierConfig(), STABLE)


def test_certificate_proves_and_records_span():
    store = _witness_store({"W1": [-240], "W2": [240]})
    claim = LocationClaim("P", "L", DAY1, ids(1, 2, 3, 4, 50))
    cert = issue_certificate(store, claim, VerifierConfig(), STABLE, now=DAY1 + timedelta(days=2))
    assert cert.proof and cert.proof_delta == 5 * MIN
    assert cert.span.start == DAY1 - 5 * MIN and cert.span.end == DAY1 + 5 * MIN
    assert cert.witness_count == 2
    doc = cert.to_json()
    assert doc["proof_delta_seconds"] == 300 and doc["claim"]["device"] == "P"
    assert doc["engine_config_digest"] == VerifierConfig().digest()


def test_certificate_location_mismatch():
    store = _witness_store({"W1": [0], "W2": [0]})
    claim = LocationClaim("P", "L", DAY1, ids(5, 6, 50))
    cert = issue_certificate(store, claim, VerifierConfig(), STABLE, now=DAY1)
    assert not cert.proof and cert.reason == LOCATION_MISMATCH
    assert cert.candidates == ("M",)


def test_certificate_without_witnesses():
    store = _witness_store({})
    claim = LocationClaim("P", "L", DAY1, ids(1, 2, 3, 4))
    cert = issue_certificate(store, claim, VerifierConfig(), STABLE, now=DAY1)
    assert not cert.proof and cert.proof_delta == timedelta(0) and cert.witness_count == 0


def test_period_admissibility():
    cfg = VerifierConfig()
    t = datetime(2019, 7, 30, 15, 0, tzinfo=UTC)
    period = period_containing(t, cfg)
    assert period.start == datetime(2019, 7, 30, tzinfo=UTC)
    claim = LocationClaim("P", "L", t)
    assert not claim_admissible(claim, cfg, t + timedelta(hours=1))
    assert not claim_admissible(claim, cfg, period.end)
    assert claim_admissible(claim, cfg, datetime(2019, 7, 31, tzinfo=UTC))


@pytest.mark.parametrize("seed", range(3))
def test_planted_hotspot_scene(seed):
    scene, store, stable, claim = time_bound_scene(seed, 10 * MIN)
    assert network(HOTSPOT) in claim.evidence
    proof, delta = time_bound_proof(store, claim, VerifierConfig(), stable)
    assert proof and delta == 10 * MIN
