"""
Bounding a visit in time
========================

A hotspot is switched on for ten minutes around the prover's claimed time.
Witness W1 leaves shortly after it appears and W2 arrives shortly before it
disappears, so the witnesses only share it in spans reaching those edges.
The verifier shrinks the span until corroboration breaks.
"""

from datetime import datetime, timedelta, timezone

from wifiproof import (
    ItineraryStep,
    LocationClaim,
    LocationSpec,
    SceneConfig,
    TimeWindow,
    TransientSpec,
    VerifierConfig,
    WindowKind,
    compute_stable_intersection,
    generate_scene,
    issue_certificate,
    simulate_scans,
)
from wifiproof.store import ObservationStore
from wifiproof.verifier import time_bound_proof

t0 = datetime(2019, 7, 30, 12, tzinfo=timezone.utc)
m, day = timedelta(minutes=1), timedelta(days=1)
w = 5 * m

steps = (
    # a training visit the day before fixes the stable fingerprint
    ItineraryStep("T1", "Comércio", TimeWindow(t0 - day, t0 - day + 30 * m)),
    ItineraryStep("T2", "Comércio", TimeWindow(t0 - day, t0 - day + 30 * m)),
    ItineraryStep("P", "Comércio", TimeWindow(t0 - 60 * m, t0 + 60 * m)),
    ItineraryStep("W1", "Comércio", TimeWindow(t0 - 60 * m, t0 - w + 2 * m)),
    ItineraryStep("W2", "Comércio", TimeWindow(t0 + w - 2 * m, t0 + 60 * m)),
)
hotspot = TransientSpec("0e:00:00:00:00:01", "Comércio", TimeWindow(t0 - w, t0 + w), "phone-hotspot")
config = SceneConfig(7, (LocationSpec("Comércio", 8, 0.9),), (hotspot,), steps)

store = ObservationStore()
store.append(simulate_scans(generate_scene(config)))
stable = compute_stable_intersection(store, TimeWindow(t0 - 2 * day, t0 - day + 60 * m, WindowKind.EPOCH))

evidence = {o.transmitter for o in store.snapshot().observations() if o.device == "P"}
claim = LocationClaim("P", "Comércio", t0, evidence, t0 + day)

trace = []
print(time_bound_proof(store, claim, VerifierConfig(), stable, trace=trace))
for step in trace:
    print(f"  +/-{step.delta}  shared volatile evidence: {sorted(n.ssid or n.bssid for n in step.proof_set)}")

cert = issue_certificate(store, claim, VerifierConfig(), stable)
print(cert.to_json()["proof"], cert.to_json()["span"])
