"""
Stable fingerprints from a synthetic scene
==========================================

Long-lived access points identify a location. A scene with planted access
points lets us check both strategies against the truth: intersecting what
every device saw, and keeping the most frequently seen networks.
"""

from datetime import datetime, timedelta, timezone

from wifiproof import (
    ItineraryStep,
    LocationSpec,
    SceneConfig,
    TimeWindow,
    WindowKind,
    compute_stable_intersection,
    compute_stable_top_fraction,
    generate_scene,
    simulate_scans,
)
from wifiproof.store import ObservationStore

t0 = datetime(2019, 7, 30, 9, tzinfo=timezone.utc)
minute = timedelta(minutes=1)

locations = (LocationSpec("Alvalade", 12, 1.0), LocationSpec("Gulbenkian", 8, 0.7))
steps = []
for i, loc in enumerate(locations):
    start = t0 + i * 60 * minute
    for device in "ABC":
        steps.append(ItineraryStep(device, loc.id, TimeWindow(start, start + 20 * minute)))

scene = generate_scene(SceneConfig(seed=42, locations=locations, itineraries=tuple(steps)))
store = ObservationStore()
store.append(simulate_scans(scene))
epoch = TimeWindow(t0 - timedelta(days=1), t0 + timedelta(days=1), WindowKind.EPOCH)

# twenty scans per device are enough to see every access point at least once,
# even at 70% detection
stable = compute_stable_intersection(store, epoch)
for loc in stable.locations:
    print(loc, len(stable[loc]), "of", len(scene.stable[loc]), "planted")

top = compute_stable_top_fraction(store, epoch, 0.5)
print(top.sizes())

# the fingerprint file the verifier reads
print(stable.dumps()[:300])
