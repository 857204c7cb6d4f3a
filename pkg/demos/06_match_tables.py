"""
Volatile match tables
=====================

Three devices spend fifteen minutes together at each of two locations.
Each ordered pair of devices succeeds at a sub-interval length when their
rarest networks overlap inside some piece of that length.
"""

from datetime import datetime, timedelta, timezone

from wifiproof import ItineraryStep, LocationSpec, SceneConfig, StableMap, TimeWindow, TransientSpec, WindowKind
from wifiproof import generate_scene, simulate_scans
from wifiproof.assessment import LXSPOTS_INTERVALS, eval_volatile_matching
from wifiproof.store import ObservationStore

t0 = datetime(2020, 1, 19, 10, tzinfo=timezone.utc)
m = timedelta(minutes=1)
steps, transients = [], []
for i, loc in enumerate(("Jerónimos", "Sé")):
    start = t0 + i * 60 * m
    steps += [ItineraryStep(d, loc, TimeWindow(start, start + 15 * m), timedelta(seconds=20)) for d in "ABC"]
    # a short-lived phone hotspot in the middle of each session
    transients.append(TransientSpec(f"0e:00:00:00:00:0{i + 1}", loc, TimeWindow(start + 5 * m, start + 7 * m)))

scene = generate_scene(SceneConfig(5, (LocationSpec("Jerónimos", 10, 0.8), LocationSpec("Sé", 10, 0.8)), tuple(transients), tuple(steps)))
store = ObservationStore()
store.append(simulate_scans(scene))
stable = StableMap(scene.stable, TimeWindow(t0 - timedelta(days=7), t0, WindowKind.EPOCH))

result = eval_volatile_matching(store, stable, TimeWindow(t0, t0 + 3 * 60 * m), LXSPOTS_INTERVALS, fraction=0.10)
print(result.by_location.to_text())
print()
print(result.by_device.to_text())
# the 10% rarest-network cut is taken per piece, so a shorter piece can keep a
# network a longer one cut; success need not fall as the pieces shrink
print("success:", [f"{p:.0f}%" for p in result.by_location.percentages()])

# scoring only the first piece of each subdivision misses the hotspot once
# the pieces get shorter than five minutes
first = eval_volatile_matching(store, stable, TimeWindow(t0, t0 + 3 * 60 * m), LXSPOTS_INTERVALS, 0.10, first_only=True)
print("first piece only:", [f"{p:.0f}%" for p in first.by_location.percentages()])
