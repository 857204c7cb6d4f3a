"""
Volatile networks shared by witnesses
=====================================

Two witnesses stand near the prover. Whatever both of them saw during a
span, minus the location's stable networks, is the span's volatile set.
"""

from datetime import datetime, timedelta, timezone

from wifiproof import LocationClaim, NetworkId, Observation, RadioMeta, StableMap, TimeWindow, WindowKind
from wifiproof.netsets import compute_volatile_ids, select_bottom
from wifiproof.store import ObservationStore, occurrence_counts

t = datetime(2019, 7, 30, 12, tzinfo=timezone.utc)
a, b, c, s = (NetworkId(f"0e:00:00:00:00:0{i}") for i in range(1, 5))


def seen(device, net, n=0):
    return Observation("", t + timedelta(seconds=n), "Sé", device, net, RadioMeta(frequency=2412, level=-60))


store = ObservationStore()
store.append([seen("W1", a), seen("W1", b), seen("W1", s), seen("W2", b), seen("W2", c), seen("W2", s)])
stable = StableMap({"Sé": {s}}, TimeWindow(t - timedelta(days=7), t, WindowKind.EPOCH))

claim = LocationClaim("P", "Sé", t)
span = TimeWindow.around(t, timedelta(minutes=5))
volatile = compute_volatile_ids(store, claim, span, 2, stable)
print(sorted(n.bssid for n in volatile.ids), "from", sorted(volatile.witness_devices))

# the evaluation harness uses a frequency cut instead: the rarest networks of one device
rows = [seen("W1", s, i) for i in range(9)] + [seen("W1", a), seen("W1", b)] + [seen("W1", c, i) for i in range(9)]
print(sorted(n.bssid for n in select_bottom(occurrence_counts(rows), 0.5) - stable["Sé"]))
