from datetime import timedelta

import pytest

from conftest import DAY1, mac, make_obs, store_of
from wifiproof.core import LocationClaim, TimeWindow, WindowKind, network
from wifiproof.errors import (
    ConfigInvalid,
    EmptyStableSet,
    InsufficientWitnesses,
    KindMismatch,
    NoObservations,
    NonDisjointStableSets,
)
from wifiproof.netsets import (
    StableMap,
    StableStrategy,
    bottom_fraction_volatile,
    compute_stable_intersection,
    compute_stable_top_fraction,
    compute_volatile_bottom_fraction,
    compute_volatile_ids,
    select_bottom,
    select_top,
    stable_match_rate,
)

EPOCH = TimeWindow(DAY1 - timedelta(days=1), DAY1 + timedelta(days=1), WindowKind.EPOCH)
SPAN = TimeWindow(DAY1 - timedelta(minutes=30), DAY1 + timedelta(minutes=30))
X, Y, Z, W = 1, 2, 3, 4


def ids(*ns):
    return frozenset(network(mac(n)) for n in ns)


def test_intersection_of_two_devices():
    store = store_of([make_obs(b, device="A") for b in (X, Y, Z)] + [make_obs(b, device="B") for b in (Y, Z, W)])
    stable = compute_stable_intersection(store, EPOCH)
    assert stable["L"] == ids(Y, Z)
    assert stable.strategy is StableStrategy.DEVICE_INTERSECTION


def test_intersection_single_device():
    store = store_of([make_obs(X), make_obs(Y)])
    assert compute_stable_intersection(store, EPOCH)["L"] == ids(X, Y)


def test_shared_network_breaks_disjointness():
    rows = [make_obs(9, loc="L"), make_obs(1, loc="L"), make_obs(9, loc="M"), make_obs(2, loc="M")]
    with pytest.raises(NonDisjointStableSets) as err:
        compute_stable_intersection(store_of(rows), EPOCH)
    assert err.value.networks == sorted(ids(9))
    relaxed = compute_stable_intersection(store_of(rows), EPOCH, strict=False)
    assert relaxed["L"] == ids(1, 9)


def test_empty_location_fingerprint():
    rows = [make_obs(1, device="A"), make_obs(2, device="B")]
    with pytest.raises(EmptyStableSet):
        compute_stable_intersection(store_of(rows), EPOCH)


def test_empty_epoch():
    far = TimeWindow(DAY1 + timedelta(days=30), DAY1 + timedelta(days=31), WindowKind.EPOCH)
    with pytest.raises(NoObservations):
        compute_stable_intersection(store_of([make_obs(1)]), far)


def _counted(counts, loc="L"):
    rows = []
    for b, c in counts.items():
        rows += [make_obs(b, loc=loc, t=DAY1 + timedelta(seconds=i)) for i in range(c)]
    return rows


def test_top_fraction_without_tie():
    store = store_of(_counted({n: 11 - n for n in range(1, 11)}))
    assert compute_stable_top_fraction(store, EPOCH, 0.10)["L"] == ids(1)


def test_top_fraction_tie_extends():
    store = store_of(_counted({n: 3 for n in range(1, 6)}))
    assert compute_stable_top_fraction(store, EPOCH, 0.20)["L"] == ids(1, 2, 3, 4, 5)


def test_top_fraction_rounding_is_not_fooled_by_float_error():
    counts = {network(mac(n)): 100 - n for n in range(70)}
    # 0.1 * 70 == 7.000000000000001 in binary
    assert len(select_top(counts, 0.1)) == 7


def test_top_fraction_drops_shared_networks():
    rows = _counted({1: 5, 2: 1, 3: 1}, "L") + _counted({1: 5, 4: 4, 5: 1}, "M")
    stable = compute_stable_top_fraction(store_of(rows), EPOCH, 0.5, strict=False)
    assert stable.dropped == ids(1)
    assert stable["L"] == ids(2, 3) and stable["M"] == ids(4)


@pytest.mark.parametrize("fraction", [0, -0.1, 1.5, "0.1"])
def test_fraction_must_be_in_unit_interval(fraction):
    with pytest.raises(ConfigInvalid):
        select_top({}, fraction)


def test_match_rate():
    stable = StableMap({"L": ids(1, 2, 3, 4)}, EPOCH)
    assert stable_match_rate(stable, "L", ids(1, 2, 3, 4, 9)) == 1.0
    assert stable_match_rate(stable, "L", ids(7)) == 0.0
    assert stable_match_rate(stable, "L", ids(1)) == 0.25


def test_stable_map_json_roundtrip():
    stable = StableMap({"M": ids(3), "L": ids(2, 1)}, EPOCH, StableStrategy.TOP_FRACTION, 0.1, ids(9))
    text = stable.dumps()
    assert StableMap.loads(text) == stable
    assert text == StableMap.loads(text).dumps()
    assert text.index('"L"') < text.index('"M"')


A, B, C, S = 10, 11, 12, 13


def _fig4_store():
    rows = [make_obs(b, device="W1") for b in (A, B, S)] + [make_obs(b, device="W2") for b in (B, C, S)]
    rows += [make_obs(b, device="P") for b in (A, C, S, 99)]
    return store_of(rows)


def test_volatile_ids_from_two_witnesses():
    stable = StableMap({"L": ids(S)}, EPOCH)
    claim = LocationClaim("P", "L", DAY1)
    got = compute_volatile_ids(_fig4_store(), claim, SPAN, 2, stable)
    assert got.ids == ids(B)
    assert got.witness_devices == {"W1", "W2"}


def test_volatile_ids_single_witness():
    store = store_of([make_obs(1, device="W1"), make_obs(1, device="P")])
    claim = LocationClaim("P", "L", DAY1)
    with pytest.raises(InsufficientWitnesses) as err:
        compute_volatile_ids(store, claim, SPAN, 2, StableMap({"L": ids(5)}, EPOCH))
    assert (err.value.found, err.value.required) == (1, 2)


def test_volatile_ids_disjoint_witnesses():
    store = store_of([make_obs(1, device="W1"), make_obs(2, device="W2")])
    got = compute_volatile_ids(store, LocationClaim("P", "L", DAY1), SPAN, 2, StableMap({"L": ids(5)}, EPOCH))
    assert got.ids == frozenset()


def test_volatile_ids_need_a_span():
    with pytest.raises(KindMismatch):
        compute_volatile_ids(_fig4_store(), LocationClaim("P", "L", DAY1), EPOCH, 2, StableMap({"L": ids(S)}, EPOCH))


def test_bottom_fraction_example():
    rows = _counted({A: 1, B: 1, C: 9, S: 9})
    stable = StableMap({"L": ids(S)}, EPOCH)
    assert compute_volatile_bottom_fraction(store_of(rows), "L", EPOCH, "A", 0.5, stable) == ids(A, B)


def test_bottom_fraction_all_stable():
    rows = _counted({A: 1, B: 2})
    assert bottom_fraction_volatile(rows, 1.0, ids(A, B)) == frozenset()


def test_bottom_fraction_no_rows_for_device():
    with pytest.raises(NoObservations):
        compute_volatile_bottom_fraction(store_of(_counted({A: 1})), "L", EPOCH, "Q", 0.5, StableMap({}, EPOCH))


def test_one_scan_transient_is_in_bottom_fraction():
    counts = {network(mac(n)): 20 for n in range(1, 20)}
    counts[network(mac(99))] = 1
    # fraction >= 1 / distinct
    assert network(mac(99)) in select_bottom(counts, 1 / len(counts))
