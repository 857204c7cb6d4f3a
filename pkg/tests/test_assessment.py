from datetime import date, datetime, timedelta, timezone

import pytest

from scenes import MINUTE, T0, roundtrip_config, window
from wifiproof.assessment import (
    LXSPOTS_INTERVALS,
    LXSPOTS_REFERENCE,
    MatchTable,
    canonical_name,
    check_match_rates,
    check_stable_sizes,
    check_totals,
    check_volatile_by_device,
    check_volatile_by_location,
    eval_stable_identification,
    eval_volatile_matching,
    local_day_window,
    lxspots_training_window,
    mean_rate_by_location,
    resolve_names,
)
from wifiproof.core import WindowKind
from wifiproof.errors import InsufficientDevices, NoObservations
from wifiproof.netsets import StableMap, compute_stable_intersection
from wifiproof.simulator import ItineraryStep, LocationSpec, SceneConfig, TransientSpec, generate_scene, simulate_scans
from wifiproof.store import ObservationStore

UTC = timezone.utc
EPOCH = window(T0 - timedelta(days=1), T0 + timedelta(days=1), WindowKind.EPOCH)


def _store(cfg):
    scene = generate_scene(cfg)
    store = ObservationStore()
    store.append(simulate_scans(scene))
    return scene, store


def test_unchanged_aps_match_fully():
    scene, store = _store(roundtrip_config(11))
    stable = compute_stable_intersection(store, EPOCH)
    rates = eval_stable_identification(store, stable, EPOCH)
    assert set(rates.values()) == {1.0}
    assert len(rates) == 3 * 3
    assert mean_rate_by_location(rates) == {"L0": 1.0, "L1": 1.0, "L2": 1.0}


def test_test_window_without_observations():
    _, store = _store(roundtrip_config(11))
    early = window(T0 - timedelta(days=30), T0 - timedelta(days=29), WindowKind.PERIOD)
    with pytest.raises(NoObservations):
        eval_stable_identification(store, StableMap({}, EPOCH), early)


def _session_config(seed=4):
    """Three devices co-dwell 15 minutes at two locations; one short-lived hotspot per location."""
    steps, transients = [], []
    for i, loc in enumerate(("L", "M")):
        start = T0 + i * 60 * MINUTE
        for d in "ABC":
            steps.append(ItineraryStep(d, loc, window(start, start + 15 * MINUTE), timedelta(seconds=20)))
        # visible only in the first 3 minutes
        transients.append(TransientSpec(f"0e:00:00:00:00:0{i + 1}", loc, window(start, start + 3 * MINUTE)))
    return SceneConfig(seed, (LocationSpec("L", 8, 0.9), LocationSpec("M", 8, 0.9)), tuple(transients), tuple(steps))


def test_volatile_matching_tables():
    scene, store = _store(_session_config())
    stable = StableMap(scene.stable, EPOCH)
    result = eval_volatile_matching(store, stable, EPOCH, LXSPOTS_INTERVALS, fraction=1.0)
    loc, dev = result.by_location, result.by_device
    assert loc.pair_total == 6 and dev.pair_total == 4
    assert set(loc.rows) == {"L", "M"} and set(dev.rows) == {"A", "B", "C"}
    # the hotspot lies in the first piece at every length
    assert loc.rows["L"] == (6, 6, 6, 6)
    assert loc.percentages() == (100.0, 100.0, 100.0, 100.0)
    assert sum(dev.column_totals()) == sum(loc.column_totals())
    assert len(result.outcomes) == 2 * 6 * 4


def test_first_only_scores_the_first_piece():
    steps, transients = [], [TransientSpec("0e:00:00:00:00:09", "L", window(T0 + 10 * MINUTE, T0 + 12 * MINUTE))]
    for d in "AB":
        steps.append(ItineraryStep(d, "L", window(T0, T0 + 15 * MINUTE), timedelta(seconds=20)))
    scene, store = _store(SceneConfig(2, (LocationSpec("L", 5, 1.0),), tuple(transients), tuple(steps)))
    stable = StableMap(scene.stable, EPOCH)
    anywhere = eval_volatile_matching(store, stable, EPOCH, fraction=1.0)
    first = eval_volatile_matching(store, stable, EPOCH, fraction=1.0, first_only=True)
    assert anywhere.by_location.rows["L"] == (2, 2, 2, 2)
    assert first.by_location.rows["L"] == (2, 0, 0, 0)


@pytest.mark.parametrize("seed", range(5))
def test_success_is_monotone_over_nested_subdivisions(seed):
    # holds for the full volatile set; a bottom-fraction cut can differ per piece
    scene, store = _store(_session_config(seed))
    result = eval_volatile_matching(store, StableMap(scene.stable, EPOCH), EPOCH, fraction=1.0)
    for cells in result.by_location.rows.values():
        assert list(cells) == sorted(cells, reverse=True)
    for (loc, p, w, length), ok in result.outcomes.items():
        if ok and length != LXSPOTS_INTERVALS[0]:
            longer = LXSPOTS_INTERVALS[LXSPOTS_INTERVALS.index(length) - 1]
            assert result.outcomes[(loc, p, w, longer)]


def test_single_device_session():
    steps = (ItineraryStep("A", "L", window(T0, T0 + 15 * MINUTE)),)
    scene, store = _store(SceneConfig(2, (LocationSpec("L", 3),), (), steps))
    with pytest.raises(InsufficientDevices):
        eval_volatile_matching(store, StableMap(scene.stable, EPOCH), EPOCH)


def test_match_table_rendering_and_bounds():
    table = MatchTable({"Gulbenkian": (6, 6, 6, 6), "Comércio": (5, 1, 0, 0)}, LXSPOTS_INTERVALS, 6, "Location")
    assert table.to_csv().splitlines()[0] == "Location,15 min,7.5 min,3.75 min,1.875 min"
    text = table.to_text()
    assert "Gulbenkian" in text and text.endswith("(out of 6 pairs)")
    assert table.percentages()[0] == pytest.approx(100 * 11 / 12)
    with pytest.raises(ValueError):
        MatchTable({"X": (7, 0, 0, 0)}, LXSPOTS_INTERVALS, 6)


def test_names_resolve_without_accents():
    assert canonical_name("Jerónimos") == canonical_name("JERONIMOS")
    assert resolve_names(["Sé", "Oceanário"], ["Se", "Oceanario", "x"]) == {"Sé": "Se", "Oceanário": "Oceanario"}


def test_local_day_windows():
    w = local_day_window(date(2019, 7, 19))
    assert w.start == datetime(2019, 7, 18, 23, tzinfo=UTC)
    assert w.end == datetime(2019, 7, 19, 22, 59, 59, tzinfo=UTC)
    training = lxspots_training_window()
    assert training.start.date() == date(2019, 7, 18) and training.end.date() == date(2019, 8, 19)


def test_reference_values_pass_their_own_checks():
    ref = LXSPOTS_REFERENCE
    assert check_totals(ref["total"]).ok
    assert not check_totals({**ref["total"], "Sé": 364}).ok
    assert check_stable_sizes({k: v + 5 for k, v in ref["stable"].items()}).ok
    assert not check_stable_sizes({k: v + 6 for k, v in ref["stable"].items()}).ok
    assert check_match_rates({"Alvalade": 0.93, "Gulbenkian": 0.94, "Jeronimos": 0.14}).ok
    assert not check_match_rates({"Alvalade": 0.92, "Gulbenkian": 0.89, "Jerónimos": 0.14}).ok
    loc = MatchTable(dict(ref["volatile_by_location"]), LXSPOTS_INTERVALS, 6)
    assert all(c.ok for c in check_volatile_by_location(loc))
    dev = MatchTable(dict(ref["volatile_by_device"]), LXSPOTS_INTERVALS, 12)
    assert check_volatile_by_device(dev).ok
    assert check_totals(ref["total"]).line().startswith("PASS")
