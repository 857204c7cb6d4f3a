import sys
from datetime import datetime, timedelta, timezone
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from wifiproof.core import NetworkId, Observation, RadioMeta  # noqa: E402
from wifiproof.store import ObservationStore  # noqa: E402

UTC = timezone.utc
DAY1 = datetime(2019, 7, 19, 10, 0, 0, tzinfo=UTC)


def mac(n: int) -> str:
    return ":".join(f"{(n >> s) & 0xFF:02x}" for s in range(40, -8, -8))


def make_obs(bssid, device="A", loc="L", t=DAY1, obs_id="", ssid="", level=-60):
    if isinstance(bssid, int):
        bssid = mac(bssid)
    return Observation(obs_id, t, loc, device, NetworkId(bssid, ssid), RadioMeta(frequency=2412, level=level))


def store_of(rows) -> ObservationStore:
    store = ObservationStore()
    report = store.append(rows)
    assert report.rejected == 0, report
    return store


@pytest.fixture
def minutes():
    return lambda m: timedelta(minutes=m)


def pytest_terminal_summary(terminalreporter):
    acceptance = sys.modules.get("test_acceptance")
    results = getattr(acceptance, "RESULTS", None)
    if results:
        terminalreporter.section("acceptance criteria")
        for key in sorted(results):
            terminalreporter.write_line(results[key])
