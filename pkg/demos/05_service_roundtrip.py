"""
The verifier over HTTP
======================

Start the service on a free port, post observations, compute the
fingerprint with the command-line tool and submit a claim.
"""

import json
import tempfile
import threading
import urllib.request
from datetime import datetime, timedelta, timezone
from pathlib import Path

from wifiproof import ItineraryStep, LocationClaim, LocationSpec, SceneConfig, TimeWindow, TransientSpec, VerifierConfig
from wifiproof import generate_scene, simulate_scans
from wifiproof.cli import main as cli
from wifiproof.core import format_time
from wifiproof.service import VerifierService, make_server
from wifiproof.store import ObservationStore, observation_to_record

t0 = datetime(2019, 7, 30, 12, tzinfo=timezone.utc)
m, day = timedelta(minutes=1), timedelta(days=1)
steps = (
    ItineraryStep("T1", "Oceanário", TimeWindow(t0 - day, t0 - day + 30 * m)),
    ItineraryStep("T2", "Oceanário", TimeWindow(t0 - day, t0 - day + 30 * m)),
    ItineraryStep("P", "Oceanário", TimeWindow(t0 - 30 * m, t0 + 30 * m)),
    ItineraryStep("W1", "Oceanário", TimeWindow(t0 - 30 * m, t0 - 13 * m)),
    ItineraryStep("W2", "Oceanário", TimeWindow(t0 + 13 * m, t0 + 30 * m)),
)
hotspot = TransientSpec("0e:00:00:00:00:01", "Oceanário", TimeWindow(t0 - 15 * m, t0 + 15 * m))
scans = simulate_scans(generate_scene(SceneConfig(3, (LocationSpec("Oceanário", 6),), (hotspot,), steps)))

work = Path(tempfile.mkdtemp())
service = VerifierService(ObservationStore.open(work / "store"), work / "fingerprint.json", VerifierConfig())
server = make_server(service)
threading.Thread(target=server.serve_forever, daemon=True).start()
base = "http://%s:%d" % server.server_address[:2]


def post(path, body):
    req = urllib.request.Request(base + path, json.dumps(body).encode(), {"Content-Type": "application/json"})
    with urllib.request.urlopen(req) as resp:
        return json.loads(resp.read())


print(post("/observations", [observation_to_record(o) for o in scans]))
cli(["compute-stable", "--store", str(work / "store"), "--out", str(work / "fingerprint.json"),
     "--from", format_time(t0 - 2 * day), "--to", format_time(t0 - day + 60 * m)])

evidence = {o.transmitter for o in scans if o.device == "P"}
cert = post("/claims", LocationClaim("P", "Oceanário", t0, evidence, t0).to_json())
print(json.dumps({k: cert[k] for k in ("proof", "proof_delta_seconds", "span", "witness_count")}, indent=1))
server.shutdown()
