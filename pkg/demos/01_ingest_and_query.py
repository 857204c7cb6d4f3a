"""
Ingesting scan traces and querying the store
============================================

A trace is a CSV file with one row per (scan, access point). This script
writes a small trace by hand, ingests it into an on-disk store and runs a
few queries against it.
"""

import io
import tempfile
from datetime import datetime, timezone

from wifiproof import ObservationStore, ObsFilter, TimeWindow, distinct_transmitters, occurrence_counts

trace = """device_id,date,time,ref_name,latitude,longitude,altitude,accuracy,SSID,BSSID,capabilities,frequency,level,centerfreq0,centerfreq1,channelwidth
A,2019-07-19,11:02:03,Alvalade,38.754,-9.146,90,12,MEO-WiFi,AA:BB:CC:00:11:22,[ESS],2412,-67,0,0,0
A,2019-07-19,11:03:03,Alvalade,38.754,-9.146,90,12,MEO-WiFi,AA:BB:CC:00:11:22,[ESS],2412,-65,0,0,0
B,2019-07-19,11:02:40,Alvalade,,,,,cafe,AA:BB:CC:00:11:23,[ESS],2437,-80,0,0,1
B,2019-07-19,11:04:00,Alvalade,,,,,broken,AA:BB:CC:00:11:24,[ESS],2437,7,0,0,0
"""

store = ObservationStore.open(tempfile.mkdtemp() + "/store")
report = store.ingest_csv(io.BytesIO(trace.encode()))
print(report.to_json())  # the last row has a positive level and is rejected

# dates and times in the trace are Lisbon local time; the store keeps UTC
for obs in store.snapshot().observations():
    print(obs.obs_time.isoformat(), obs.device, obs.bssid, obs.radio.channel_width)

day = TimeWindow(datetime(2019, 7, 19, tzinfo=timezone.utc), datetime(2019, 7, 19, 23, 59, 59, tzinfo=timezone.utc))
rows = store.query(ObsFilter(time_window=day, location="Alvalade"))
print(len(distinct_transmitters(rows)), "distinct networks")
print({n.bssid: c for n, c in occurrence_counts(rows).items()})

# reopening the directory replays the append-only log
print(len(ObservationStore.open(store.path)), "observations after reopen")
