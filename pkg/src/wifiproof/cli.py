"""Command-line entry point: ``wifiproof <command> ...``."""

from __future__ import annotations

import argparse
import glob
import json
import logging
import sys
from datetime import date, datetime
from pathlib import Path
from typing import List, Optional, Sequence

from . import assessment
from .core import LocationClaim, TimeWindow, WindowKind, format_time, parse_time
from .errors import MissingColumn, ProofError, reason_tag
from .netsets import StableMap, compute_stable_intersection, compute_stable_top_fraction
from .service import ServiceConfig, serve
from .simulator import generate_scene, scene_from_json, simulate_scans
from .store import IngestReport, ObservationStore, ObsFilter, distinct_transmitters, observations_to_csv
from .verifier import VerifierConfig, claim_admissible, issue_certificate

EXIT_INPUT = 2
EXIT_NETSETS = 3
EXIT_PERIOD_OPEN = 4


def _load_json(path) -> dict:
    return json.loads(Path(path).read_text(encoding="utf-8"))


def _config_doc(args) -> dict:
    return _load_json(args.config) if getattr(args, "config", None) else {}


def _verifier_config(args) -> VerifierConfig:
    doc = dict(_config_doc(args).get("verifier", {}))
    if getattr(args, "witness_threshold", None) is not None:
        doc["witness_threshold"] = args.witness_threshold
    if getattr(args, "location_threshold", None) is not None:
        doc["location_threshold"] = _threshold(args.location_threshold)
    if getattr(args, "deltas", None):
        doc["deltas"] = [d.strip() for d in args.deltas.split(",")]
    return VerifierConfig.from_json(doc)


def _threshold(text: str):
    return float(text) if any(c in text for c in ".eE") else int(text)


def _bound(text: str, end: bool) -> datetime:
    """A bare date means the whole local day at the collection site."""
    try:
        day = date.fromisoformat(text)
    except ValueError:
        return parse_time(text)
    window = assessment.local_day_window(day)
    return window.end if end else window.start


def _window(start: str, end: str, kind=WindowKind.EPOCH) -> TimeWindow:
    return TimeWindow(_bound(start, False), _bound(end, True), kind)


def _store_from(args, doc: Optional[dict] = None) -> ObservationStore:
    path = args.store or (doc or {}).get("store")
    if not path:
        raise SystemExit("error: --store is required")
    return ObservationStore.open(path)


def cmd_ingest(args) -> int:
    paths: List[str] = []
    for pattern in args.paths:
        matched = sorted(glob.glob(pattern, recursive=True))
        paths.extend(matched if matched else ([pattern] if Path(pattern).is_file() else []))
    if not paths:
        print("no input", file=sys.stderr)
        return EXIT_INPUT
    store = _store_from(args, _config_doc(args))
    total = IngestReport()
    per_file = {}
    status = 0
    for path in paths:
        try:
            with open(path, "rb") as fh:
                report = store.ingest_csv(fh, device_hint=args.device)
        except MissingColumn as exc:
            status = 1
            report = IngestReport()
            report.reasons[reason_tag(exc)] += 1
            per_file[path] = {**report.to_json(), "error": str(exc)}
            continue
        except ProofError as exc:
            report = IngestReport()
            per_file[path] = {**report.to_json(), "error": str(exc)}
            continue
        per_file[path] = report.to_json()
        total = total + report
    print(json.dumps({"files": per_file, "total": total.to_json()}, indent=1, ensure_ascii=False))
    return status


def cmd_compute_stable(args) -> int:
    doc = _config_doc(args)
    store = _store_from(args, doc)
    epoch = _window(args.start, args.end)
    try:
        if args.strategy == "intersection":
            stable = compute_stable_intersection(store, epoch, strict=not args.no_strict)
        else:
            stable = compute_stable_top_fraction(store, epoch, args.fraction, strict=not args.no_strict)
    except ProofError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NETSETS
    out = args.out or doc.get("fingerprint")
    if out:
        Path(out).parent.mkdir(parents=True, exist_ok=True)
        Path(out).write_text(stable.dumps(), encoding="utf-8")
    else:
        sys.stdout.write(stable.dumps())
    snap = store.snapshot()
    rows = [("Location", "Stable set", "Total")]
    for loc in stable.locations:
        total = len(distinct_transmitters(snap.query(ObsFilter(time_window=epoch, location=loc))))
        rows.append((loc, str(len(stable[loc])), str(total)))
    width = max(len(r[0]) for r in rows)
    summary = [f"{r[0].ljust(width)}  {r[1]:>10}  {r[2]:>6}" for r in rows]
    if stable.dropped:
        summary.append(f"dropped (selected at several locations): {len(stable.dropped)}")
    print("\n".join(summary), file=sys.stderr if not out else sys.stdout)
    return 0


def cmd_verify_claim(args) -> int:
    doc = _config_doc(args)
    store = _store_from(args, doc)
    config = _verifier_config(args)
    stable = StableMap.loads(Path(args.fingerprint or doc["fingerprint"]).read_text(encoding="utf-8"))
    claim = LocationClaim.from_json(_load_json(args.claim))
    now = parse_time(args.now) if args.now else None
    if now is not None and not claim_admissible(claim, config, now):
        print("error: the period containing the claim time has not closed", file=sys.stderr)
        return EXIT_PERIOD_OPEN
    cert = issue_certificate(store.snapshot(), claim, config, stable, now=now)
    print(json.dumps(cert.to_json(), indent=1, sort_keys=True, ensure_ascii=False))
    return 0


def _fingerprint_for_assessment(args, store) -> StableMap:
    if args.fingerprint:
        return StableMap.loads(Path(args.fingerprint).read_text(encoding="utf-8"))
    epoch = _window(args.train_from, args.train_to)
    return compute_stable_top_fraction(store, epoch, args.fraction)


def cmd_assess(args) -> int:
    store = _store_from(args, _config_doc(args))
    try:
        stable = _fingerprint_for_assessment(args, store)
        if args.kind == "stable":
            rates = assessment.eval_stable_identification(store, stable, _window(args.test_from, args.test_to, WindowKind.PERIOD))
            means = assessment.mean_rate_by_location(rates)
            lines = ["location,device,match_rate"] + [f"{l},{d},{r:.4f}" for (l, d), r in rates.items()]
            lines += [f"{l},mean,{r:.4f}" for l, r in means.items()]
            print("\n".join(lines))
            checks = [assessment.check_match_rates(means)] if args.check else []
        else:
            intervals = [assessment.parse_minutes(x) for x in args.intervals.split(",")]
            result = assessment.eval_volatile_matching(
                store,
                stable,
                _window(args.session_from, args.session_to, WindowKind.PERIOD),
                intervals,
                args.volatile_fraction,
                first_only=args.first_only,
            )
            for table in (result.by_location, result.by_device):
                print(table.to_csv() if args.format == "csv" else table.to_text())
                print()
            pct = ", ".join(f"{p:.0f}%" for p in result.by_location.percentages())
            print(f"aggregate success: {pct}")
            checks = []
            if args.check:
                checks = assessment.check_volatile_by_location(result.by_location)
                checks.append(assessment.check_volatile_by_device(result.by_device))
    except ProofError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NETSETS
    for check in checks:
        print(check.line())
    return 0 if all(c.ok for c in checks) else 1


def cmd_simulate(args) -> int:
    scene = generate_scene(scene_from_json(_load_json(args.scene)))
    observations = simulate_scans(scene)
    if args.out:
        with open(args.out, "w", encoding="utf-8", newline="") as fh:
            observations_to_csv(observations, fh)
    else:
        observations_to_csv(observations, sys.stdout)
    if args.truth:
        truth = {
            "stable": {loc: sorted(n.bssid for n in ids) for loc, ids in sorted(scene.stable.items())},
            "transients": {
                n.bssid: {"start": format_time(w.start), "end": format_time(w.end)}
                for n, w in sorted(scene.transient_visibility.items())
            },
        }
        Path(args.truth).write_text(json.dumps(truth, indent=1, sort_keys=True), encoding="utf-8")
    return 0


def cmd_serve(args) -> int:
    doc = _config_doc(args)
    if args.store:
        doc["store"] = args.store
    if args.fingerprint:
        doc["fingerprint"] = args.fingerprint
    if args.host:
        doc["host"] = args.host
    if args.port is not None:
        doc["port"] = args.port
    doc["verifier"] = _verifier_config(args).to_json()
    serve(ServiceConfig.from_json(doc))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="wifiproof", description="Wi-Fi scavenging location proofs")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, store=True):
        p.add_argument("--config", help="JSON configuration file")
        if store:
            p.add_argument("--store", help="store directory")

    p = sub.add_parser("ingest", help="append CSV trace files to the store")
    common(p)
    p.add_argument("paths", nargs="*")
    p.add_argument("--device", help="device id for rows without one")
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("compute-stable", help="compute the stable fingerprint file")
    common(p)
    p.add_argument("--strategy", choices=("intersection", "top-fraction"), default="intersection")
    p.add_argument("--fraction", type=float, default=0.10)
    p.add_argument("--from", dest="start", required=True, help="date (local day) or ISO timestamp")
    p.add_argument("--to", dest="end", required=True)
    p.add_argument("--out", help="fingerprint path (default: config 'fingerprint' or stdout)")
    p.add_argument("--no-strict", action="store_true", help="skip the non-empty/disjoint checks")
    p.set_defaults(func=cmd_compute_stable)

    p = sub.add_parser("verify-claim", help="verify a claim JSON file offline")
    common(p)
    p.add_argument("--fingerprint")
    p.add_argument("--claim", required=True)
    p.add_argument("--now", help="reference time for the period admissibility check")
    p.add_argument("--witness-threshold", type=int)
    p.add_argument("--location-threshold")
    p.add_argument("--deltas", help="comma-separated ISO-8601 durations, descending")
    p.set_defaults(func=cmd_verify_claim)

    p = sub.add_parser("assess", help="reproduce the stable/volatile evaluation tables")
    common(p)
    p.add_argument("kind", choices=("stable", "volatile"))
    p.add_argument("--fingerprint", help="use this fingerprint instead of training one")
    p.add_argument("--train-from", default="2019-07-19")
    p.add_argument("--train-to", default="2019-08-19")
    p.add_argument("--fraction", type=float, default=0.10, help="stable top fraction")
    p.add_argument("--test-from", default="2020-01-19")
    p.add_argument("--test-to", default="2020-01-19")
    p.add_argument("--session-from", default="2020-01-19")
    p.add_argument("--session-to", default="2020-01-19")
    p.add_argument("--intervals", default="15,7.5,3.75,1.875", help="sub-interval lengths in minutes")
    p.add_argument("--volatile-fraction", type=float, default=0.10)
    p.add_argument("--first-only", action="store_true", help="score only the first sub-interval")
    p.add_argument("--format", choices=("text", "csv"), default="text")
    p.add_argument("--check", action="store_true", help="exit 1 unless the reference tolerance bands hold")
    p.set_defaults(func=cmd_assess)

    p = sub.add_parser("simulate", help="generate a synthetic scene as CSV")
    p.add_argument("scene", help="scene configuration JSON")
    p.add_argument("--out")
    p.add_argument("--truth", help="write planted ground truth JSON here")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("serve", help="run the verifier HTTP service")
    common(p)
    p.add_argument("--fingerprint")
    p.add_argument("--host")
    p.add_argument("--port", type=int)
    p.add_argument("--witness-threshold", type=int)
    p.add_argument("--location-threshold")
    p.add_argument("--deltas")
    p.set_defaults(func=cmd_serve)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ProofError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
