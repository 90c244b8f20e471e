"""Command line front end.

``gpsentry run`` processes a baseband trace and reports spoofing
alerts (exit code 2 when any fire, 0 on a clean run, 1 on errors).
``gpsentry forge`` synthesizes test scenes.  ``gpsentry geometry``
surveys worst-case displacement bounds over random constellations.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

from .forge import (AttackScenario, MessageMutations, SatelliteSpec,
                    SceneConfig, forge_scene)
from .pvt import survey_geometries
from .receiver import ReceiverConfig, Receiver


def _build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="gpsentry",
        description="spoofing-aware GPS L1 C/A software receiver")
    sub = ap.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="process a baseband trace")
    run.add_argument("trace", help="interleaved complex float32 file")
    run.add_argument("--config", help="key=value config file")
    run.add_argument("--set", action="append", default=[], metavar="K=V",
                     help="override a single config key")
    run.add_argument("--sample-rate", type=float, default=None)
    run.add_argument("--reference", default=None,
                     help="expected broadcast parameters (json)")
    run.add_argument("--report", default=None, help="write text report here")
    run.add_argument("--alerts", default=None, help="write alerts jsonl here")
    run.add_argument("--pvt", default=None, help="write fixes csv here")
    run.add_argument("--quiet", action="store_true")

    fg = sub.add_parser("forge", help="synthesize a scene")
    fg.add_argument("out", help="output trace path")
    fg.add_argument("--kind", default="clean")
    fg.add_argument("--duration", type=float, default=30.0)
    fg.add_argument("--sample-rate", type=float, default=2.046e6)
    fg.add_argument("--seed", type=int, default=1)
    fg.add_argument("--sat", action="append", default=[],
                    metavar="PRN:AZ:EL[:CN0]",
                    help="satellite spec, repeatable")
    fg.add_argument("--start-s", type=float, default=10.0)
    fg.add_argument("--delay-ns", type=float, default=1200.0)
    fg.add_argument("--power-db", type=float, default=3.0)
    fg.add_argument("--carrier-offset-hz", type=float, default=None)
    fg.add_argument("--drift-ns-per-s", type=float, default=50.0)
    fg.add_argument("--clock-drift-ppm", type=float, default=0.0)
    fg.add_argument("--start-tow", type=int, default=43200,
                    help="time of week at trace start, 6 s units; the "
                         "value mod 5 picks which subframe id opens")
    fg.add_argument("--reference", default=None,
                    help="also write expected broadcast parameters here")
    fg.add_argument("--target-prn", type=int, default=None)
    fg.add_argument("--tow-jump", type=int, default=0)
    fg.add_argument("--tow-jump-at", type=float, default=18.0)
    fg.add_argument("--week-offset", type=int, default=0)
    fg.add_argument("--week-offset-at", type=float, default=18.0)
    fg.add_argument("--zero-sqrt-a", action="store_true")
    fg.add_argument("--eph-swap-at", type=float, default=None)

    geo = sub.add_parser("geometry", help="survey displacement bounds")
    geo.add_argument("--sats", type=int, default=8)
    geo.add_argument("--trials", type=int, default=200)
    geo.add_argument("--seed", type=int, default=7)
    geo.add_argument("--tau-ns", type=float, default=500.0)
    return ap


def _cmd_run(args) -> int:
    cfg = (ReceiverConfig.from_file(args.config) if args.config
           else ReceiverConfig())
    sidecar_path = args.trace + ".json"
    if args.sample_rate is None and os.path.exists(sidecar_path):
        with open(sidecar_path) as fh:
            side = json.load(fh)
        cfg = cfg.with_override("sample_rate_hz",
                                str(side["sample_rate_hz"]))
    for kv in args.set:
        if "=" not in kv:
            raise ValueError(f"--set expects key=value, got: {kv}")
        cfg = cfg.with_override(*(s.strip() for s in kv.split("=", 1)))
    if args.sample_rate is not None:
        cfg = cfg.with_override("sample_rate_hz", str(args.sample_rate))
    if args.reference:
        cfg = cfg.with_override("reference_path", args.reference)
    cfg = cfg.with_override("input_path", args.trace)
    report = Receiver(cfg).run()
    report.write_outputs(args.report, args.alerts, args.pvt)
    if not args.quiet:
        sys.stdout.write(report.text())
    return 2 if report.spoofing_detected else 0


def _parse_sats(specs: list[str]) -> list[SatelliteSpec] | None:
    if not specs:
        return None
    out = []
    for s in specs:
        parts = s.split(":")
        if len(parts) not in (3, 4):
            raise ValueError(f"bad --sat spec: {s}")
        cn0 = float(parts[3]) if len(parts) == 4 else 45.0
        out.append(SatelliteSpec(prn=int(parts[0]),
                                 azimuth_deg=float(parts[1]),
                                 elevation_deg=float(parts[2]),
                                 cn0_dbhz=cn0))
    return out


def _cmd_forge(args) -> int:
    mutations = None
    if (args.tow_jump or args.week_offset or args.zero_sqrt_a
            or args.eph_swap_at is not None):
        mutations = MessageMutations(
            target_prn=args.target_prn,
            tow_jump_units=args.tow_jump, tow_jump_at_s=args.tow_jump_at,
            week_offset=args.week_offset,
            week_offset_at_s=args.week_offset_at,
            zero_sqrt_a=args.zero_sqrt_a,
            ephemeris_swap_at_s=(args.eph_swap_at
                                 if args.eph_swap_at is not None
                                 else float("inf")))
    scenario = AttackScenario(
        kind=args.kind, start_s=args.start_s, delay_ns=args.delay_ns,
        power_db=args.power_db, carrier_offset_hz=args.carrier_offset_hz,
        drift_ns_per_s=args.drift_ns_per_s, mutations=mutations)
    cfg = SceneConfig(sample_rate_hz=args.sample_rate,
                      duration_s=args.duration, seed=args.seed,
                      scenario=scenario,
                      start_tow_units=args.start_tow,
                      clock_drift_ppm=args.clock_drift_ppm)
    sats = _parse_sats(args.sat)
    if sats is not None:
        cfg.satellites = sats
    forge_scene(cfg, args.out, reference_path=args.reference)
    sys.stdout.write(f"wrote {args.out} ({args.duration:.1f}s at "
                     f"{args.sample_rate:.0f} Hz, kind={args.kind})\n")
    return 0


def _cmd_geometry(args) -> int:
    survey = survey_geometries(args.trials, args.sats, args.seed,
                               tau_max_ns=args.tau_ns)
    sys.stdout.write(
        f"trials={survey.n_trials} sats={survey.n_sats} "
        f"tau_max={survey.tau_max_ns:.0f}ns\n"
        f"gdop: median={survey.gdop_median:.2f} p95={survey.gdop_p95:.2f}\n"
        f"max displacement: median={survey.offset_median_m:.1f}m "
        f"p95={survey.offset_p95_m:.1f}m max={survey.offset_max_m:.1f}m\n")
    return 0


def main(argv: list[str] | None = None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        if args.command == "run":
            return _cmd_run(args)
        if args.command == "forge":
            return _cmd_forge(args)
        return _cmd_geometry(args)
    except (OSError, ValueError) as exc:
        sys.stderr.write(f"error: {exc}\n")
        return 1


if __name__ == "__main__":
    sys.exit(main())
