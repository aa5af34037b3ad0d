"""Command-line front end.

Subcommands: simulate, analyze, decode-file, frames, passes, serve.
Errors print one JSON object to stderr and exit nonzero.
"""
from __future__ import annotations

import argparse
import dataclasses
import json
import sys
from importlib import resources
from pathlib import Path

from . import telemetry as tm
from .analysis import AnalysisError, report_archive
from .config import ConfigError, MissionConfig, load_config
from .environment import next_passes
from .mission import CommandError, parse_schedule, run_campaign
from .onboard_file import FileCodecError, decode_file
from .server import serve


def _fail(message: str, code: int = 1) -> int:
    print(json.dumps({"error": message}), file=sys.stderr)
    return code


def _load_config_arg(path: str | None) -> MissionConfig:
    return load_config(path) if path else MissionConfig()


def _cmd_simulate(args) -> int:
    config = _load_config_arg(args.config)
    if args.seed is not None:
        config = dataclasses.replace(config, seed=args.seed)
    if args.schedule:
        schedule = parse_schedule(Path(args.schedule).read_text())
    else:
        schedule = parse_schedule(
            resources.files("pairsat.data").joinpath("default_schedule.json").read_text()
        )
    runtime, report = run_campaign(config, args.days, schedule, args.out)
    summary = {
        "epoch_s": runtime.epoch_s,
        "files": sorted(runtime.archive_images),
        "events": len(runtime.event_log),
        "out": args.out,
    }
    if report is not None:
        fits = [
            {"file_id": f["file_id"], "profile_id": f["profile_id"],
             "visibility": f["fit"]["visibility"] if f.get("fit") else None}
            for f in report["files"]
        ]
        summary["fits"] = fits
    print(json.dumps(summary, indent=2))
    return 0


def _cmd_analyze(args) -> int:
    report = report_archive(args.in_dir, args.out)
    print(json.dumps({"files": len(report["files"]), "out": args.out}))
    return 0


def _cmd_decode_file(args) -> int:
    image = Path(args.image).read_bytes()
    f = decode_file(image)
    doc = {
        "profile_id": f"0x{f.profile_id:02X}",
        "version": f.version,
        "start_epoch_s": f.start_epoch_s,
        "bias_mv": f.bias_mv,
        "config_hash": f"0x{f.config_hash:08X}",
        "dark_records": len(f.dark_records),
        "runs": len(f.runs),
    }
    if args.hex:
        doc["header_hex"] = image[:64].hex()
    if args.records:
        doc["run_records"] = [
            {
                "run_seq": r.run_seq,
                "epoch_offset_s": r.epoch_offset_s,
                "pump_centimw": r.pump_centimw,
                "valid": r.valid,
                "settings": [
                    {"index": s.setting_index, "angle_deg": s.angle_deg, "s1": s.s1,
                     "s2": s.s2, "coinc": s.coinc, "t1_c": s.t1_centideg_c / 100.0,
                     "flags": s.flags}
                    for s in r.settings
                ],
            }
            for r in f.runs
        ]
    print(json.dumps(doc, indent=2))
    return 0


def _cmd_frames(args) -> int:
    if args.action == "encode":
        image = Path(args.input).read_bytes()
        frames = tm.frame_file(image, args.file_id)
        blob = b"".join(tm.encode_frame(f) for f in frames)
        Path(args.out).write_bytes(blob)
        print(json.dumps({"frames": len(frames), "bytes": len(blob), "out": args.out}))
        return 0
    stream = Path(args.input).read_bytes()
    frames = list(tm.deframe_stream(stream))
    doc = {
        "frames": len(frames),
        "file_ids": sorted({f.file_id for f in frames}),
        "seqs": [f.seq for f in frames[:32]],
    }
    print(json.dumps(doc))
    return 0


def _cmd_passes(args) -> int:
    config = _load_config_arg(args.config)
    rows = next_passes(args.from_s, args.count, config.orbit, config.station)
    for p in rows:
        print(json.dumps({
            "aos_epoch_s": p.aos_epoch_s,
            "los_epoch_s": p.los_epoch_s,
            "duration_s": p.duration_s,
            "max_elevation_deg": p.max_elevation_deg,
        }))
    return 0


def _cmd_serve(args) -> int:
    serve(_load_config_arg(args.config), args.addr)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="pairsat",
                                     description="photon-pair nanosatellite mission simulator")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="run a campaign and write its archive")
    p.add_argument("--config", help="mission config JSON (defaults built in)")
    p.add_argument("--days", type=float, default=40.0)
    p.add_argument("--schedule", help="command schedule JSON (default: first-light at day 36)")
    p.add_argument("--seed", type=int, help="override the config seed")
    p.add_argument("--out", required=True, help="archive output directory")
    p.set_defaults(func=_cmd_simulate)

    p = sub.add_parser("analyze", help="analyze raw file images from an archive")
    p.add_argument("--in", dest="in_dir", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_analyze)

    p = sub.add_parser("decode-file", help="dump an onboard file image as JSON")
    p.add_argument("image")
    p.add_argument("--hex", action="store_true", help="include the raw header hex")
    p.add_argument("--records", action="store_true", help="include every run record")
    p.set_defaults(func=_cmd_decode_file)

    p = sub.add_parser("frames", help="encode a file image to frames, or decode a frame stream")
    p.add_argument("action", choices=["encode", "decode"])
    p.add_argument("input")
    p.add_argument("--file-id", type=int, default=1)
    p.add_argument("--out", help="output path (encode)")
    p.set_defaults(func=_cmd_frames)

    p = sub.add_parser("passes", help="predict ground-station passes")
    p.add_argument("--from", dest="from_s", type=int, default=0)
    p.add_argument("--count", type=int, default=5)
    p.add_argument("--config")
    p.set_defaults(func=_cmd_passes)

    p = sub.add_parser("serve", help="serve the operations API")
    p.add_argument("--config")
    p.add_argument("--addr", default="127.0.0.1:8600")
    p.set_defaults(func=_cmd_serve)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command == "frames" and args.action == "encode" and not args.out:
        return _fail("frames encode requires --out", 2)
    try:
        return args.func(args)
    except FileNotFoundError as exc:
        return _fail(f"no such file: {exc.filename}", 2)
    except (ConfigError, CommandError, AnalysisError, FileCodecError, ValueError) as exc:
        return _fail(str(exc), 1)


if __name__ == "__main__":
    sys.exit(main())
