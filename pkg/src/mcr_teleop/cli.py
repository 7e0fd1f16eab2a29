"""Command-line entry points: scenario trials, estimation benchmarks, and
the network service.

Exit codes follow the trial contract: run-trial returns 0 only when every
requested subtask succeeded, 2 on bad usage or unreadable inputs.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path
from typing import List, Optional

import numpy as np

from .config import StackConfig
from .errors import EmptyInput, InvalidSpec, IoFailure
from .harness import export_report, load_scenario, run_trial, success_rate
from .vio import (
    absolute_position_error,
    default_trajectory_spec,
    estimate_stream,
    generate_test_trajectory,
    load_presets,
)


def _resolve_preset(parser: argparse.ArgumentParser, name: Optional[str]):
    if name is None or name == "ideal":
        return None
    presets = load_presets()
    if name not in presets:
        parser.error(f"unknown preset {name!r}; choose from "
                     f"{', '.join(sorted(presets))} or ideal")
    return presets[name]


def run_trial_main(argv: Optional[List[str]] = None) -> int:
    parser = argparse.ArgumentParser(
        prog="run-trial",
        description="Run one scripted teleoperation trial and score it.")
    parser.add_argument("--scenario", default=None,
                        help="scenario YAML (default: packaged home-care scene)")
    parser.add_argument("--source", default="autopilot",
                        choices=["autopilot", "replay", "live"],
                        help="interface frame source")
    parser.add_argument("--preset", default=None,
                        help="sensing preset for the autopilot source "
                             "(default: ideal, no noise)")
    parser.add_argument("--seed", type=int, default=0, help="trial seed")
    parser.add_argument("--out", default=None,
                        help="directory for the CSV/JSON report and the "
                             "recorded interface stream")
    parser.add_argument("--replay", default=None,
                        help="recorded stream to play back (source=replay)")
    args = parser.parse_args(argv)

    preset = _resolve_preset(parser, args.preset)
    try:
        spec = load_scenario(args.scenario)
    except (OSError, InvalidSpec, KeyError) as e:
        parser.error(f"cannot load scenario: {e}")

    record_to = None
    if args.out is not None and args.source != "replay":
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        record_to = str(out / "stream.bin")

    try:
        metrics = run_trial(spec, source=args.source, seed=args.seed,
                            preset=preset, replay_path=args.replay,
                            record_to=record_to)
    except (InvalidSpec, IoFailure) as e:
        parser.error(str(e))

    for r in metrics.subtasks:
        status = "ok" if r.success else "failed"
        print(f"{r.name:<22} {status:<7} {r.duration:7.2f} s")
    print(f"{'T_c':<22} {'':<7} {metrics.t_c:7.2f} s")
    print(f"success rate: {success_rate([metrics]):.3f}")

    if args.out is not None:
        paths = export_report([metrics], args.out)
        print(f"report: {paths['report']}")
        if record_to is not None:
            print(f"stream: {record_to}")
    return 0 if metrics.all_succeeded else 1


def vio_bench_main(argv: Optional[List[str]] = None) -> int:
    parser = argparse.ArgumentParser(
        prog="vio-bench",
        description="Benchmark a sensing preset over the test trajectory.")
    parser.add_argument("--preset", required=True, help="preset name")
    parser.add_argument("--seeds", type=int, default=50,
                        help="number of seeds to average (default 50)")
    parser.add_argument("--out", default=".",
                        help="directory for the CSV series and JSON summary")
    args = parser.parse_args(argv)

    presets = load_presets()
    if args.preset not in presets:
        parser.error(f"unknown preset {args.preset!r}; choose from "
                     f"{', '.join(sorted(presets))}")
    if args.seeds < 1:
        parser.error("--seeds must be at least 1")
    preset = presets[args.preset]

    gt = generate_test_trajectory(default_trajectory_spec())
    series = []
    averages = []
    times = None
    for seed in range(args.seeds):
        est = estimate_stream(gt, preset, seed=seed)
        errors, mean = absolute_position_error(est, gt)
        series.append(errors)
        averages.append(mean)
        times = est.times
    mean_series = np.mean(series, axis=0)
    average_error = float(np.mean(averages))

    out = Path(args.out)
    try:
        out.mkdir(parents=True, exist_ok=True)
        csv_path = out / f"vio_{preset.name}.csv"
        with open(csv_path, "w", newline="") as f:
            writer = csv.writer(f)
            writer.writerow(["t", "error"])
            for t, e in zip(times, mean_series):
                writer.writerow([f"{t:.6f}", repr(float(e))])
        summary = {"setup": preset.name, "average_error": average_error,
                   "rate": preset.rate}
        json_path = out / f"vio_{preset.name}.json"
        with open(json_path, "w") as f:
            json.dump(summary, f, indent=2, sort_keys=True)
            f.write("\n")
    except OSError as e:
        print(f"cannot write report: {e}", file=sys.stderr)
        return 2
    print(f"{preset.name}: average error {average_error:.4f} m "
          f"over {args.seeds} seeds at {preset.rate:g} Hz")
    print(f"series: {csv_path}")
    print(f"summary: {json_path}")
    return 0


def serve_main(argv: Optional[List[str]] = None) -> int:
    parser = argparse.ArgumentParser(
        prog="teleop-serve",
        description="Serve the simulated robot over UDP/TCP/WebSocket.")
    parser.add_argument("--scenario", default=None,
                        help="scenario YAML (default: packaged home-care scene)")
    parser.add_argument("--bind", default=None,
                        help="bind address (overrides config and MCR_TELEOP_BIND)")
    parser.add_argument("--seed", type=int, default=0, help="stack seed")
    parser.add_argument("--duration", type=float, default=None,
                        help="stop after this many sim seconds (default: run "
                             "until interrupted)")
    args = parser.parse_args(argv)

    from .server import TeleopService

    try:
        spec = load_scenario(args.scenario)
    except (OSError, InvalidSpec, KeyError) as e:
        parser.error(f"cannot load scenario: {e}")
    service = TeleopService(StackConfig.default(), spec, bind=args.bind,
                            seed=args.seed)
    try:
        service.start()
    except OSError as e:
        print(f"cannot bind sockets: {e}", file=sys.stderr)
        return 2
    # flushed so supervisors piping stdout can parse the ports right away
    print(f"serving {spec.name} on {service.bind}: "
          f"commands udp/{service.command_port}, "
          f"telemetry tcp/{service.telemetry_port}, "
          f"web ws/{service.web_port}", flush=True)
    try:
        service.serve(duration=args.duration)
    except KeyboardInterrupt:
        pass
    finally:
        service.stop()
    return 0
