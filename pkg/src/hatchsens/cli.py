"""Operator command line: validate configs, run simulations (batch or live),
replay persisted runs, and emit reports.

Exit codes: 0 success, 2 invalid config, 3 run terminated while gate-blocked,
4 I/O or corrupt run directory.
"""

from __future__ import annotations

import argparse
import datetime
import json
import os
import sys
import threading
from pathlib import Path

from .config import ConfigError, load_config, semantic_errors, with_seed
from .engine import Simulation
from .lifecycle import RunPhase
from .persist import ReplayError
from .replay import replay_run
from .report import ReportError, finalize_report, render_markdown, write_report

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_BLOCKED = 3
EXIT_IO = 4


def _default_out_dir(label: str, seed: int) -> Path:
    base = Path(os.environ.get("HATCHSENS_OUT", "runs"))
    stamp = datetime.datetime.now().strftime("%Y%m%d-%H%M%S")
    return base / f"{label}-seed{seed}-{stamp}"


def _console_dist() -> Path | None:
    candidate = os.environ.get("HATCHSENS_CONSOLE", "frontend/dist")
    path = Path(candidate)
    return path if path.is_dir() else None


def cmd_validate(args) -> int:
    try:
        cfg, errors = load_config(args.config)
    except ConfigError as err:
        for e in err.errors:
            print(f"error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    errors = errors + semantic_errors(cfg)
    if errors:
        for e in errors:
            print(f"error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    print(f"ok: {args.config}")
    return EXIT_OK


def cmd_run(args) -> int:
    try:
        cfg, errors = load_config(args.config)
    except ConfigError as err:
        for e in err.errors:
            print(f"error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    if errors:
        for e in errors:
            print(f"error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    cfg = with_seed(cfg, args.seed)
    if args.batch:
        cfg.mode = "batch"
    elif args.live:
        cfg.mode = "live"
    if args.accel is not None:
        cfg.accel = args.accel
    if args.serve is not None:
        cfg.serve = args.serve
    if args.max_duration is not None:
        cfg.max_duration_s = args.max_duration
    out_dir = Path(args.out) if args.out else Path(cfg.out_dir or _default_out_dir(cfg.label, cfg.seed))

    try:
        if cfg.mode == "batch":
            return _run_batch(cfg, out_dir)
        return _run_live(cfg, out_dir)
    except OSError as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_IO


def _run_batch(cfg, out_dir: Path) -> int:
    sim = Simulation(cfg, out_dir=out_dir)
    result = sim.run_batch()
    sim.persister.close()
    if result.final_phase is RunPhase.ANALYSIS:
        write_report(out_dir)
    print(
        f"run finished: phase={result.final_phase.value} sim_t={result.sim_t:.0f}s "
        f"out={out_dir}"
    )
    for reason in result.blockers:
        print(f"gate blocked: {reason}", file=sys.stderr)
    return result.exit_code


def _run_live(cfg, out_dir: Path) -> int:
    from .server import EventBus, LiveView, make_app, serve

    bus = EventBus()
    sim = Simulation(cfg, out_dir=out_dir, publisher=bus.publish)
    stop_event = threading.Event()
    outcome: dict = {}

    def drive():
        result = sim.run_live(stop_event)
        sim.persister.close()
        if result.final_phase is RunPhase.ANALYSIS:
            write_report(out_dir)
        outcome["result"] = result

    if cfg.serve:
        thread = threading.Thread(target=drive, daemon=True)
        thread.start()
        app = make_app(LiveView(sim, bus), static_dir=_console_dist())
        print(f"serving on http://{cfg.serve} (run dir {out_dir})")
        try:
            serve(app, cfg.serve)
        finally:
            stop_event.set()
            thread.join(timeout=5.0)
    else:
        drive()
    result = outcome.get("result")
    return result.exit_code if result is not None else EXIT_OK


def cmd_replay(args) -> int:
    try:
        state = replay_run(args.run_dir)
    except (ReplayError, OSError) as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_IO
    gw = state.gateway
    print(
        f"replayed {args.run_dir}: {len(gw.readings)} readings, "
        f"{len(gw.alerts)} alerts, h_est={gw.estimator.h_est:.4f}"
    )
    if args.serve:
        from .server import ReplayView, make_app, serve

        app = make_app(ReplayView(state), static_dir=_console_dist())
        print(f"serving replay read-only on http://{args.serve}")
        serve(app, args.serve)
    return EXIT_OK


def cmd_report(args) -> int:
    try:
        report = finalize_report(args.run_dir)
    except (ReportError, ReplayError, OSError, json.JSONDecodeError) as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_IO
    if args.format == "md":
        output = render_markdown(report)
    else:
        output = json.dumps(report, sort_keys=True, indent=2) + "\n"
    if args.out:
        Path(args.out).write_text(output, encoding="utf-8")
    else:
        sys.stdout.write(output)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="hatchsens",
        description="Simulated wireless sensor network for a hatching culture",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate", help="check a run config file")
    p.add_argument("config")
    p.set_defaults(fn=cmd_validate)

    p = sub.add_parser("run", help="execute a run")
    p.add_argument("--config", required=True)
    p.add_argument("--seed", type=int, default=None, help="override run.seed")
    mode = p.add_mutually_exclusive_group()
    mode.add_argument("--batch", action="store_true", help="run as fast as possible")
    mode.add_argument("--live", action="store_true", help="pace sim time against wall clock")
    p.add_argument("--accel", type=float, default=None, help="live pacing factor")
    p.add_argument("--serve", default=None, help="host:port for the live API")
    p.add_argument("--max-duration", type=float, default=None, help="sim seconds cap")
    p.add_argument("--out", default=None, help="run directory (default under $HATCHSENS_OUT)")
    p.set_defaults(fn=cmd_run)

    p = sub.add_parser("replay", help="rebuild gateway state from a run directory")
    p.add_argument("run_dir")
    p.add_argument("--serve", default=None, help="serve the replayed run read-only")
    p.set_defaults(fn=cmd_replay)

    p = sub.add_parser("report", help="emit the analysis report for a run directory")
    p.add_argument("run_dir")
    p.add_argument("--format", choices=("json", "md"), default="json")
    p.add_argument("--out", default=None, help="write to a file instead of stdout")
    p.set_defaults(fn=cmd_report)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.fn(args)


if __name__ == "__main__":
    sys.exit(main())
