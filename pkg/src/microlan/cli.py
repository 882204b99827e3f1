"""Operator front door: serve the gateway, interrogate the tree, script
scenarios, dump bus transcripts.

`serve`, `scan`, `scenario` and `transcript` boot a simulated house from a
config file; `cat` and `set` are thin HTTP clients against a running
gateway.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import httpx

from .core import OneWireError
from .gateway import Gateway, GatewayConfig
from .house import build_world, load_house
from .sensor import CONVERSION_MS, convert_temperature, read_scratchpad


def _add_house_args(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--house", required=True, help="house config JSON")
    parser.add_argument("--seed", type=int, default=None, help="override the topology seed")


def _add_client_args(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--host", default="127.0.0.1")
    parser.add_argument("--http-port", type=int, default=8888)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="microlan")
    sub = parser.add_subparsers(dest="command", required=True)

    serve = sub.add_parser("serve", help="run the gateway service")
    _add_house_args(serve)
    serve.add_argument("--http-port", type=int, default=8888)
    serve.add_argument("--control-port", type=int, default=4304)
    serve.add_argument("--poll-interval-ms", type=int, default=1000)
    serve.add_argument("--host", default="127.0.0.1")
    serve.add_argument("--state-dir", default=None, help="threshold persistence directory")
    serve.add_argument(
        "--accelerated",
        action="store_true",
        help="poll as fast as possible instead of pacing by the poll interval",
    )

    scan = sub.add_parser("scan", help="enumerate the bus and print device ids")
    _add_house_args(scan)

    cat = sub.add_parser("cat", help="print one property from a running gateway")
    cat.add_argument("path", help="e.g. /1-wire/<id>/temperature")
    _add_client_args(cat)

    set_ = sub.add_parser("set", help="write one property on a running gateway")
    set_.add_argument("path")
    set_.add_argument("value")
    _add_client_args(set_)

    scenario = sub.add_parser("scenario", help="run a scripted scenario in process")
    scenario.add_argument("file", help="scenario JSON")
    _add_house_args(scenario)
    scenario.add_argument("--poll-interval-ms", type=int, default=1000)

    transcript = sub.add_parser("transcript", help="dump the bus transcript of a probe run")
    _add_house_args(transcript)
    transcript.add_argument("--via", choices=["direct", "bridge"], default="direct")
    transcript.add_argument("--normalize", action="store_true", help="expand to bit slots")
    transcript.add_argument(
        "--session", action="store_true", help="print the bridge session log instead"
    )
    return parser


def cmd_serve(args) -> int:
    from .api import GatewayService

    config = load_house(args.house, seed_override=args.seed)
    state_dir = Path(args.state_dir) if args.state_dir else None
    world = build_world(config, state_dir=state_dir)
    gateway = Gateway(
        world,
        GatewayConfig(
            http_port=args.http_port,
            control_port=args.control_port,
            poll_interval_ms=args.poll_interval_ms,
        ),
    )
    GatewayService(gateway, host=args.host, accelerated=args.accelerated).run()
    return 0


def cmd_scan(args) -> int:
    config = load_house(args.house, seed_override=args.seed)
    world = build_world(config)
    for text in sorted(rom.text for rom in world.link.search()):
        print(text)
    return 0


def cmd_cat(args) -> int:
    url = f"http://{args.host}:{args.http_port}{args.path}"
    response = httpx.get(url)
    if response.status_code >= 400:
        print(f"error: {response.status_code} {response.text.strip()}", file=sys.stderr)
        return 1
    sys.stdout.write(response.text)
    return 0


def cmd_set(args) -> int:
    url = f"http://{args.host}:{args.http_port}{args.path}"
    response = httpx.put(url, content=args.value)
    if response.status_code >= 400:
        print(f"error: {response.status_code} {response.text.strip()}", file=sys.stderr)
        return 1
    sys.stdout.write(response.text)
    return 0


def cmd_scenario(args) -> int:
    from .scenario import ScenarioRunner, load_scenario

    steps = load_scenario(args.file)
    config = load_house(args.house, seed_override=args.seed)
    runner = ScenarioRunner(
        config, GatewayConfig(poll_interval_ms=args.poll_interval_ms)
    )
    try:
        passed, reports = runner.execute(steps)
    finally:
        runner.close()
    for report in reports:
        print(report.line())
    print("PASS" if passed else "FAIL")
    return 0 if passed else 1


def cmd_transcript(args) -> int:
    config = load_house(args.house, seed_override=args.seed)
    world = build_world(config)
    master = world.link if args.via == "bridge" else world.bus
    start = len(world.bus.transcript.ops)
    for rom in master.search():
        convert_temperature(master, rom)
        world.clock.advance(CONVERSION_MS)
        read_scratchpad(master, rom)
    if args.session:
        if args.via != "bridge":
            print("error: --session requires --via bridge", file=sys.stderr)
            return 1
        for line in world.link.session_log_lines():
            print(line)
        return 0
    from .bus import Transcript

    tail = Transcript()
    for op in world.bus.transcript.ops[start:]:
        tail.append(op.kind, op.value)
    lines = tail.normalized_lines() if args.normalize else tail.lines()
    for line in lines:
        print(line)
    return 0


_COMMANDS = {
    "serve": cmd_serve,
    "scan": cmd_scan,
    "cat": cmd_cat,
    "set": cmd_set,
    "scenario": cmd_scenario,
    "transcript": cmd_transcript,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except OneWireError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except httpx.HTTPError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    raise SystemExit(main())
