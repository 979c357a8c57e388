"""Command line front end: ``run``, ``compare``, ``replay`` and ``validate``.

Exit codes: 0 ok, 2 invalid scenario, 3 I/O failure, 4 bad feed.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
from importlib import resources

from . import __version__
from .domain import DomainError
from .engine import Policy, Simulation, run
from .report import render
from .scenario import ScenarioError, load_scenario
from .wire import AllocMsg, DatagramFeed, FeedOrderError, StatusMsg, TransportError, replay_feed, serialize

EXIT_OK, EXIT_INVALID, EXIT_IO, EXIT_FEED = 0, 2, 3, 4


class CliFailure(Exception):
    def __init__(self, code, message):
        self.code = code
        super().__init__(message)


def builtin_scenarios():
    root = resources.files("rfidsim") / "scenarios"
    return sorted(p.name[:-5] for p in root.iterdir() if p.name.endswith(".toml"))


def resolve_scenario(spec):
    """A bare name such as ``canonical`` picks a packaged scenario; anything else is a path."""
    if os.sep not in spec and not spec.endswith(".toml") and spec in builtin_scenarios():
        with resources.as_file(resources.files("rfidsim") / "scenarios" / f"{spec}.toml") as p:
            return _load(p)
    return _load(spec)


def _load(path):
    try:
        return load_scenario(path)
    except ScenarioError as exc:
        raise CliFailure(EXIT_INVALID, "\n".join(f"{path}: {p}" for p in exc.problems)) from None
    except OSError as exc:
        raise CliFailure(EXIT_IO, f"cannot read scenario {path}: {exc.strerror or exc}") from None


def _write(path, text):
    if path in (None, "-"):
        sys.stdout.write(text)
        return
    try:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
    except OSError as exc:
        raise CliFailure(EXIT_IO, f"cannot write {path}: {exc.strerror or exc}") from None


def _read_report(path):
    try:
        with open(path, encoding="utf-8") as fh:
            return json.load(fh)
    except (OSError, ValueError) as exc:
        raise CliFailure(EXIT_IO, f"cannot read report {path}: {exc}") from None


def cmd_run(args):
    scenario = resolve_scenario(args.scenario)
    if args.ticks is not None and args.ticks < 1:
        raise CliFailure(EXIT_INVALID, "--ticks must be >= 1")
    report = run(scenario, args.policy, seed=args.seed, duration_ticks=args.ticks)
    _write(args.out, report.to_json())
    return EXIT_OK


def cmd_compare(args):
    a = _read_report(args.report_a)
    b = _read_report(args.report_b)
    try:
        if a["scenario_digest"] != b["scenario_digest"]:
            print("warning: reports were produced from different scenarios", file=sys.stderr)
        text = render(a, b, args.format, args.with_literature)
    except (KeyError, TypeError) as exc:
        raise CliFailure(EXIT_IO, f"malformed report: missing {exc}") from None
    _write(args.out, text)
    return EXIT_OK


def cmd_validate(args):
    scenario = resolve_scenario(args.scenario)
    print(f"ok: {scenario.name}: {len(scenario.nodes)} nodes, {scenario.duration_ticks} ticks, "
          f"digest {scenario.digest()[:16]}")
    return EXIT_OK


def tick_of(timestamp_ms, tick_dt_s):
    # tolerance absorbs binary rounding of tick_dt_s * 1000
    return int(math.floor(timestamp_ms / (tick_dt_s * 1000.0) + 1e-9))


def _emit(result, out):
    for e in result.plan.entries:
        out.write(serialize(AllocMsg(e.node_id, e.final_hz)))
    out.write(serialize(StatusMsg(result.bandwidth_optimized_pct, result.load_reduced_pct)))


def replay(scenario, stream, policy=Policy.RFID, ticks=None, out=None, on_tick=None):
    """Drive a simulation from ``(TagMsg, sender)`` pairs; return the report.

    Tags whose timestamp falls in interval ``t`` are ingested at the start of
    tick ``t``.  Without ``ticks`` the run ends with the interval holding the
    last tag (at least one interval).  ``on_tick(result, senders)`` is called
    after every interval with the senders whose tags it consumed.
    """
    sim = Simulation(scenario, policy, traffic=False)
    dt = scenario.tick_dt_s
    pending, senders = [], []

    def advance(upto):
        nonlocal pending, senders
        while sim.tick <= upto and (ticks is None or sim.tick < ticks):
            due = [m for m in pending if tick_of(m.timestamp_ms, dt) <= sim.tick]
            pending = [m for m in pending if tick_of(m.timestamp_ms, dt) > sim.tick]
            who = senders if due else []
            if due:
                senders = []
            result = sim.step(m.to_event() for m in due)
            if out is not None:
                _emit(result, out)
            if on_tick is not None:
                on_tick(result, who)

    for msg, sender in stream:
        t = tick_of(msg.timestamp_ms, dt)
        if ticks is not None and t >= ticks:
            break
        advance(t - 1)
        pending.append(msg)
        if sender is not None:
            senders.append((sender, msg.node_id))
    last = max([sim.tick] + [tick_of(m.timestamp_ms, dt) for m in pending])
    advance(ticks - 1 if ticks is not None else last)
    return sim.report()


def cmd_replay(args):
    scenario = resolve_scenario(args.scenario)
    if args.ticks is not None and args.ticks < 1:
        raise CliFailure(EXIT_INVALID, "--ticks must be >= 1")
    feed = None
    try:
        if args.listen:
            host, _, port = args.listen.rpartition(":")
            feed = DatagramFeed(host or "127.0.0.1", int(port), idle_timeout=args.idle_timeout)
            print(f"listening on {feed.address[0]}:{feed.address[1]}", file=sys.stderr, flush=True)

            def answer(result, who):
                final = result.plan.final()
                for sender, node_id in who:
                    feed.reply(sender, AllocMsg(node_id, final.get(node_id, 0.0)))
                    feed.reply(sender, StatusMsg(result.bandwidth_optimized_pct, result.load_reduced_pct))

            report = replay(scenario, feed, args.policy, args.ticks, sys.stdout, answer)
        else:
            stream = ((m, None) for m in replay_feed(args.feed))
            report = replay(scenario, stream, args.policy, args.ticks, sys.stdout)
    except FeedOrderError as exc:
        raise CliFailure(EXIT_FEED, f"feed error: {exc}") from None
    except TransportError as exc:
        raise CliFailure(EXIT_IO, str(exc)) from None
    except DomainError as exc:
        raise CliFailure(EXIT_FEED, f"feed error: {exc}") from None
    finally:
        if feed is not None:
            feed.close()
    sys.stdout.flush()
    _write(args.out, report.to_json())
    return EXIT_OK


def build_parser():
    p = argparse.ArgumentParser(prog="rfidsim", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)
    policies = [x.value for x in Policy]

    r = sub.add_parser("run", help="simulate one scenario under one policy and write a JSON report")
    r.add_argument("--scenario", required=True,
                   help="scenario file, or the name of a packaged scenario (canonical, quiescent)")
    r.add_argument("--policy", choices=policies, default="rfid")
    r.add_argument("--seed", type=int, help="override the scenario seed")
    r.add_argument("--ticks", type=int, help="override the scenario duration")
    r.add_argument("--out", help="report path (default: stdout)")
    r.set_defaults(func=cmd_run)

    c = sub.add_parser("compare", help="tabulate two reports (A = RFID, B = baseline) with deltas")
    c.add_argument("report_a")
    c.add_argument("report_b")
    c.add_argument("--format", choices=("csv", "markdown", "json"), default="markdown")
    c.add_argument("--with-literature", action="store_true",
                   help="append published reference values for other models")
    c.add_argument("--out", help="output path (default: stdout)")
    c.set_defaults(func=cmd_compare)

    rp = sub.add_parser("replay", help="drive the controller from a tag feed, printing ALLOC/STATUS lines")
    src = rp.add_mutually_exclusive_group(required=True)
    src.add_argument("--feed", help="LF-delimited feed file")
    src.add_argument("--listen", metavar="HOST:PORT", help="receive TAG datagrams over UDP")
    rp.add_argument("--scenario", required=True)
    rp.add_argument("--policy", choices=policies, default="rfid")
    rp.add_argument("--ticks", type=int, help="number of control intervals (default: span of the feed)")
    rp.add_argument("--idle-timeout", type=float, default=5.0,
                    help="seconds without datagrams that end a --listen feed")
    rp.add_argument("--out", required=True, help="report path")
    rp.set_defaults(func=cmd_replay)

    v = sub.add_parser("validate", help="check a scenario file")
    v.add_argument("--scenario", required=True)
    v.set_defaults(func=cmd_validate)
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except CliFailure as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.code


if __name__ == "__main__":
    sys.exit(main())
