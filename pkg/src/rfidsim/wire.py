"""Line protocol between tag readers and the controller.

One message per LF-terminated UTF-8 line, fields separated by single spaces::

    TAG <tag_id> <node_id> <VIP|STD> <timestamp_ms>
    ALLOC <node_id> <final_hz>
    STATUS <bandwidth_optimized_pct> <load_reduced_pct>
    <tag_id>

The last form is the bare reader output (``12345ABC``); it becomes a standard
priority sighting at node ``N0`` with timestamp 0.  ``final_hz`` is written
with exactly three decimals, so ALLOC values are held at millihertz resolution.

Transports: feed files (:func:`replay_feed`) and a UDP endpoint
(:class:`DatagramFeed`), one message per datagram.
"""

from __future__ import annotations

import math
import queue
import re
import socket
import threading
from dataclasses import dataclass

from .domain import DomainError, PriorityClass, TagEvent, validate_node_id, validate_tag_id

MAX_DATAGRAM = 512
LEGACY_NODE = "N0"
VERBS = ("TAG", "ALLOC", "STATUS")

_UINT = re.compile(r"[0-9]+")
_DECIMAL = re.compile(r"[0-9]+(\.[0-9]+)?")
_PRIORITY = {"VIP": PriorityClass.VIP, "STD": PriorityClass.STANDARD}


class WireError(Exception):
    """Base class for everything the protocol layer raises."""


class ParseError(WireError):
    def __init__(self, message, field=None, offset=0):
        self.field = field
        self.offset = offset
        where = f" (field {field!r}, byte {offset})" if field else f" (byte {offset})"
        super().__init__(message + where)


class ValidationError(ParseError):
    """Syntactically fine, but a value breaks a domain rule (e.g. a bad tag id)."""


class FeedOrderError(WireError):
    def __init__(self, line_no, message):
        self.line_no = line_no
        super().__init__(f"line {line_no}: {message}")


class TransportError(WireError):
    pass


@dataclass(frozen=True)
class TagMsg:
    tag_id: str
    node_id: str
    priority: PriorityClass
    timestamp_ms: int

    def __post_init__(self):
        # TagEvent carries the same invariants
        self.to_event()

    def to_event(self):
        return TagEvent(self.tag_id, self.node_id, self.priority, self.timestamp_ms)


@dataclass(frozen=True)
class AllocMsg:
    node_id: str
    final_hz: float

    def __post_init__(self):
        if not validate_node_id(self.node_id):
            raise DomainError(f"invalid node_id {self.node_id!r}")
        v = self.final_hz
        if isinstance(v, bool) or not isinstance(v, (int, float)) or not math.isfinite(v) or v < 0:
            raise DomainError(f"final_hz must be finite and >= 0, got {v!r}")
        object.__setattr__(self, "final_hz", float(f"{v:.3f}"))


@dataclass(frozen=True)
class StatusMsg:
    bandwidth_optimized_pct: int
    load_reduced_pct: int

    def __post_init__(self):
        for name in ("bandwidth_optimized_pct", "load_reduced_pct"):
            v = getattr(self, name)
            if isinstance(v, bool) or not isinstance(v, int) or not 0 <= v <= 100:
                raise DomainError(f"{name} must be an integer in [0, 100], got {v!r}")

    def display(self):
        return (f"Bandwidth Optimized: {self.bandwidth_optimized_pct}%",
                f"Load Reduced: {self.load_reduced_pct}%")


def _split(line):
    """Yield ``(token, byte_offset)`` pairs, rejecting anything but single spaces."""
    tokens = []
    pos = 0
    for tok in line.split(" "):
        if tok == "":
            raise ParseError("empty field (leading, trailing or doubled space)", offset=len(line[:pos].encode()))
        tokens.append((tok, len(line[:pos].encode())))
        pos += len(tok) + 1
    return tokens


def _uint(tok, off, field):
    if not _UINT.fullmatch(tok):
        raise ParseError(f"expected a non-negative integer, got {tok!r}", field, off)
    return int(tok)


def _node(tok, off):
    if not validate_node_id(tok):
        raise ValidationError(f"invalid node id {tok!r}", "node_id", off)
    return tok


def _tag(tok, off):
    if not validate_tag_id(tok):
        raise ValidationError(f"invalid tag id {tok!r}", "tag_id", off)
    return tok


def _arity(tokens, n, verb):
    if len(tokens) != n:
        off = tokens[min(len(tokens), n) - 1][1] if tokens else 0
        raise ParseError(f"{verb} takes {n - 1} fields, got {len(tokens) - 1}", "arity", off)


def parse_line(line):
    """Parse one line (``str`` or ``bytes``) into a message.

    A single trailing LF is accepted and stripped; every other deviation raises
    :class:`ParseError` (or :class:`ValidationError` for bad ids).
    """
    if isinstance(line, (bytes, bytearray)):
        try:
            line = bytes(line).decode("utf-8")
        except UnicodeDecodeError as exc:
            raise ParseError("line is not valid UTF-8", "encoding", exc.start) from None
    if not isinstance(line, str):
        raise ParseError(f"expected text, got {type(line).__name__}")
    if line.endswith("\n"):
        line = line[:-1]
    bad = re.search(r"[\x00-\x1f\x7f]", line)
    if bad:
        raise ParseError(f"control character {bad.group()!r}", "line", len(line[:bad.start()].encode()))
    if line == "":
        raise ParseError("empty line", "verb", 0)

    tokens = _split(line)
    verb, _ = tokens[0]
    if verb == "TAG":
        _arity(tokens, 5, verb)
        (tag, o1), (node, o2), (pri, o3), (ts, o4) = tokens[1:]
        if pri not in _PRIORITY:
            raise ParseError(f"priority must be VIP or STD, got {pri!r}", "priority", o3)
        return TagMsg(_tag(tag, o1), _node(node, o2), _PRIORITY[pri], _uint(ts, o4, "timestamp_ms"))
    if verb == "ALLOC":
        _arity(tokens, 3, verb)
        (node, o1), (hz, o2) = tokens[1:]
        if not _DECIMAL.fullmatch(hz):
            raise ParseError(f"expected a decimal number, got {hz!r}", "final_hz", o2)
        return AllocMsg(_node(node, o1), float(hz))
    if verb == "STATUS":
        _arity(tokens, 3, verb)
        (bw, o1), (ld, o2) = tokens[1:]
        values = []
        for tok, off, field in ((bw, o1, "bandwidth_optimized_pct"), (ld, o2, "load_reduced_pct")):
            v = _uint(tok, off, field)
            if v > 100:
                raise ParseError(f"percentage out of range: {v}", field, off)
            values.append(v)
        return StatusMsg(*values)
    if len(tokens) == 1:
        if not validate_tag_id(verb):
            raise ValidationError(f"invalid tag id {verb!r}", "tag_id", 0)
        return TagMsg(verb, LEGACY_NODE, PriorityClass.STANDARD, 0)
    raise ParseError(f"unknown verb {verb!r}", "verb", 0)


def serialize(msg):
    if isinstance(msg, TagMsg):
        return f"TAG {msg.tag_id} {msg.node_id} {msg.priority.value} {msg.timestamp_ms}\n"
    if isinstance(msg, AllocMsg):
        return f"ALLOC {msg.node_id} {msg.final_hz:.3f}\n"
    if isinstance(msg, StatusMsg):
        return f"STATUS {msg.bandwidth_optimized_pct} {msg.load_reduced_pct}\n"
    raise TypeError(f"not a protocol message: {msg!r}")


def round_half_up(x):
    return int(math.floor(x + 0.5))


def format_status(bandwidth_optimized, load_reduced):
    """Status message and its two display strings from raw percentages."""
    msg = StatusMsg(min(100, max(0, round_half_up(bandwidth_optimized))),
                    min(100, max(0, round_half_up(load_reduced))))
    return msg, msg.display()


def _tags_in_order(lines):
    """Yield ``(line_no, TagMsg)``; only tag messages may appear in a feed."""
    last_ts = None
    for no, raw in lines:
        try:
            msg = parse_line(raw)
        except ParseError as exc:
            raise FeedOrderError(no, str(exc)) from exc
        if not isinstance(msg, TagMsg):
            raise FeedOrderError(no, f"feeds carry TAG messages only, got {type(msg).__name__}")
        if last_ts is not None and msg.timestamp_ms < last_ts:
            raise FeedOrderError(no, f"timestamp {msg.timestamp_ms} precedes {last_ts}")
        last_ts = msg.timestamp_ms
        yield no, msg


def replay_feed(path):
    """Yield the TagMsgs of a feed file in order.

    Blank lines are skipped.  Parse failures and timestamp regressions raise
    :class:`FeedOrderError` carrying the 1-based line number; I/O failures raise
    :class:`TransportError`.
    """
    try:
        with open(path, "rb") as fh:
            raw_lines = fh.read().split(b"\n")
    except OSError as exc:
        raise TransportError(f"cannot read feed {path}: {exc}") from exc
    if raw_lines and raw_lines[-1] == b"":
        raw_lines.pop()
    numbered = ((i + 1, ln) for i, ln in enumerate(raw_lines) if ln.strip(b"\r") != b"")
    for _, msg in _tags_in_order(numbered):
        yield msg


class DatagramFeed:
    """UDP transport: each datagram carries one canonical TAG line.

    A reader thread parses datagrams and hands ``(TagMsg, sender)`` pairs to a
    bounded queue; when the queue is full the reader blocks rather than drop.
    An empty datagram ends the feed.  Replies go back with :meth:`reply`.
    """

    _END = object()

    def __init__(self, host="127.0.0.1", port=0, maxsize=1024, idle_timeout=None):
        self.sock = socket.socket(socket.AF_INET, socket.SOCK_DGRAM)
        self.sock.bind((host, port))
        self.address = self.sock.getsockname()
        self.idle_timeout = idle_timeout
        self.queue = queue.Queue(maxsize=maxsize)
        self._thread = threading.Thread(target=self._pump, daemon=True)
        self._thread.start()

    def _pump(self):
        self.sock.settimeout(self.idle_timeout)
        count = 0
        last_ts = None
        try:
            while True:
                try:
                    data, sender = self.sock.recvfrom(MAX_DATAGRAM + 1)
                except socket.timeout:
                    break
                except OSError:
                    break
                if data == b"":
                    break
                count += 1
                if len(data) > MAX_DATAGRAM:
                    self.queue.put(FeedOrderError(count, f"datagram exceeds {MAX_DATAGRAM} bytes"))
                    return
                try:
                    (_, msg), = _tags_in_order([(count, data)])
                except FeedOrderError as exc:
                    self.queue.put(exc)
                    return
                if last_ts is not None and msg.timestamp_ms < last_ts:
                    self.queue.put(FeedOrderError(count, f"timestamp {msg.timestamp_ms} precedes {last_ts}"))
                    return
                last_ts = msg.timestamp_ms
                self.queue.put((msg, sender))
        finally:
            self.queue.put(self._END)

    def __iter__(self):
        while True:
            item = self.queue.get()
            if item is self._END:
                return
            if isinstance(item, Exception):
                raise item
            yield item

    def reply(self, sender, msg):
        self.sock.sendto(serialize(msg).encode(), sender)

    def close(self):
        self.sock.close()
