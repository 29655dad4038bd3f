"""Protocol conformance checks for third-party trackers.

Five named checks run against a live tracker on a synthetic sequence:

  hello-first            first protocol message is hello, version 1,
                         well-formed capabilities
  one-state-per-request  no extra state messages after an answer
  state-region           every state carries a parseable region of the
                         declared kind
  reinitialize           a mid-run second initialize is accepted and
                         answered
  shutdown               quit leads to a clean exit within the grace period

The driver resyncs between checks (drains stray messages, picks up a late
hello) so one broken rule fails exactly one check and the rest still run.
"""

from __future__ import annotations

import json
import tempfile
from dataclasses import dataclass, field

from .client import TrackerHandle, launch
from .errors import TraxError, WatchdogTimeout
from .model import (
    RECTANGLE,
    Special,
    convert_region,
    format_image,
    format_region,
    parse_region,
    region_kind,
)
from .server import ServerCapabilities
from .synth import generate_sequence
from .transport import STDIO
from .wire import Message, MessageKind, Passthrough, decode, encode

# How long stray extra messages are given to show up after an answer.
EXTRA_WINDOW = 0.25


@dataclass
class Check:
    check_id: str
    passed: bool
    detail: str = ""


@dataclass
class ConformanceReport:
    checks: list[Check] = field(default_factory=list)

    @property
    def overall(self) -> bool:
        return all(c.passed for c in self.checks)

    def add(self, check_id: str, passed: bool, detail: str = "") -> None:
        self.checks.append(Check(check_id, passed, detail))

    def to_json(self) -> str:
        return json.dumps(
            {c.check_id: {"passed": c.passed, "detail": c.detail} for c in self.checks},
            indent=2,
        )

    def render(self) -> str:
        lines = [
            f"{'PASS' if c.passed else 'FAIL'} {c.check_id}: {c.detail}".rstrip(": ")
            for c in self.checks
        ]
        lines.append("overall: " + ("PASS" if self.overall else "FAIL"))
        return "\n".join(lines)


class _Driver:
    """Raw message pump over the tracker channel; unlike TrackerHandle it
    keeps going after violations so later checks can still run."""

    def __init__(self, handle: TrackerHandle, timeout: float):
        self.channel = handle.channel
        self.timeout = timeout
        self.log: list[str] = []

    def next_message(self, timeout: float | None = None) -> Message | None:
        while True:
            line = self.channel.recv_line(timeout if timeout is not None else self.timeout)
            if line is None:
                return None
            item = decode(line)  # malformed lines raise out to the check
            if isinstance(item, Passthrough):
                self.log.append(item.text)
                continue
            return item

    def exchange(self, message: Message) -> tuple[Message | None, list[Message]]:
        """Send one request, read its answer, then collect any extra
        protocol messages arriving inside the settle window."""
        self.channel.send_line(encode(message))
        answer = self.next_message()
        extras = []
        while True:
            try:
                extra = self.next_message(timeout=EXTRA_WINDOW)
            except WatchdogTimeout:
                break
            if extra is None:
                break
            extras.append(extra)
        return answer, extras


def run_conformance(command: list[str], transport: str = STDIO,
                    timeout: float = 10.0, workdir: str | None = None) -> ConformanceReport:
    """Launch the tracker and run all checks. Raises SpawnFailure or
    AcceptTimeout if there is no process to test."""
    report = ConformanceReport()
    with tempfile.TemporaryDirectory(prefix="trax-conformance-") as tmp:
        seq = generate_sequence(tmp, 10)
        handle = launch(command, transport=transport, watchdog=timeout,
                        workdir=workdir, log_sink=lambda _: None)
        driver = _Driver(handle, timeout)
        try:
            caps = _check_hello(driver, report)
            _check_exchanges(driver, report, seq, caps)
            _check_shutdown(driver, handle, report)
        finally:
            handle.terminate()
    return report


def _check_hello(driver: _Driver, report: ConformanceReport) -> ServerCapabilities:
    fallback = ServerCapabilities("unknown", RECTANGLE)
    try:
        first = driver.next_message()
    except Exception as exc:
        report.add("hello-first", False, f"no readable introduction: {exc}")
        return fallback
    if first is None:
        report.add("hello-first", False, "stream closed before hello")
        return fallback
    if first.kind is not MessageKind.HELLO:
        report.add("hello-first", False,
                   f"first protocol message was {first.kind.value}")
        # Resync: a late hello may still follow.
        late = _seek_hello(driver)
        return late if late is not None else fallback
    try:
        caps = ServerCapabilities.from_hello(first)
    except TraxError as exc:
        report.add("hello-first", False, f"bad capabilities: {exc}")
        return fallback
    report.add("hello-first", True,
               f"name={caps.name!r} region={caps.region_kind} "
               f"image={';'.join(caps.image_kinds)}")
    return caps


def _seek_hello(driver: _Driver) -> ServerCapabilities | None:
    try:
        while True:
            message = driver.next_message(timeout=EXTRA_WINDOW)
            if message is None:
                return None
            if message.kind is MessageKind.HELLO:
                return ServerCapabilities.from_hello(message)
    except TraxError:
        return None


def _check_exchanges(driver: _Driver, report: ConformanceReport, seq, caps) -> None:
    single = True
    single_detail = ""
    regions_ok = True
    regions_detail = ""
    answered = 0

    def well_formed(answer: Message) -> str | None:
        if answer.kind is not MessageKind.STATE:
            return f"answer was {answer.kind.value}, not state"
        try:
            region = parse_region(answer.args[0])
        except TraxError as exc:
            return f"unparseable region: {exc}"
        if isinstance(region, Special):
            return "special region in a state message"
        if region_kind(region) != caps.region_kind:
            return f"declared {caps.region_kind}, reported {region_kind(region)}"
        return None

    def init_message(index: int) -> Message:
        region = convert_region(seq.groundtruth[index], caps.region_kind)
        return Message(MessageKind.INITIALIZE,
                       [format_image(seq.frames[index]), format_region(region)])

    requests = [init_message(0)]
    requests += [Message(MessageKind.FRAME, [format_image(seq.frames[i])])
                 for i in (1, 2, 3)]

    for message in requests:
        try:
            answer, extras = driver.exchange(message)
        except TraxError as exc:
            report.add("one-state-per-request", False, f"exchange failed: {exc}")
            report.add("state-region", False, "no answers to inspect")
            report.add("reinitialize", False, "session unusable")
            return
        if answer is None:
            report.add("one-state-per-request", False, "tracker closed mid-exchange")
            report.add("state-region", False, "no answers to inspect")
            report.add("reinitialize", False, "session unusable")
            return
        answered += 1
        if extras and single:
            single = False
            single_detail = f"{len(extras)} extra message(s) after one answer"
        problem = well_formed(answer)
        if problem and regions_ok:
            regions_ok = False
            regions_detail = problem

    report.add("one-state-per-request", single,
               single_detail or f"{answered} requests, one state each")
    report.add("state-region", regions_ok,
               regions_detail or f"all {answered} states well-formed")

    # Mid-run reinitialization must be accepted and answered.
    reinit = init_message(5)
    try:
        answer, _ = driver.exchange(reinit)
    except TraxError as exc:
        report.add("reinitialize", False, f"exchange failed: {exc}")
        return
    if answer is None or answer.kind is not MessageKind.STATE:
        report.add("reinitialize", False, "no state after second initialize")
    else:
        report.add("reinitialize", True, "second initialize answered")


def _check_shutdown(driver: _Driver, handle: TrackerHandle, report: ConformanceReport) -> None:
    grace = 3.0
    try:
        driver.channel.send_line(encode(Message(MessageKind.QUIT)))
    except TraxError as exc:
        report.add("shutdown", False, f"quit not delivered: {exc}")
        return
    driver.channel.close_send()
    exit_status, killed = driver.channel.shutdown(grace)
    if killed:
        report.add("shutdown", False, f"still running {grace}s after quit, killed")
    else:
        report.add("shutdown", True, f"exited with status {exit_status}")
