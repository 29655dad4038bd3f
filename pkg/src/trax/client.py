"""Application-side tracker session.

``launch`` starts the tracker process (stdio pipes or TCP loopback),
``handshake`` consumes its introduction, then ``initialize``/``frame``
drive the synchronous exchange: one request outstanding, one state back,
wall-clock timing measured around the full exchange. Non-protocol tracker
output is forwarded line by line to ``log_sink``. Every blocking read is
bounded by the watchdog; ``terminate`` escalates quit -> grace wait ->
kill, so no tracker process outlives the handle.
"""

from __future__ import annotations

import sys
import time
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable

from .errors import (
    BadRegionText,
    MalformedMessage,
    ProtocolViolation,
    StateError,
    TrackerExited,
    UnsupportedImageKind,
    WatchdogTimeout,
)
from .model import (
    Image,
    Region,
    Special,
    convert_region,
    format_image,
    format_region,
    image_kind,
    parse_region,
)
from .server import ServerCapabilities
from .transport import STDIO, ProcessChannel
from .wire import Message, MessageKind, Passthrough, decode, encode

DEFAULT_WATCHDOG = 30.0

LogSink = Callable[[str], None]


def _stderr_sink(text: str) -> None:
    print("[tracker] " + text, file=sys.stderr)


@dataclass
class Outcome:
    """One answered request: reported region, extra per-frame properties,
    and the wall-clock seconds from send to state."""

    region: Region
    props: dict[str, str] = field(default_factory=dict)
    elapsed: float = 0.0


@dataclass
class ExitReport:
    exit_status: int | None
    killed: bool
    error: str | None = None


class ClientState(Enum):
    AWAITING_HELLO = "awaiting-hello"
    READY = "ready"
    AWAITING_STATE = "awaiting-state"
    TERMINATED = "terminated"


class TrackerHandle:
    """Single-owner handle over a launched (or injected) tracker channel."""

    def __init__(self, channel, log_sink: LogSink | None = None,
                 watchdog: float = DEFAULT_WATCHDOG):
        self.channel = channel
        self.log_sink: LogSink = log_sink if log_sink is not None else _stderr_sink
        self.watchdog = watchdog
        self.capabilities: ServerCapabilities | None = None
        self._state = ClientState.AWAITING_HELLO
        self._initialized = False
        self._pending_init = False
        self._sent_at = 0.0
        self._exit_report: ExitReport | None = None

    @property
    def state(self) -> ClientState:
        return self._state

    # -- handshake ---------------------------------------------------------

    def handshake(self) -> ServerCapabilities:
        """Read until the introduction arrives; passthrough goes to the
        log sink. Validates the protocol version."""
        if self._state is not ClientState.AWAITING_HELLO:
            raise StateError(f"handshake() in state {self._state.value}")
        message = self._next_message()
        if message is None:
            self._state = ClientState.TERMINATED
            raise TrackerExited("tracker exited before hello")
        if message.kind is not MessageKind.HELLO:
            self._state = ClientState.TERMINATED
            raise ProtocolViolation(f"first message was {message.kind.value}, not hello")
        try:
            self.capabilities = ServerCapabilities.from_hello(message)
        except Exception:
            self._state = ClientState.TERMINATED
            raise
        self._state = ClientState.READY
        return self.capabilities

    # -- requests ----------------------------------------------------------

    def initialize(self, image: Image, region: Region,
                   props: dict[str, str] | None = None) -> Outcome:
        """Send an initialization (legal any time the session is ready;
        a mid-session initialize replaces the tracker's model)."""
        if isinstance(region, Special):
            raise ValueError("cannot initialize with a special region")
        caps = self._require_ready()
        wire_region = convert_region(region, caps.region_kind)
        self._check_image(image)
        message = Message(
            MessageKind.INITIALIZE,
            [format_image(image), format_region(wire_region)],
            dict(props or {}),
        )
        self._begin_request(message)
        return self._finish_request()

    def frame(self, image: Image, props: dict[str, str] | None = None) -> Outcome:
        self._require_ready()
        self._check_image(image)
        message = Message(MessageKind.FRAME, [format_image(image)], dict(props or {}))
        self._begin_request(message)
        return self._finish_request()

    def _require_ready(self) -> ServerCapabilities:
        if self._state is ClientState.TERMINATED:
            raise StateError("session terminated")
        if self._state is ClientState.AWAITING_HELLO:
            raise StateError("handshake() first")
        if self._state is not ClientState.READY:
            raise StateError("a request is already outstanding")
        assert self.capabilities is not None
        return self.capabilities

    def _check_image(self, image: Image) -> None:
        kind = image_kind(image)
        if kind not in self.capabilities.image_kinds:
            raise UnsupportedImageKind(
                f"tracker accepts {'/'.join(self.capabilities.image_kinds)}, not {kind}"
            )

    def _begin_request(self, message: Message) -> None:
        """Send one request; the session then owes us exactly one state.
        The one-request-at-a-time discipline lives here and in
        _finish_request, so trace tests can drive the machine stepwise."""
        self._require_ready()
        if message.kind is MessageKind.FRAME and not self._initialized:
            raise StateError("frame before any successful initialize")
        self._sent_at = time.perf_counter()  # elapsed covers the whole exchange
        try:
            self.channel.send_line(encode(message))
        except TrackerExited:
            self._state = ClientState.TERMINATED
            raise
        self._pending_init = message.kind is MessageKind.INITIALIZE
        self._state = ClientState.AWAITING_STATE

    def _finish_request(self) -> Outcome:
        if self._state is not ClientState.AWAITING_STATE:
            raise StateError("no request outstanding")
        message = self._next_message()
        elapsed = time.perf_counter() - self._sent_at
        if message is None:
            self._state = ClientState.TERMINATED
            raise TrackerExited("tracker exited before answering")
        if message.kind is not MessageKind.STATE:
            self._state = ClientState.TERMINATED
            raise ProtocolViolation(f"expected state, got {message.kind.value}")
        try:
            region = parse_region(message.args[0])
        except BadRegionText as exc:
            self._state = ClientState.TERMINATED
            raise ProtocolViolation(f"unparseable state region: {exc}") from exc
        if isinstance(region, Special):
            self._state = ClientState.TERMINATED
            raise ProtocolViolation("special region is illegal in a state message")
        if self._pending_init:
            self._initialized = True
        self._state = ClientState.READY
        return Outcome(region, dict(message.params), elapsed)

    def _next_message(self) -> Message | None:
        """Next protocol message; forwards passthrough lines in order.
        None means the tracker closed its stream."""
        while True:
            try:
                line = self.channel.recv_line(self.watchdog)
            except WatchdogTimeout:
                self._state = ClientState.TERMINATED
                raise
            if line is None:
                return None
            try:
                item = decode(line)
            except MalformedMessage as exc:
                self._state = ClientState.TERMINATED
                raise ProtocolViolation(f"malformed tracker line: {exc}") from exc
            if isinstance(item, Passthrough):
                self.log_sink(item.text)
                continue
            return item

    # -- shutdown ----------------------------------------------------------

    def terminate(self, grace: float = 3.0) -> ExitReport:
        """Best-effort, idempotent shutdown: quit if writable, wait up to
        grace, then kill; residual passthrough is drained to the log sink."""
        if self._exit_report is not None:
            return self._exit_report
        error = None
        try:
            self.channel.send_line(encode(Message(MessageKind.QUIT)))
        except Exception as exc:
            error = f"quit not delivered: {exc}"
        self.channel.close_send()
        exit_status, killed = self.channel.shutdown(grace)
        for line in self.channel.drain_lines():
            item = None
            try:
                item = decode(line)
            except MalformedMessage:
                pass
            if isinstance(item, Passthrough):
                self.log_sink(item.text)
        self._state = ClientState.TERMINATED
        self._exit_report = ExitReport(exit_status, killed, error)
        return self._exit_report


def launch(command: list[str], env: dict[str, str] | None = None,
           workdir: str | None = None, transport: str = STDIO, *,
           log_sink: LogSink | None = None,
           watchdog: float = DEFAULT_WATCHDOG) -> TrackerHandle:
    """Start a tracker process and return a handle awaiting its hello.

    With the TCP transport an ephemeral loopback port is opened and passed
    to the child through the TRAX_SOCKET environment variable.
    """
    channel = ProcessChannel(command, env=env, cwd=workdir,
                             transport=transport, accept_timeout=watchdog)
    return TrackerHandle(channel, log_sink=log_sink, watchdog=watchdog)
