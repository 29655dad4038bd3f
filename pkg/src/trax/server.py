"""Tracker-side protocol session.

A tracker announces itself once (hello), then serves initialize/frame
requests strictly one at a time, reporting exactly one state per request,
until quit or end of input. A second initialize mid-session is legal and
replaces the model; the server never sends quit itself.

Typical tracker loop:

    session = start_server(ServerCapabilities("mytracker"), open_server_io())
    while True:
        request = session.wait()
        if isinstance(request, QuitRequest):
            break
        region = ...  # initialize or update the model
        session.report(region)
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

from .errors import (
    BadImageText,
    BadRegionText,
    MalformedMessage,
    ProtocolViolation,
    RegionKindMismatch,
    StateError,
    VersionMismatch,
)
from .model import (
    MEMORY,
    PATH,
    POLYGON,
    RECTANGLE,
    Image,
    Region,
    Special,
    format_region,
    parse_image,
    parse_region,
    region_kind,
)
from .transport import LineIO
from .wire import KEY_RE, Message, MessageKind, Passthrough, decode, encode

PROTOCOL_VERSION = 1

_RESERVED_KEYS = ("trax.version", "trax.name", "trax.region", "trax.image")


@dataclass
class ServerCapabilities:
    """What the tracker announces in its hello message."""

    name: str
    region_kind: str = RECTANGLE
    image_kinds: tuple[str, ...] = (PATH,)
    version: int = PROTOCOL_VERSION
    custom: dict[str, str] = field(default_factory=dict)

    def __post_init__(self):
        if self.version != PROTOCOL_VERSION:
            raise ValueError(f"unsupported protocol version {self.version}")
        if self.region_kind not in (RECTANGLE, POLYGON):
            raise ValueError(f"unknown region kind {self.region_kind!r}")
        if not self.image_kinds:
            raise ValueError("at least one image kind is required")
        for kind in self.image_kinds:
            if kind not in (PATH, MEMORY):
                raise ValueError(f"unknown image kind {kind!r}")
        for key in self.custom:
            if not KEY_RE.fullmatch(key):
                raise ValueError(f"bad custom property key {key!r}")

    def to_hello(self) -> Message:
        params = {
            "trax.version": str(self.version),
            "trax.name": self.name,
            "trax.region": self.region_kind,
            "trax.image": ";".join(self.image_kinds),
        }
        params.update(self.custom)
        return Message(MessageKind.HELLO, [], params)

    @classmethod
    def from_hello(cls, message: Message) -> "ServerCapabilities":
        """Validate and extract capabilities on the client side."""
        params = message.params
        version = params.get("trax.version")
        if version is None:
            raise VersionMismatch("tracker did not announce trax.version")
        if version != str(PROTOCOL_VERSION):
            raise VersionMismatch(f"unsupported tracker version {version!r}")
        kind = params.get("trax.region", RECTANGLE)
        if kind not in (RECTANGLE, POLYGON):
            raise ProtocolViolation(f"unknown region kind {kind!r} in hello")
        images = tuple(params.get("trax.image", PATH).split(";"))
        if not images or any(k not in (PATH, MEMORY) for k in images):
            raise ProtocolViolation(f"bad image kinds {params.get('trax.image')!r} in hello")
        custom = {k: v for k, v in params.items() if k not in _RESERVED_KEYS}
        return cls(params.get("trax.name", ""), kind, images, custom=custom)


@dataclass
class InitializeRequest:
    image: Image
    region: Region
    params: dict[str, str] = field(default_factory=dict)


@dataclass
class FrameRequest:
    image: Image
    params: dict[str, str] = field(default_factory=dict)


@dataclass
class QuitRequest:
    pass


Request = InitializeRequest | FrameRequest | QuitRequest


class ServerState(Enum):
    CREATED = "created"
    AWAITING_REQUEST = "awaiting-request"
    MUST_REPORT = "must-report"
    TERMINATED = "terminated"


class ServerSession:
    """Single-owner, strictly synchronous: one outstanding request at a
    time, exactly one report per initialize/frame."""

    def __init__(self, capabilities: ServerCapabilities, io: LineIO):
        self.capabilities = capabilities
        self._io = io
        self._state = ServerState.CREATED
        self._initialized = False

    @property
    def state(self) -> ServerState:
        return self._state

    def start(self) -> "ServerSession":
        """Send the introduction. Legal exactly once, before anything else."""
        if self._state is not ServerState.CREATED:
            raise StateError("hello already sent")
        self._io.write_line(encode(self.capabilities.to_hello()))
        self._state = ServerState.AWAITING_REQUEST
        return self

    def log(self, text: str) -> None:
        """Interleave free-form output with the protocol stream."""
        if "\n" in text:
            raise ValueError("free-form line must not contain a newline")
        self._io.write_line(text)

    def wait(self) -> Request:
        """Block for the next request. Quit and end-of-stream both
        terminate the session and are returned as QuitRequest."""
        if self._state is ServerState.MUST_REPORT:
            raise StateError("previous request not answered yet")
        if self._state is not ServerState.AWAITING_REQUEST:
            raise StateError(f"wait() in state {self._state.value}")
        while True:
            line = self._io.read_line()
            if line is None:
                self._state = ServerState.TERMINATED
                return QuitRequest()
            try:
                item = decode(line)
            except MalformedMessage as exc:
                # Desync is unrecoverable in a synchronous protocol.
                self._fail(f"malformed client line: {exc}")
            if isinstance(item, Passthrough):
                continue
            if item.kind is MessageKind.QUIT:
                self._state = ServerState.TERMINATED
                return QuitRequest()
            if item.kind is MessageKind.INITIALIZE:
                return self._accept_initialize(item)
            if item.kind is MessageKind.FRAME:
                return self._accept_frame(item)
            self._fail(f"client may not send {item.kind.value}")

    def _accept_initialize(self, message: Message) -> InitializeRequest:
        try:
            image = parse_image(message.args[0])
            region = parse_region(message.args[1])
        except (BadImageText, BadRegionText) as exc:
            self._fail(str(exc))
        if isinstance(region, Special):
            self._fail("special region is illegal in initialize")
        self._initialized = True
        self._state = ServerState.MUST_REPORT
        return InitializeRequest(image, region, dict(message.params))

    def _accept_frame(self, message: Message) -> FrameRequest:
        if not self._initialized:
            self._fail("frame before initialize")
        try:
            image = parse_image(message.args[0])
        except BadImageText as exc:
            self._fail(str(exc))
        self._state = ServerState.MUST_REPORT
        return FrameRequest(image, dict(message.params))

    def report(self, region: Region, properties: dict[str, str] | None = None) -> None:
        """Answer the pending request with the current target state."""
        if self._state is not ServerState.MUST_REPORT:
            raise StateError("report() without a pending request")
        if region_kind(region) != self.capabilities.region_kind:
            raise RegionKindMismatch(
                f"declared {self.capabilities.region_kind}, reporting {region_kind(region)}"
            )
        message = Message(MessageKind.STATE, [format_region(region)], dict(properties or {}))
        self._io.write_line(encode(message))
        self._state = ServerState.AWAITING_REQUEST

    def close(self) -> None:
        self._state = ServerState.TERMINATED
        self._io.close()

    def _fail(self, reason: str):
        self._state = ServerState.TERMINATED
        raise ProtocolViolation(reason)


def start_server(capabilities: ServerCapabilities, io: LineIO) -> ServerSession:
    """Create a session on fresh io and send the introduction."""
    return ServerSession(capabilities, io).start()
