"""Reference tracker: a static tracker behind the protocol.

It reports the most recent initialization region for every frame, which
makes its trajectories exactly predictable. Flags add controlled
misbehaviour for watchdog and conformance tests:

  --delay MS       artificial sleep before answering each frame
  --fail-after K   from the K+1-th processed frame on, report a fixed
                   far-off region instead of the stored one
  --region KIND    declare rectangle (default) or polygon states
  --hang           never answer the first frame request
  --chatter        interleave free-text lines with the protocol stream
  --violate ID     deliberately break one protocol rule (conformance
                   fixtures): no-hello | double-state | malformed-region
"""

from __future__ import annotations

import sys
import time

from .errors import TraxError
from .model import MEMORY, PATH, RECTANGLE, Rectangle, Region, convert_region, format_region
from .server import (
    FrameRequest,
    InitializeRequest,
    QuitRequest,
    ServerCapabilities,
    ServerSession,
    ServerState,
    start_server,
)
from .transport import LineIO, open_server_io
from .wire import Message, MessageKind, encode

FAR_OFF = Rectangle(-100.0, -100.0, 1.0, 1.0)

VIOLATIONS = ("no-hello", "double-state", "malformed-region")


def run_dummy(region_kind: str = RECTANGLE, delay_ms: int = 0, fail_after: int = 0,
              hang: bool = False, chatter: bool = False, violate: str | None = None,
              io: LineIO | None = None) -> int:
    """Serve one session; returns the process exit code."""
    if violate is not None and violate not in VIOLATIONS:
        print(f"dummy: unknown violation {violate!r}", file=sys.stderr)
        return 1

    if io is None:
        io = open_server_io()
    capabilities = ServerCapabilities("dummy", region_kind, (PATH, MEMORY))

    if violate == "no-hello":
        # Protocol message before the introduction.
        io.write_line(encode(Message(MessageKind.STATE, ["0,0,1,1"])))

    session = start_server(capabilities, io)
    if chatter:
        session.log("dummy: ready")

    current: Region | None = None
    processed = 0
    try:
        while True:
            request = session.wait()
            if isinstance(request, QuitRequest):
                break
            if isinstance(request, InitializeRequest):
                current = convert_region(request.region, region_kind)
                region = current
            else:
                assert isinstance(request, FrameRequest)
                processed += 1
                if hang and processed == 1:
                    while True:  # watchdog fixture: never answer
                        time.sleep(1.0)
                if delay_ms:
                    time.sleep(delay_ms / 1000.0)
                if fail_after and processed > fail_after:
                    region = convert_region(FAR_OFF, region_kind)
                else:
                    region = current
            if chatter:
                session.log(f"dummy: answering request {processed}")
            _report(session, region, violate)
    except TraxError as exc:
        print(f"dummy: protocol error: {exc}", file=sys.stderr)
        return 4
    finally:
        session.close()
    return 0


def _report(session: ServerSession, region: Region, violate: str | None) -> None:
    if violate == "malformed-region":
        # Bypass the session so the unparseable region reaches the wire;
        # advance its state by hand to keep serving requests.
        session._io.write_line(encode(Message(MessageKind.STATE, ["banana"])))
        session._state = ServerState.AWAITING_REQUEST
        return
    session.report(region)
    if violate == "double-state":
        session._io.write_line(encode(Message(MessageKind.STATE, [format_region(region)])))
