"""Client handle over an in-memory channel: handshake, exchanges, errors."""

import pytest

from trax.client import ClientState, TrackerHandle
from trax.errors import (
    ProtocolViolation,
    StateError,
    TrackerExited,
    UnsupportedImageKind,
    VersionMismatch,
    WatchdogTimeout,
)
from trax.model import MemoryImage, PathImage, Polygon, Rectangle
from trax.transport import MemoryChannel
from trax.wire import decode

from .oracles import all_traces, trace_is_legal
from .session_drivers import client_accepts

HELLO = ("@@TRAX:hello trax.version=1 trax.name=dummy "
         "trax.region=rectangle trax.image=path;memory")
IMAGE = PathImage("/f/1.jpg")


def make_handle(*, hello=HELLO, watchdog=0.5):
    channel = MemoryChannel()
    log = []
    handle = TrackerHandle(channel, log_sink=log.append, watchdog=watchdog)
    if hello is not None:
        channel.feed(hello)
    return handle, channel, log


def test_handshake_reads_capabilities_and_forwards_passthrough():
    handle, channel, log = make_handle(hello=None)
    channel.feed("loading model...")
    channel.feed(HELLO)
    caps = handle.handshake()
    assert caps.name == "dummy"
    assert caps.region_kind == "rectangle"
    assert caps.image_kinds == ("path", "memory")
    assert log == ["loading model..."]
    assert handle.state is ClientState.READY


def test_handshake_rejects_state_first():
    handle, channel, _ = make_handle(hello="@@TRAX:state 1,1,2,2")
    with pytest.raises(ProtocolViolation):
        handle.handshake()
    assert handle.state is ClientState.TERMINATED


def test_handshake_version_mismatch():
    handle, _, _ = make_handle(hello="@@TRAX:hello trax.version=2")
    with pytest.raises(VersionMismatch):
        handle.handshake()


def test_handshake_missing_version():
    handle, _, _ = make_handle(hello="@@TRAX:hello trax.name=x")
    with pytest.raises(VersionMismatch):
        handle.handshake()


def test_handshake_watchdog_on_silence():
    handle, _, _ = make_handle(hello=None, watchdog=0.2)
    with pytest.raises(WatchdogTimeout):
        handle.handshake()


def test_handshake_custom_capabilities_kept():
    handle, _, _ = make_handle(
        hello=HELLO + " vendor=acme trax.extra=1")
    caps = handle.handshake()
    assert caps.custom == {"vendor": "acme", "trax.extra": "1"}


def test_initialize_exchange():
    handle, channel, _ = make_handle()
    handle.handshake()
    channel.feed("@@TRAX:state 5,5,10,10 confidence=0.7")
    outcome = handle.initialize(IMAGE, Rectangle(5, 5, 10, 10))
    assert outcome.region == Rectangle(5, 5, 10, 10)
    assert outcome.props == {"confidence": "0.7"}
    assert outcome.elapsed >= 0.0
    sent = decode(channel.sent[0])
    assert sent.args == ["file:///f/1.jpg", "5,5,10,10"]


def test_polygon_downgraded_to_declared_rectangle():
    handle, channel, _ = make_handle()
    handle.handshake()
    channel.feed("@@TRAX:state 0,0,4,3")
    handle.initialize(IMAGE, Polygon(((0, 0), (4, 0), (4, 3))))
    sent = decode(channel.sent[0])
    assert sent.args[1] == "0,0,4,3"  # bounding box on the wire


def test_initialize_params_forwarded():
    handle, channel, _ = make_handle()
    handle.handshake()
    channel.feed("@@TRAX:state 1,1,2,2")
    handle.initialize(IMAGE, Rectangle(1, 1, 2, 2), {"alpha": "0.1"})
    assert decode(channel.sent[0]).params == {"alpha": "0.1"}


def test_frame_before_initialize_not_sent():
    handle, channel, _ = make_handle()
    handle.handshake()
    with pytest.raises(StateError):
        handle.frame(IMAGE)
    assert channel.sent == []


def test_unsupported_image_kind():
    handle, channel, _ = make_handle(
        hello="@@TRAX:hello trax.version=1 trax.image=memory")
    handle.handshake()
    with pytest.raises(UnsupportedImageKind):
        handle.initialize(IMAGE, Rectangle(1, 1, 2, 2))
    assert channel.sent == []


def test_memory_image_sent_when_supported():
    handle, channel, _ = make_handle()
    handle.handshake()
    channel.feed("@@TRAX:state 1,1,2,2")
    handle.initialize(MemoryImage("pgm", b"P5\n1 1\n255\n\x00"), Rectangle(1, 1, 2, 2))
    assert decode(channel.sent[0]).args[0].startswith("data:image/pgm;base64,")


def test_tracker_exit_mid_request():
    handle, channel, _ = make_handle()
    handle.handshake()
    channel.feed("@@TRAX:state 1,1,2,2")
    handle.initialize(IMAGE, Rectangle(1, 1, 2, 2))
    channel.feed_eof()
    with pytest.raises(TrackerExited):
        handle.frame(IMAGE)
    assert handle.state is ClientState.TERMINATED
    with pytest.raises(StateError):
        handle.frame(IMAGE)


def test_passthrough_between_request_and_state():
    handle, channel, log = make_handle()
    handle.handshake()
    channel.feed("thinking very hard")
    channel.feed("@@TRAX:state 1,1,2,2")
    handle.initialize(IMAGE, Rectangle(1, 1, 2, 2))
    assert log == ["thinking very hard"]


def test_special_state_region_rejected():
    handle, channel, _ = make_handle()
    handle.handshake()
    channel.feed("@@TRAX:state 1")
    with pytest.raises(ProtocolViolation):
        handle.initialize(IMAGE, Rectangle(1, 1, 2, 2))


def test_malformed_state_region_rejected():
    handle, channel, _ = make_handle()
    handle.handshake()
    channel.feed("@@TRAX:state banana")
    with pytest.raises(ProtocolViolation):
        handle.initialize(IMAGE, Rectangle(1, 1, 2, 2))


def test_watchdog_during_request():
    handle, channel, _ = make_handle(watchdog=0.2)
    handle.handshake()
    with pytest.raises(WatchdogTimeout):
        handle.initialize(IMAGE, Rectangle(1, 1, 2, 2))
    assert handle.state is ClientState.TERMINATED


def test_terminate_idempotent():
    handle, channel, _ = make_handle()
    handle.handshake()
    first = handle.terminate()
    second = handle.terminate()
    assert first is second
    assert channel.sent[-1] == "@@TRAX:quit\n"


def test_terminate_drains_residual_passthrough():
    handle, channel, log = make_handle()
    handle.handshake()
    channel.feed("goodbye world")
    channel.feed_eof()
    handle.terminate()
    assert "goodbye world" in log


def test_trace_language_exhaustive_up_to_6():
    mismatches = [
        trace for trace in all_traces(6)
        if client_accepts(trace) != trace_is_legal(trace)
    ]
    assert mismatches == []
