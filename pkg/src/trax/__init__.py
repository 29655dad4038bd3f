"""Visual tracker exchange protocol, evaluation harness, and CLI.

The wire format couples a tracker process (server) with an evaluation
application (client) over line-based messages embedded in an ordinary
text stream; the harness runs unsupervised, supervised, real-time, and
parameter-sweep tracking sessions on top of it.
"""

from .client import ExitReport, Outcome, TrackerHandle, launch
from .errors import TraxError
from .geometry import region_overlap
from .harness import (
    ExperimentOptions,
    RealClock,
    Sequence,
    Trial,
    TrialEvent,
    VirtualClock,
    load_sequence,
    read_trial,
    run_experiment,
    run_realtime,
    run_supervised,
    run_unsupervised,
    sweep,
    write_trial,
)
from .model import (
    Image,
    MemoryImage,
    PathImage,
    Polygon,
    Rectangle,
    Region,
    Special,
    convert_region,
    format_image,
    format_region,
    parse_image,
    parse_region,
)
from .server import (
    FrameRequest,
    InitializeRequest,
    QuitRequest,
    ServerCapabilities,
    ServerSession,
    start_server,
)
from .synth import generate_sequence
from .transport import LineIO, open_server_io
from .wire import LineSplitter, Message, MessageKind, Passthrough, decode, encode

__version__ = "0.1.0"

__all__ = [
    "ExitReport", "Outcome", "TrackerHandle", "launch",
    "TraxError",
    "region_overlap",
    "ExperimentOptions", "RealClock", "Sequence", "Trial", "TrialEvent",
    "VirtualClock", "load_sequence", "read_trial", "run_experiment",
    "run_realtime", "run_supervised", "run_unsupervised", "sweep", "write_trial",
    "Image", "MemoryImage", "PathImage", "Polygon", "Rectangle", "Region",
    "Special", "convert_region", "format_image", "format_region",
    "parse_image", "parse_region",
    "FrameRequest", "InitializeRequest", "QuitRequest", "ServerCapabilities",
    "ServerSession", "start_server",
    "generate_sequence",
    "LineIO", "open_server_io",
    "LineSplitter", "Message", "MessageKind", "Passthrough", "decode", "encode",
]
