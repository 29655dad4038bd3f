"""Exception hierarchy for the whole package.

``TraxError`` is the common base; everything the library raises on purpose
derives from it, so callers can catch one type at the boundary.
"""


class TraxError(Exception):
    """Base class for all errors raised by this package."""


# --- wire codec ---

class MalformedMessage(TraxError):
    """A line carried the protocol prefix but violated the grammar."""


class ArityViolation(TraxError):
    """Message has the wrong number of positional arguments for its kind."""


class IllegalCharacter(TraxError):
    """A value contains a byte that cannot be framed (raw newline)."""


class InvalidKey(TraxError):
    """Parameter key does not match [A-Za-z0-9_.]+."""


class LineTooLong(TraxError):
    """Incoming line exceeded the splitter's byte cap."""


# --- region / image model ---

class BadRegionText(TraxError):
    """Region text is not a special code, rectangle, or polygon."""


class BadImageText(TraxError):
    """Image text has an unknown scheme, bad base64, or a relative path."""


class SpecialNotConvertible(TraxError):
    """Special region codes cannot be converted to rectangle/polygon."""


class DegenerateRegionWarning(UserWarning):
    """Overlap was computed against a zero-area region (result forced to 0)."""


# --- sessions (either side) ---

class ProtocolViolation(TraxError):
    """Peer sent a message that is illegal in the current session state."""


class StateError(TraxError):
    """Operation called in the wrong local session state."""


class RegionKindMismatch(TraxError):
    """Reported region kind differs from the capability declared at hello."""


class VersionMismatch(TraxError):
    """Tracker announced an unsupported protocol version."""


class UnsupportedImageKind(TraxError):
    """Tracker does not accept the image variant the caller wants to send."""


# --- process / transport ---

class SpawnFailure(TraxError):
    """Tracker process could not be started."""


class AcceptTimeout(TraxError):
    """Tracker never connected back on the TCP transport."""


class WatchdogTimeout(TraxError):
    """Tracker produced no response within the watchdog interval."""


class TrackerExited(TraxError):
    """Tracker closed its stream before answering a pending request."""


# --- harness ---

class MissingGroundtruth(TraxError):
    """Sequence directory has no groundtruth.txt."""


class CountMismatch(TraxError):
    """Frame count and groundtruth line count differ."""


class TrialParseError(TraxError):
    """A trial file could not be parsed; message carries file and line."""
