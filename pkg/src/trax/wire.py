"""Bit-exact codec for protocol lines embedded in an arbitrary text stream.

Grammar (one line, LF-terminated):

    line  := "@@TRAX:" type (SP token)* (SP param)*
    type  := "hello" | "initialize" | "frame" | "state" | "quit"
    param := key "=" token          key := [A-Za-z0-9_.]+
    token := bare | quoted
    bare  := 1*(any char except SP TAB LF CR '"' '\\' '=')
    quoted:= '"' *(escaped | plain) '"'   with only \\" and \\\\ escapes

Lines that do not start with the prefix are passthrough and are never
touched. The encoder quotes a token iff it is empty or contains one of
SP TAB CR '"' '\\' '=' (the minimum the grammar forces), so round-trips
are exact for any value without a raw newline.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from enum import Enum

from .errors import (
    ArityViolation,
    IllegalCharacter,
    InvalidKey,
    LineTooLong,
    MalformedMessage,
)

PREFIX = "@@TRAX:"

KEY_RE = re.compile(r"[A-Za-z0-9_.]+\Z")

# Characters a bare token may not contain; their presence (or emptiness)
# forces the encoder to quote.
_BARE_EXCLUDED = ' \t\r"\\='


class MessageKind(Enum):
    HELLO = "hello"
    INITIALIZE = "initialize"
    FRAME = "frame"
    STATE = "state"
    QUIT = "quit"


ARITY = {
    MessageKind.HELLO: 0,
    MessageKind.INITIALIZE: 2,
    MessageKind.FRAME: 1,
    MessageKind.STATE: 1,
    MessageKind.QUIT: 0,
}

_KIND_BY_NAME = {kind.value: kind for kind in MessageKind}


@dataclass
class Message:
    """One decoded protocol line: kind + positional args + named params.

    ``params`` is insertion-ordered; duplicate keys on the wire collapse to
    the last value.
    """

    kind: MessageKind
    args: list[str] = field(default_factory=list)
    params: dict[str, str] = field(default_factory=dict)


@dataclass(frozen=True)
class Passthrough:
    """A stream line that is not a protocol message, byte-for-byte."""

    text: str


def encode(message: Message) -> str:
    """Render a message as one LF-terminated line.

    Deterministic: identical messages produce identical bytes; params are
    emitted in insertion order.
    """
    expected = ARITY[message.kind]
    if len(message.args) != expected:
        raise ArityViolation(
            f"{message.kind.value} takes {expected} argument(s), got {len(message.args)}"
        )
    parts = [PREFIX + message.kind.value]
    for arg in message.args:
        parts.append(_encode_token(arg))
    for key, value in message.params.items():
        if not KEY_RE.fullmatch(key):
            raise InvalidKey(f"bad parameter key: {key!r}")
        parts.append(key + "=" + _encode_token(value))
    return " ".join(parts) + "\n"


def _encode_token(text: str) -> str:
    if "\n" in text:
        raise IllegalCharacter("raw newline in value")
    if text and not any(c in _BARE_EXCLUDED for c in text):
        return text
    return '"' + text.replace("\\", "\\\\").replace('"', '\\"') + '"'


def decode(line: str) -> Message | Passthrough:
    """Decode one already-framed line.

    Lines starting with the prefix must parse as protocol or raise
    MalformedMessage; anything else passes through verbatim. A single
    trailing LF is tolerated so decode(encode(m)) is the identity.
    """
    if line.endswith("\n"):
        line = line[:-1]
    if not line.startswith(PREFIX):
        return Passthrough(line)

    rest = line[len(PREFIX):]
    sp = rest.find(" ")
    name = rest if sp < 0 else rest[:sp]
    kind = _KIND_BY_NAME.get(name)
    if kind is None:
        raise MalformedMessage(f"unknown message type {name!r}")

    args: list[str] = []
    params: dict[str, str] = {}
    i = len(name)
    while i < len(rest):
        if rest[i] != " ":
            raise MalformedMessage(f"expected separator at column {i}")
        i += 1
        if i >= len(rest):
            raise MalformedMessage("dangling separator")
        item, i = _scan_word(rest, i)
        if isinstance(item, tuple):
            key, value = item
            params[key] = value
        else:
            if params:
                raise MalformedMessage("positional argument after parameters")
            args.append(item)

    if len(args) != ARITY[kind]:
        raise MalformedMessage(
            f"{kind.value} takes {ARITY[kind]} argument(s), got {len(args)}"
        )
    return Message(kind, args, params)


def _scan_word(s: str, i: int):
    """Scan one space-delimited word starting at i.

    Returns (text, next_i) for a positional token or ((key, value), next_i)
    for a parameter.
    """
    if s[i] == '"':
        text, i = _scan_quoted(s, i)
        if i < len(s) and s[i] != " ":
            raise MalformedMessage("junk after closing quote")
        return text, i

    j = i
    while j < len(s) and s[j] not in _BARE_EXCLUDED:
        j += 1
    if j == len(s) or s[j] == " ":
        if j == i:
            raise MalformedMessage("empty token")
        return s[i:j], j
    if s[j] == "=":
        key = s[i:j]
        if not KEY_RE.fullmatch(key):
            raise MalformedMessage(f"bad parameter key: {key!r}")
        value, j = _scan_value(s, j + 1)
        return (key, value), j
    raise MalformedMessage(f"illegal character {s[j]!r} in bare token")


def _scan_value(s: str, i: int):
    if i < len(s) and s[i] == '"':
        value, i = _scan_quoted(s, i)
        if i < len(s) and s[i] != " ":
            raise MalformedMessage("junk after closing quote")
        return value, i
    j = i
    while j < len(s) and s[j] not in _BARE_EXCLUDED:
        j += 1
    if j < len(s) and s[j] != " ":
        raise MalformedMessage(f"illegal character {s[j]!r} in parameter value")
    if j == i:
        raise MalformedMessage("empty parameter value must be quoted")
    return s[i:j], j


def _scan_quoted(s: str, i: int):
    out: list[str] = []
    i += 1
    while i < len(s):
        c = s[i]
        if c == "\\":
            if i + 1 >= len(s) or s[i + 1] not in '\\"':
                raise MalformedMessage("bad escape in quoted token")
            out.append(s[i + 1])
            i += 2
        elif c == '"':
            return "".join(out), i + 1
        else:
            out.append(c)
            i += 1
    raise MalformedMessage("unterminated quote")


class LineSplitter:
    """Incremental LF splitter over byte chunks.

    One instance per stream; not safe for concurrent use. Strips a trailing
    CR from LF-terminated lines; an unterminated tail is delivered by
    finish(). Raises LineTooLong once the pending line exceeds ``max_bytes``
    (in-memory images can make lines large, so the cap is configurable).
    """

    def __init__(self, max_bytes: int = 16 * 1024 * 1024):
        self._buf = bytearray()
        self._max = max_bytes

    def feed(self, chunk: bytes) -> list[str]:
        self._buf.extend(chunk)
        lines: list[str] = []
        while True:
            nl = self._buf.find(b"\n")
            if nl < 0:
                break
            raw = self._buf[:nl]
            del self._buf[: nl + 1]
            if raw.endswith(b"\r"):
                del raw[-1:]
            lines.append(raw.decode("utf-8", errors="replace"))
        if len(self._buf) > self._max:
            raise LineTooLong(f"line exceeds {self._max} bytes")
        return lines

    def finish(self) -> list[str]:
        """Deliver the final unterminated fragment, if any."""
        if not self._buf:
            return []
        tail = bytes(self._buf)
        self._buf.clear()
        return [tail.decode("utf-8", errors="replace")]
