"""Line-oriented transports.

Server side: ``LineIO``, a blocking read-line/write-line pair over stdio or
one TCP connection; ``open_server_io`` picks TCP when the ``TRAX_SOCKET``
environment variable is set (the client injects it at launch) and stdio
otherwise.

Client side: channels that own the tracker process and deliver its protocol
stream line by line with a timeout, so a blocked read can always be
abandoned when the watchdog fires and the child killed afterwards. A reader
thread feeds an internal queue; the channel itself is single-owner.
"""

from __future__ import annotations

import os
import queue
import socket
import subprocess
import threading
import time

from .errors import AcceptTimeout, SpawnFailure, TrackerExited, WatchdogTimeout
from .wire import LineSplitter

SOCKET_ENV = "TRAX_SOCKET"

STDIO = "stdio"
TCP = "tcp"

_EOF = object()


class LineIO:
    """Blocking synchronous line stream pair (server side)."""

    def __init__(self, reader, writer, *, keepalive=None):
        self._reader = reader
        self._writer = writer
        self._splitter = LineSplitter()
        self._pending: list[str] = []
        self._eof = False
        self._keepalive = keepalive  # e.g. the socket owning the file objects

    def read_line(self) -> str | None:
        """Next line, or None at end of stream."""
        while not self._pending:
            if self._eof:
                return None
            chunk = self._reader.read1(65536)
            if not chunk:
                self._eof = True
                self._pending.extend(self._splitter.finish())
            else:
                self._pending.extend(self._splitter.feed(chunk))
        return self._pending.pop(0)

    def write_line(self, line: str) -> None:
        data = line.encode("utf-8")
        if not data.endswith(b"\n"):
            data += b"\n"
        self._writer.write(data)
        self._writer.flush()

    def close(self) -> None:
        for stream in (self._writer, self._reader):
            try:
                stream.close()
            except OSError:
                pass
        if self._keepalive is not None:
            try:
                self._keepalive.close()
            except OSError:
                pass


def stdio_server_io() -> LineIO:
    import sys

    return LineIO(sys.stdin.buffer, sys.stdout.buffer)


def open_server_io() -> LineIO:
    """Stdio, unless TRAX_SOCKET names a loopback port to connect back to."""
    port = os.environ.get(SOCKET_ENV)
    if port is None:
        return stdio_server_io()
    sock = socket.create_connection(("127.0.0.1", int(port)))
    return LineIO(sock.makefile("rb"), sock.makefile("wb"), keepalive=sock)


class ProcessChannel:
    """Tracker child process plus its protocol line stream.

    ``transport`` selects how lines travel: the child's stdio pipes, or a
    TCP loopback connection the child opens back to us (its stdout then
    stays free for the console).
    """

    def __init__(self, argv, env=None, cwd=None, transport=STDIO, accept_timeout=30.0):
        if not argv:
            raise SpawnFailure("empty tracker command")
        full_env = dict(os.environ)
        if env:
            full_env.update(env)

        self._sock = None
        listener = None
        if transport == TCP:
            listener = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
            listener.bind(("127.0.0.1", 0))
            listener.listen(1)
            full_env[SOCKET_ENV] = str(listener.getsockname()[1])

        try:
            self.process = subprocess.Popen(
                argv,
                stdin=subprocess.PIPE if transport == STDIO else subprocess.DEVNULL,
                stdout=subprocess.PIPE if transport == STDIO else None,
                cwd=cwd,
                env=full_env,
            )
        except OSError as exc:
            if listener is not None:
                listener.close()
            raise SpawnFailure(f"cannot start {argv[0]!r}: {exc}") from exc

        if transport == TCP:
            listener.settimeout(accept_timeout)
            try:
                self._sock, _ = listener.accept()
            except socket.timeout:
                self.kill()
                raise AcceptTimeout(
                    f"tracker did not connect back within {accept_timeout}s"
                ) from None
            finally:
                listener.close()
            read_source = self._sock.makefile("rb")
        else:
            read_source = self.process.stdout

        self._lines: queue.Queue = queue.Queue()
        self._reader = threading.Thread(
            target=self._pump, args=(read_source,), daemon=True
        )
        self._reader.start()

    def _pump(self, stream) -> None:
        splitter = LineSplitter()
        try:
            while True:
                chunk = stream.read1(65536)
                if not chunk:
                    break
                for line in splitter.feed(chunk):
                    self._lines.put(line)
        except Exception as exc:  # surface in the consumer, not the thread
            self._lines.put(exc)
        else:
            for line in splitter.finish():
                self._lines.put(line)
        self._lines.put(_EOF)

    def send_line(self, line: str) -> None:
        data = line.encode("utf-8")
        try:
            if self._sock is not None:
                self._sock.sendall(data)
            else:
                self.process.stdin.write(data)
                self.process.stdin.flush()
        except (OSError, ValueError) as exc:
            raise TrackerExited(f"tracker input closed: {exc}") from exc

    def recv_line(self, timeout: float) -> str | None:
        """Next line, None at end of stream; WatchdogTimeout when silent."""
        try:
            item = self._lines.get(timeout=timeout)
        except queue.Empty:
            raise WatchdogTimeout(f"no tracker output within {timeout}s") from None
        if item is _EOF:
            self._lines.put(_EOF)  # stay at EOF for later drains
            return None
        if isinstance(item, Exception):
            raise item
        return item

    def drain_lines(self, timeout: float = 0.0) -> list[str]:
        """Whatever is already buffered (plus anything arriving within
        timeout); stops at end of stream."""
        deadline = time.monotonic() + timeout
        lines: list[str] = []
        while True:
            remaining = deadline - time.monotonic()
            try:
                item = self._lines.get(timeout=max(0.0, remaining))
            except queue.Empty:
                return lines
            if item is _EOF:
                self._lines.put(_EOF)
                return lines
            if isinstance(item, Exception):
                return lines
            lines.append(item)

    def close_send(self) -> None:
        try:
            if self._sock is not None:
                self._sock.shutdown(socket.SHUT_WR)
            elif self.process.stdin:
                self.process.stdin.close()
        except OSError:
            pass

    def shutdown(self, grace: float) -> tuple[int | None, bool]:
        """Wait up to grace seconds for exit, then kill. Returns
        (exit status, killed flag)."""
        killed = False
        try:
            self.process.wait(timeout=grace)
        except subprocess.TimeoutExpired:
            self.process.kill()
            killed = True
            self.process.wait()
        if self._sock is not None:
            try:
                self._sock.close()
            except OSError:
                pass
        self._reader.join(timeout=1.0)
        return self.process.returncode, killed

    def kill(self) -> None:
        try:
            self.process.kill()
            self.process.wait(timeout=5.0)
        except OSError:
            pass

    @property
    def exit_status(self) -> int | None:
        return self.process.poll()


class MemoryChannel:
    """In-memory stand-in for tests: the test feeds incoming lines and
    inspects what was sent. Same surface as ProcessChannel."""

    def __init__(self):
        self.sent: list[str] = []
        self._lines: queue.Queue = queue.Queue()
        self._send_closed = False

    def feed(self, line: str) -> None:
        self._lines.put(line)

    def feed_eof(self) -> None:
        self._lines.put(_EOF)

    def send_line(self, line: str) -> None:
        if self._send_closed:
            raise TrackerExited("channel closed")
        self.sent.append(line)

    def recv_line(self, timeout: float) -> str | None:
        try:
            item = self._lines.get(timeout=timeout)
        except queue.Empty:
            raise WatchdogTimeout(f"no tracker output within {timeout}s") from None
        if item is _EOF:
            self._lines.put(_EOF)
            return None
        return item

    def drain_lines(self, timeout: float = 0.0) -> list[str]:
        lines = []
        while True:
            try:
                item = self._lines.get_nowait()
            except queue.Empty:
                return lines
            if item is _EOF:
                self._lines.put(_EOF)
                return lines
            lines.append(item)

    def close_send(self) -> None:
        self._send_closed = True

    def shutdown(self, grace: float) -> tuple[int | None, bool]:
        return 0, False

    def kill(self) -> None:
        pass

    @property
    def exit_status(self) -> int | None:
        return 0
