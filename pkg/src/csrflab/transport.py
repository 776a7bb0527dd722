"""Request/response transports: loopback TCP and in-process dispatch.

Both transports implement the same contract: complete request bytes in,
complete response bytes out, one exchange per call (Connection: close).
TCP is the default and the acceptance mode; the in-process transport
wires callers straight into a ForumApp's byte-level handler for tests
that want no sockets involved.
"""

from __future__ import annotations

import re
import socket
from dataclasses import dataclass, field


class ConnectionFailed(Exception):
    """The peer could not be reached or the exchange did not complete."""


class Transport:
    def exchange(self, host: str, port: int, raw: bytes) -> bytes:
        raise NotImplementedError


@dataclass
class TcpTransport(Transport):
    """One TCP connection per exchange; the write side is half-closed
    after sending so the server sees a complete request, and the
    response is read to EOF.

    host_aliases lets lab hostnames (e.g. forum.local) resolve to a
    loopback address without touching the system resolver.
    """

    host_aliases: dict[str, str] = field(default_factory=dict)
    timeout: float = 5.0

    def exchange(self, host: str, port: int, raw: bytes) -> bytes:
        address = self.host_aliases.get(host.lower(), host)
        try:
            with socket.create_connection((address, port), timeout=self.timeout) as sock:
                sock.sendall(raw)
                sock.shutdown(socket.SHUT_WR)
                chunks = []
                while True:
                    chunk = sock.recv(65536)
                    if not chunk:
                        break
                    chunks.append(chunk)
        except OSError as exc:
            raise ConnectionFailed(f"{host}:{port}: {exc}") from exc
        response = b"".join(chunks)
        if not response:
            raise ConnectionFailed(f"{host}:{port}: connection closed without a response")
        return response


_CONTENT_LENGTH = re.compile(rb"^content-length:[ \t]*(\d+)[ \t]*$", re.I | re.M)


def read_http_message(recv) -> bytes:
    """Assemble one HTTP message from a recv(n) callable: everything up
    to the blank line, then exactly Content-Length more bytes.  Used by
    the server side, where the client may keep its socket open."""
    buf = b""
    while b"\r\n\r\n" not in buf:
        chunk = recv(65536)
        if not chunk:
            return buf
        buf += chunk
        if len(buf) > 1 << 20:
            return buf
    head, _, body = buf.partition(b"\r\n\r\n")
    match = _CONTENT_LENGTH.search(head)
    expected = int(match.group(1)) if match else 0
    while len(body) < expected:
        chunk = recv(65536)
        if not chunk:
            break
        body += chunk
    return head + b"\r\n\r\n" + body


class InProcessTransport(Transport):
    """Direct dispatch into a ForumApp, same bytes-in/bytes-out contract."""

    def __init__(self, app) -> None:
        self.app = app

    def exchange(self, host: str, port: int, raw: bytes) -> bytes:
        return self.app.handle_raw(raw)
