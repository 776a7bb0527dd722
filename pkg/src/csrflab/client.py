"""Forged HTTP client: full header control, no browser policy.

This is the attacker's tool.  It never consults a cookie store, never
sends an Origin header unless told to, and follows no redirects; the
only headers on the wire are the ones placed there explicitly plus the
Host/Connection/Content-Length bookkeeping added at build time.
"""

from __future__ import annotations

from dataclasses import dataclass

from .httpcore import (
    HttpMethod,
    HttpRequest,
    HttpResponse,
    form_urlencode,
    make_request,
    parse_response,
    serialize,
    set_header,
)
from .transport import TcpTransport, Transport


@dataclass
class ForgedRequest:
    inner: HttpRequest


def build(
    method: HttpMethod, url: str, body_pairs: list[tuple[str, str]] | None = None
) -> ForgedRequest:
    """Request to an http URL; pairs, when given, become an urlencoded
    body with the matching Content-Type.  Raises BadUrl otherwise."""
    if body_pairs is None:
        return ForgedRequest(make_request(method, url))
    return ForgedRequest(
        make_request(
            method,
            url,
            body=form_urlencode(body_pairs).encode(),
            content_type="application/x-www-form-urlencoded",
        )
    )


def set_cookie_header(request: ForgedRequest, cookie_value: str) -> ForgedRequest:
    """Attach a stolen cookie verbatim.  Overwrites any previous Cookie
    header; CR/LF in the value is rejected (IllegalHeader)."""
    set_header(request.inner, "Cookie", cookie_value)
    return request


def execute(request: ForgedRequest, transport: Transport | None = None) -> HttpResponse:
    """One exchange, response parsed, no redirect following."""
    transport = transport or TcpTransport()
    uri = request.inner.uri
    raw = transport.exchange(uri.host, uri.port, serialize(request.inner))
    return parse_response(raw)
