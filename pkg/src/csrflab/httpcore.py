r"""HTTP/1.1 subset: message model, wire codec, and header semantics.

The lab speaks a deliberately small slice of HTTP/1.1 over loopback TCP::

    METHOD /path?query HTTP/1.1\r\n        HTTP/1.1 302 Found\r\n
    Host: 127.0.0.1:8080\r\n               Location: /index\r\n
    ...headers...\r\n                      ...headers...\r\n
    \r\n                                   \r\n
    [exactly Content-Length body bytes]    [exactly Content-Length body bytes]

Every exchange is single-shot (``Connection: close``); there is no
keep-alive, chunked encoding, or content negotiation.  Headers are an
ordered list, matched case-insensitively but emitted with the stored
spelling.  ``set_header`` overwrites the value of the first header with a
matching name and appends otherwise; later duplicates are left alone.

Bodies are raw bytes end to end.  The form codec uses the
x-www-form-urlencoded convention: letters, digits and ``*-._`` pass
through, space becomes ``+``, every other octet becomes ``%XX`` with
uppercase hex.  (The stdlib quoting helpers differ on ``*`` and ``~``,
so the codec is spelled out here.)
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from urllib.parse import urlsplit


class MalformedMessage(Exception):
    """Raw bytes do not form a complete, well-formed lab HTTP message."""


class IllegalHeader(Exception):
    """Header name or value contains forbidden octets."""


class MalformedEncoding(Exception):
    """Form-urlencoded text that cannot be decoded."""


class BadUrl(Exception):
    """URL text that does not parse to a supported request URI."""


class HttpMethod(str, enum.Enum):
    GET = "GET"
    HEAD = "HEAD"
    POST = "POST"
    PUT = "PUT"
    DELETE = "DELETE"
    TRACE = "TRACE"
    OPTIONS = "OPTIONS"


HTTP_VERSION = "HTTP/1.1"

REASON_PHRASES = {
    200: "OK",
    302: "Found",
    400: "Bad Request",
    401: "Unauthorized",
    403: "Forbidden",
    404: "Not Found",
    500: "Internal Server Error",
}

_CRLF = b"\r\n"
_HEAD_END = b"\r\n\r\n"


@dataclass(frozen=True)
class RequestUri:
    """Parsed request target: scheme, host, optional port, path, query.

    Network URIs (http) carry a non-empty host; file/asset/data URIs have
    an empty host and are resolved locally by the browser emulator.
    """

    scheme: str
    host: str
    port: int = 80
    path: str = "/"
    query: str | None = None

    def origin_text(self) -> str:
        """scheme://host[:port], omitting the default port 80."""
        if self.port == 80:
            return f"{self.scheme}://{self.host}"
        return f"{self.scheme}://{self.host}:{self.port}"

    def url_text(self) -> str:
        suffix = "" if self.query is None else f"?{self.query}"
        if self.scheme == "http":
            return f"{self.origin_text()}{self.path}{suffix}"
        return f"{self.scheme}://{self.path}{suffix}"

    def target(self) -> str:
        """Origin-form request target as written on the request line."""
        suffix = "" if self.query is None else f"?{self.query}"
        return f"{self.path}{suffix}"


def parse_url(text: str) -> RequestUri:
    """Parse an absolute URL of scheme http, file, asset, or data.

    Raises BadUrl for anything else (including http URLs without a host).
    """
    parts = urlsplit(text)
    scheme = parts.scheme.lower()
    if scheme == "http":
        if not parts.hostname:
            raise BadUrl(f"http URL without host: {text!r}")
        try:
            port = parts.port or 80
        except ValueError as exc:
            raise BadUrl(f"bad port in {text!r}") from exc
        return RequestUri(
            scheme="http",
            host=parts.hostname,
            port=port,
            path=parts.path or "/",
            query=parts.query or None,
        )
    if scheme in ("file", "asset", "data"):
        if parts.netloc:
            raise BadUrl(f"{scheme} URL must not carry a host: {text!r}")
        return RequestUri(
            scheme=scheme,
            host="",
            port=80,
            path=parts.path,
            query=parts.query or None,
        )
    raise BadUrl(f"unsupported scheme in {text!r}")


def _check_header_name(name: str) -> None:
    if not name:
        raise IllegalHeader("empty header name")
    for ch in name:
        if not (33 <= ord(ch) <= 126) or ch == ":":
            raise IllegalHeader(f"illegal octet in header name {name!r}")


def _check_header_value(value: str) -> None:
    for ch in value:
        if ch in "\r\n" or ord(ch) > 255:
            raise IllegalHeader(f"illegal octet in header value {value!r}")


@dataclass(frozen=True)
class Header:
    """One header line.  Names match case-insensitively, print as stored."""

    name: str
    value: str

    def __post_init__(self) -> None:
        _check_header_name(self.name)
        _check_header_value(self.value)


@dataclass
class HttpRequest:
    method: HttpMethod
    uri: RequestUri
    version: str = HTTP_VERSION
    headers: list[Header] = field(default_factory=list)
    body: bytes = b""


@dataclass
class HttpResponse:
    version: str = HTTP_VERSION
    status: int = 200
    reason: str = "OK"
    headers: list[Header] = field(default_factory=list)
    body: bytes = b""


Message = HttpRequest | HttpResponse


def get_header(message: Message, name: str) -> str | None:
    """Value of the first header whose name matches case-insensitively."""
    lname = name.lower()
    for header in message.headers:
        if header.name.lower() == lname:
            return header.value
    return None


def get_header_values(message: Message, name: str) -> list[str]:
    """All values for a name, in stored order (Set-Cookie may repeat)."""
    lname = name.lower()
    return [h.value for h in message.headers if h.name.lower() == lname]


def set_header(message: Message, name: str, value: str) -> Message:
    """Overwrite the first matching header's value, else append.

    The stored name keeps its original spelling on overwrite; later
    duplicates are untouched.  Appends use the caller's spelling.
    """
    candidate = Header(name, value)
    lname = name.lower()
    for i, header in enumerate(message.headers):
        if header.name.lower() == lname:
            message.headers[i] = Header(header.name, value)
            return message
    message.headers.append(candidate)
    return message


def _host_header_value(uri: RequestUri) -> str:
    if uri.port == 80:
        return uri.host
    return f"{uri.host}:{uri.port}"


def make_request(
    method: HttpMethod,
    url: str,
    headers: list[tuple[str, str]] | None = None,
    body: bytes = b"",
    content_type: str | None = None,
) -> HttpRequest:
    """Build a request satisfying the message invariants.

    Adds Host, Connection: close, optional Content-Type, and a
    Content-Length matching the body.  Raises BadUrl for non-http URLs.
    """
    uri = parse_url(url)
    if uri.scheme != "http":
        raise BadUrl(f"requests need an http URL, got {url!r}")
    request = HttpRequest(method=method, uri=uri)
    request.headers.append(Header("Host", _host_header_value(uri)))
    for name, value in headers or []:
        set_header(request, name, value)
    if content_type is not None and get_header(request, "Content-Type") is None:
        request.headers.append(Header("Content-Type", content_type))
    if get_header(request, "Connection") is None:
        request.headers.append(Header("Connection", "close"))
    if body:
        request.body = body
        if get_header(request, "Content-Length") is None:
            request.headers.append(Header("Content-Length", str(len(body))))
    return request


def make_response(
    status: int,
    headers: list[tuple[str, str]] | None = None,
    body: bytes = b"",
    content_type: str | None = None,
) -> HttpResponse:
    """Build a response with the fixed reason phrase for its status."""
    if status not in REASON_PHRASES:
        raise ValueError(f"status {status} outside the lab subset")
    response = HttpResponse(status=status, reason=REASON_PHRASES[status])
    for name, value in headers or []:
        response.headers.append(Header(name, value))
    if content_type is not None:
        response.headers.append(Header("Content-Type", content_type))
    response.headers.append(Header("Connection", "close"))
    response.headers.append(Header("Content-Length", str(len(body))))
    response.body = body
    return response


def _split_head(raw: bytes) -> tuple[list[bytes], bytes]:
    end = raw.find(_HEAD_END)
    if end < 0:
        raise MalformedMessage("missing CRLFCRLF header terminator")
    return raw[:end].split(_CRLF), raw[end + 4 :]


def _parse_header_lines(lines: list[bytes]) -> list[Header]:
    headers = []
    for line in lines:
        name_part, sep, value_part = line.partition(b":")
        if not sep:
            raise MalformedMessage(f"header line without colon: {line!r}")
        try:
            name = name_part.decode("latin-1")
            value = value_part.decode("latin-1").strip(" \t")
            headers.append(Header(name, value))
        except IllegalHeader as exc:
            raise MalformedMessage(str(exc)) from exc
    return headers


def _check_body_length(headers: list[Header], body: bytes) -> None:
    declared = [h.value for h in headers if h.name.lower() == "content-length"]
    if len(declared) > 1:
        raise MalformedMessage("multiple Content-Length headers")
    if not declared:
        if body:
            raise MalformedMessage(f"{len(body)} body bytes without Content-Length")
        return
    if not declared[0].isdigit():
        raise MalformedMessage(f"bad Content-Length {declared[0]!r}")
    expected = int(declared[0])
    if len(body) != expected:
        raise MalformedMessage(
            f"Content-Length {expected} but {len(body)} body bytes present"
        )


def parse_request(raw: bytes) -> HttpRequest:
    """Parse a complete request; raises MalformedMessage otherwise.

    The request must carry exactly one Host header (used to reconstruct
    the URI) and exactly Content-Length body bytes.
    """
    lines, body = _split_head(raw)
    try:
        request_line = lines[0].decode("latin-1")
    except IndexError:  # pragma: no cover - split always yields one element
        raise MalformedMessage("empty message")
    parts = request_line.split(" ")
    if len(parts) != 3:
        raise MalformedMessage(f"bad request line: {request_line!r}")
    method_text, target, version = parts
    try:
        method = HttpMethod(method_text)
    except ValueError as exc:
        raise MalformedMessage(f"unknown method {method_text!r}") from exc
    if version != HTTP_VERSION:
        raise MalformedMessage(f"unsupported version {version!r}")
    if not target.startswith("/"):
        raise MalformedMessage(f"request target must be origin-form: {target!r}")
    path, sep, query_text = target.partition("?")
    query = query_text if sep else None

    headers = _parse_header_lines(lines[1:])
    hosts = [h.value for h in headers if h.name.lower() == "host"]
    if not hosts:
        raise MalformedMessage("missing Host header")
    if len(hosts) > 1:
        raise MalformedMessage("multiple Host headers")
    host, _, port_text = hosts[0].partition(":")
    if port_text:
        if not port_text.isdigit():
            raise MalformedMessage(f"bad Host port {hosts[0]!r}")
        port = int(port_text)
    else:
        port = 80
    if not host:
        raise MalformedMessage("empty Host header")

    _check_body_length(headers, body)
    uri = RequestUri(scheme="http", host=host, port=port, path=path, query=query)
    return HttpRequest(method=method, uri=uri, version=version, headers=headers, body=body)


def parse_response(raw: bytes) -> HttpResponse:
    """Parse a complete response; raises MalformedMessage otherwise.

    Only HTTP/1.1 and the lab's status subset are accepted; a 302 must
    carry exactly one Location header.
    """
    lines, body = _split_head(raw)
    status_line = lines[0].decode("latin-1")
    parts = status_line.split(" ", 2)
    if len(parts) != 3:
        raise MalformedMessage(f"bad status line: {status_line!r}")
    version, code_text, reason = parts
    if version != HTTP_VERSION:
        raise MalformedMessage(f"unsupported version {version!r}")
    if not code_text.isdigit():
        raise MalformedMessage(f"bad status code {code_text!r}")
    status = int(code_text)
    if status not in REASON_PHRASES:
        raise MalformedMessage(f"status {status} outside the lab subset")

    headers = _parse_header_lines(lines[1:])
    if status == 302:
        locations = [h for h in headers if h.name.lower() == "location"]
        if len(locations) != 1:
            raise MalformedMessage("302 must carry exactly one Location header")
    _check_body_length(headers, body)
    return HttpResponse(version=version, status=status, reason=reason, headers=headers, body=body)


def serialize(message: Message) -> bytes:
    """Message to wire bytes: CRLF line endings, stored header order."""
    if isinstance(message, HttpRequest):
        start = f"{message.method.value} {message.uri.target()} {message.version}"
    else:
        start = f"{message.version} {message.status} {message.reason}"
    out = [start.encode("latin-1"), _CRLF]
    for header in message.headers:
        out.append(f"{header.name}: {header.value}".encode("latin-1"))
        out.append(_CRLF)
    out.append(_CRLF)
    out.append(message.body)
    return b"".join(out)


_FORM_SAFE = frozenset(
    b"ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789*-._"
)


def _encode_component(text: str) -> str:
    out = []
    for octet in text.encode("utf-8"):
        if octet in _FORM_SAFE:
            out.append(chr(octet))
        elif octet == 0x20:
            out.append("+")
        else:
            out.append("%{:02X}".format(octet))
    return "".join(out)


def _decode_component(text: str) -> str:
    out = bytearray()
    i = 0
    while i < len(text):
        ch = text[i]
        if ch == "+":
            out.append(0x20)
            i += 1
        elif ch == "%":
            hex_pair = text[i + 1 : i + 3]
            if len(hex_pair) != 2 or any(c not in "0123456789abcdefABCDEF" for c in hex_pair):
                raise MalformedEncoding(f"bad percent escape at offset {i} in {text!r}")
            out.append(int(hex_pair, 16))
            i += 3
        else:
            out.extend(ch.encode("utf-8"))
            i += 1
    try:
        return out.decode("utf-8")
    except UnicodeDecodeError as exc:
        raise MalformedEncoding(f"decoded octets are not UTF-8 in {text!r}") from exc


def form_urlencode(pairs: list[tuple[str, str]]) -> str:
    """Encode ordered pairs as key=value joined by '&' (order preserved)."""
    return "&".join(
        f"{_encode_component(name)}={_encode_component(value)}" for name, value in pairs
    )


def form_urldecode(encoded: str) -> list[tuple[str, str]]:
    """Inverse of form_urlencode; lenient about missing '=' in a pair."""
    if encoded == "":
        return []
    pairs = []
    for part in encoded.split("&"):
        name, _, value = part.partition("=")
        pairs.append((_decode_component(name), _decode_component(value)))
    return pairs
