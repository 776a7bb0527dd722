"""Cookie manager: storage, getCookie queries, and request attachment.

Cookies here are host-only (the domain is exactly the response host; no
suffix matching) and live for the duration of a run.  The accepted
Set-Cookie grammar is ``name=value`` followed by any mix of ``; Path=<p>``
and ``; SameSite=Strict`` (attribute names matched case-insensitively);
anything else in a header makes that one header malformed, and it is
skipped and logged while the rest of the response is honored.

Two lookup paths exist on purpose.  ``get_cookie`` answers the hosting
application's direct query and ignores SameSite entirely: the application
owns the store, so browser-side policy cannot protect the cookie from it.
``cookies_for_request`` is the browser-side attachment decision and is
where SameSite=Strict bites: a Strict cookie is withheld whenever the
request has an initiator document whose origin differs from the target.
Requests without an initiator (API-initiated loads) attach Strict cookies,
the way a typed address-bar navigation would.
"""

from __future__ import annotations

import enum
import logging
from dataclasses import dataclass, field

from .httpcore import BadUrl, HttpResponse, RequestUri, get_header_values, parse_url

logger = logging.getLogger(__name__)


class MalformedSetCookie(Exception):
    """Set-Cookie header text outside the accepted grammar."""


class SameSite(str, enum.Enum):
    NONE = "None"
    STRICT = "Strict"


@dataclass(frozen=True)
class Origin:
    """A document origin: either web (scheme, host, port) or opaque.

    Local files, packaged assets, and raw-data documents all get opaque
    origins.  An opaque origin is never same-site with anything, itself
    included, and serializes as "null" in Origin headers.
    """

    scheme: str = ""
    host: str = ""
    port: int = 0
    opaque: bool = False

    @classmethod
    def web(cls, scheme: str, host: str, port: int) -> "Origin":
        return cls(scheme=scheme, host=host.lower(), port=port)

    @classmethod
    def opaque_origin(cls) -> "Origin":
        return cls(opaque=True)

    @classmethod
    def from_uri(cls, uri: RequestUri) -> "Origin":
        if uri.scheme == "http":
            return cls.web("http", uri.host, uri.port)
        return cls.opaque_origin()

    def serialize(self) -> str:
        if self.opaque:
            return "null"
        if self.port == 80:
            return f"{self.scheme}://{self.host}"
        return f"{self.scheme}://{self.host}:{self.port}"

    def same_site_with(self, other: "Origin") -> bool:
        if self.opaque or other.opaque:
            return False
        return (self.scheme, self.host, self.port) == (
            other.scheme,
            other.host,
            other.port,
        )


@dataclass(frozen=True)
class RequestContext:
    """Who is asking: the initiating document's origin (None for
    API-initiated loads) and the origin being requested."""

    target_origin: Origin
    initiator_origin: Origin | None = None


def _check_cookie_name(name: str) -> None:
    if not name:
        raise ValueError("empty cookie name")
    if any(ch in "=;" or ch.isspace() for ch in name):
        raise ValueError(f"illegal character in cookie name {name!r}")


def _check_cookie_value(value: str) -> None:
    if any(ch in ";\r\n" for ch in value):
        raise ValueError(f"illegal character in cookie value {value!r}")


@dataclass(frozen=True)
class Cookie:
    name: str
    value: str
    domain: str
    path: str = "/"
    same_site: SameSite = SameSite.NONE

    def __post_init__(self) -> None:
        _check_cookie_name(self.name)
        _check_cookie_value(self.value)
        if not self.path.startswith("/"):
            raise ValueError(f"cookie path must begin with '/': {self.path!r}")


@dataclass
class CookieStore:
    entries: list[Cookie] = field(default_factory=list)
    accept_enabled: bool = True


def parse_set_cookie(header_value: str, host: str) -> Cookie:
    """One Set-Cookie header to a Cookie; raises MalformedSetCookie."""
    parts = header_value.split(";")
    name, sep, value = parts[0].partition("=")
    if not sep:
        raise MalformedSetCookie(f"missing '=' in {header_value!r}")
    name = name.strip()
    value = value.strip()
    path = "/"
    same_site = SameSite.NONE
    for attr in parts[1:]:
        attr_name, attr_sep, attr_value = attr.strip().partition("=")
        key = attr_name.lower()
        if key == "path" and attr_sep:
            path = attr_value
        elif key == "samesite" and attr_sep and attr_value.lower() == "strict":
            same_site = SameSite.STRICT
        else:
            raise MalformedSetCookie(f"unsupported attribute {attr.strip()!r}")
    try:
        return Cookie(
            name=name, value=value, domain=host.lower(), path=path, same_site=same_site
        )
    except ValueError as exc:
        raise MalformedSetCookie(str(exc)) from exc


def store_from_response(
    store: CookieStore, url: RequestUri, response: HttpResponse
) -> CookieStore:
    """Store every well-formed Set-Cookie header under the url's host.

    A later cookie with the same (name, domain, path) replaces the earlier
    one in place, keeping its storage position.  Malformed headers are
    skipped and logged; the rest still land.  No-op when acceptance is off.
    """
    if not store.accept_enabled:
        return store
    if url.scheme != "http":
        raise BadUrl(f"cookies only stored for http URLs, got {url.scheme!r}")
    for header_value in get_header_values(response, "Set-Cookie"):
        try:
            cookie = parse_set_cookie(header_value, url.host)
        except MalformedSetCookie as exc:
            logger.warning("skipping malformed Set-Cookie %r: %s", header_value, exc)
            continue
        for i, existing in enumerate(store.entries):
            if (existing.name, existing.domain, existing.path) == (
                cookie.name,
                cookie.domain,
                cookie.path,
            ):
                store.entries[i] = cookie
                break
        else:
            store.entries.append(cookie)
    return store


def _matches(cookie: Cookie, host: str, path: str) -> bool:
    return cookie.domain == host.lower() and path.startswith(cookie.path)


def get_cookie(store: CookieStore, url: str) -> str | None:
    """The hosting application's raw query: every cookie scoped to the
    url's host and path, joined "name=value; name2=value2" in storage
    order.  SameSite is deliberately not consulted.
    """
    uri = parse_url(url)
    if uri.scheme != "http":
        raise BadUrl(f"cookies are scoped to http URLs, got {url!r}")
    pairs = [
        f"{c.name}={c.value}" for c in store.entries if _matches(c, uri.host, uri.path)
    ]
    if not pairs:
        return None
    return "; ".join(pairs)


def cookies_for_request(
    store: CookieStore, ctx: RequestContext, path: str
) -> str | None:
    """Browser-side attachment: like get_cookie, but Strict cookies are
    withheld when the initiating document's origin is present and not
    same-site with the target."""
    cross_site = ctx.initiator_origin is not None and not ctx.initiator_origin.same_site_with(
        ctx.target_origin
    )
    pairs = []
    for cookie in store.entries:
        if not _matches(cookie, ctx.target_origin.host, path):
            continue
        if cross_site and cookie.same_site is SameSite.STRICT:
            continue
        pairs.append(f"{cookie.name}={cookie.value}")
    if not pairs:
        return None
    return "; ".join(pairs)


def clear(store: CookieStore) -> CookieStore:
    store.entries.clear()
    return store
