"""Wire codec, header semantics, and form-encoding tests."""

from urllib.parse import quote_plus

import pytest
from hypothesis import given, strategies as st

from csrflab.httpcore import (
    BadUrl,
    Header,
    HttpMethod,
    HttpRequest,
    HttpResponse,
    IllegalHeader,
    MalformedEncoding,
    MalformedMessage,
    REASON_PHRASES,
    RequestUri,
    form_urldecode,
    form_urlencode,
    get_header,
    get_header_values,
    make_request,
    make_response,
    parse_request,
    parse_response,
    parse_url,
    serialize,
    set_header,
)

# ---------------------------------------------------------------- parsing


def test_parse_request_minimal_get():
    raw = b"GET /index.php HTTP/1.1\r\nHost: 127.0.0.1:8080\r\nConnection: close\r\n\r\n"
    req = parse_request(raw)
    assert req.method is HttpMethod.GET
    assert req.uri.path == "/index.php"
    assert req.uri.host == "127.0.0.1"
    assert req.uri.port == 8080
    assert req.uri.query is None
    assert req.body == b""


def test_parse_request_post_with_body_and_query():
    body = b"title=hi&message=there"
    raw = (
        b"POST /new_topic.php?draft=1 HTTP/1.1\r\n"
        b"Host: forum.local\r\n"
        b"Content-Type: application/x-www-form-urlencoded\r\n"
        b"Content-Length: " + str(len(body)).encode() + b"\r\n\r\n" + body
    )
    req = parse_request(raw)
    assert req.method is HttpMethod.POST
    assert req.uri.port == 80
    assert req.uri.query == "draft=1"
    assert req.body == body


@pytest.mark.parametrize(
    "raw",
    [
        b"GET /x HTTP/1.1\r\nConnection: close\r\n\r\n",  # no Host
        b"GET /x HTTP/1.1\r\nHost: a\r\nHost: b\r\n\r\n",
        b"GET /x HTTP/1.0\r\nHost: a\r\n\r\n",
        b"BREW /x HTTP/1.1\r\nHost: a\r\n\r\n",
        b"GET http://a/x HTTP/1.1\r\nHost: a\r\n\r\n",  # absolute-form target
        b"GET /x HTTP/1.1\r\nHost: a\r\nNo-Colon-Here\r\n\r\n",
        b"GET /x HTTP/1.1\r\nHost: a:notaport\r\n\r\n",
        b"GET /x HTTP/1.1\r\nHost: a\r\n",  # missing terminator
        b"GET /x HTTP/1.1\r\nHost: a\r\n\r\nstray-body",
    ],
)
def test_parse_request_rejects(raw):
    with pytest.raises(MalformedMessage):
        parse_request(raw)


def test_parse_request_content_length_mismatch():
    raw = b"POST /x HTTP/1.1\r\nHost: a\r\nContent-Length: 5\r\n\r\nabc"
    with pytest.raises(MalformedMessage):
        parse_request(raw)


def test_parse_request_duplicate_content_length():
    raw = b"POST /x HTTP/1.1\r\nHost: a\r\nContent-Length: 3\r\nContent-Length: 3\r\n\r\nabc"
    with pytest.raises(MalformedMessage):
        parse_request(raw)


def test_parse_response_basic():
    raw = b"HTTP/1.1 200 OK\r\nContent-Length: 2\r\nConnection: close\r\n\r\nhi"
    resp = parse_response(raw)
    assert resp.status == 200
    assert resp.reason == "OK"
    assert resp.body == b"hi"


def test_parse_response_302_needs_location():
    ok = b"HTTP/1.1 302 Found\r\nLocation: /index.php\r\nContent-Length: 0\r\n\r\n"
    assert parse_response(ok).status == 302
    with pytest.raises(MalformedMessage):
        parse_response(b"HTTP/1.1 302 Found\r\nContent-Length: 0\r\n\r\n")
    with pytest.raises(MalformedMessage):
        parse_response(
            b"HTTP/1.1 302 Found\r\nLocation: /a\r\nLocation: /b\r\nContent-Length: 0\r\n\r\n"
        )


@pytest.mark.parametrize(
    "raw",
    [
        b"HTTP/2 200 OK\r\n\r\n",
        b"HTTP/1.1 418 Teapot\r\n\r\n",
        b"HTTP/1.1 abc OK\r\n\r\n",
        b"HTTP/1.1 200\r\n\r\n",
    ],
)
def test_parse_response_rejects(raw):
    with pytest.raises(MalformedMessage):
        parse_response(raw)


# ---------------------------------------------------------------- headers


def test_set_header_overwrites_first_match_only():
    req = HttpRequest(method=HttpMethod.GET, uri=RequestUri("http", "a"))
    req.headers = [
        Header("X", "1"),
        Header("Cookie", "a"),
        Header("Y", "2"),
        Header("Cookie", "b"),
    ]
    set_header(req, "cookie", "z")
    assert [(h.name, h.value) for h in req.headers] == [
        ("X", "1"),
        ("Cookie", "z"),
        ("Y", "2"),
        ("Cookie", "b"),
    ]


def test_set_header_appends_when_absent():
    req = HttpRequest(method=HttpMethod.GET, uri=RequestUri("http", "a"))
    req.headers = [Header("Host", "a")]
    set_header(req, "Cookie", "session_id=abc")
    assert req.headers[-1] == Header("Cookie", "session_id=abc")


def test_set_header_rejects_crlf_value():
    req = HttpRequest(method=HttpMethod.GET, uri=RequestUri("http", "a"))
    with pytest.raises(IllegalHeader):
        set_header(req, "X-Evil", "a\r\nInjected: yes")


def test_header_name_validation():
    with pytest.raises(IllegalHeader):
        Header("Bad Name", "v")
    with pytest.raises(IllegalHeader):
        Header("", "v")
    with pytest.raises(IllegalHeader):
        Header("a:b", "v")


def test_get_header_first_match_and_all_values():
    resp = make_response(200, headers=[("Set-Cookie", "a=1"), ("Set-Cookie", "b=2")])
    assert get_header(resp, "set-cookie") == "a=1"
    assert get_header_values(resp, "SET-COOKIE") == ["a=1", "b=2"]
    assert get_header(resp, "X-Missing") is None


_token = st.text(
    alphabet="abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ0123456789-_",
    min_size=1,
    max_size=12,
)
_hval = st.text(
    alphabet=st.characters(min_codepoint=33, max_codepoint=126),
    max_size=20,
)


@given(_token, _hval, _hval)
def test_set_header_idempotent_on_value(name, v1, v2):
    req = HttpRequest(method=HttpMethod.GET, uri=RequestUri("http", "a"))
    set_header(req, name, v1)
    set_header(req, name, v2)
    set_header(req, name, v2)
    assert get_header(req, name) == v2
    assert len([h for h in req.headers if h.name.lower() == name.lower()]) == 1


# ------------------------------------------------------------- round trip

_path_text = st.text(
    alphabet="abcdefghijklmnopqrstuvwxyz0123456789/-._", max_size=20
).map(lambda s: "/" + s)
_query_text = st.one_of(
    st.none(),
    st.text(alphabet="abcdefghijklmnopqrstuvwxyz0123456789=&-._", max_size=20),
)
_free_headers = st.lists(
    st.tuples(
        _token.filter(lambda n: n.lower() not in ("host", "content-length", "location")),
        _hval,
    ),
    max_size=5,
)


@st.composite
def _requests(draw):
    method = draw(st.sampled_from(list(HttpMethod)))
    host = draw(st.sampled_from(["127.0.0.1", "forum.local", "a.example"]))
    port = draw(st.sampled_from([80, 8080, 65535]))
    uri = RequestUri(
        scheme="http",
        host=host,
        port=port,
        path=draw(_path_text),
        query=draw(_query_text),
    )
    body = draw(st.binary(max_size=40))
    headers = [Header("Host", f"{host}:{port}" if port != 80 else host)]
    for name, value in draw(_free_headers):
        headers.append(Header(name, value))
    if body:
        headers.append(Header("Content-Length", str(len(body))))
    return HttpRequest(method=method, uri=uri, headers=headers, body=body)


@st.composite
def _responses(draw):
    status = draw(st.sampled_from(sorted(REASON_PHRASES)))
    headers = []
    if status == 302:
        headers.append(Header("Location", draw(_path_text)))
    for name, value in draw(_free_headers):
        headers.append(Header(name, value))
    body = draw(st.binary(max_size=40))
    headers.append(Header("Content-Length", str(len(body))))
    return HttpResponse(
        status=status, reason=REASON_PHRASES[status], headers=headers, body=body
    )


@given(_requests())
def test_request_round_trip(req):
    assert parse_request(serialize(req)) == req


@given(_responses())
def test_response_round_trip(resp):
    assert parse_response(serialize(resp)) == resp


def test_make_request_establishes_invariants():
    req = make_request(
        HttpMethod.POST,
        "http://127.0.0.1:8080/new_pm.php",
        body=b"abc",
        content_type="application/x-www-form-urlencoded",
    )
    assert get_header(req, "Host") == "127.0.0.1:8080"
    assert get_header(req, "Connection") == "close"
    assert get_header(req, "Content-Length") == "3"
    assert parse_request(serialize(req)) == req


def test_make_response_round_trips():
    resp = make_response(302, headers=[("Location", "/index.php")])
    assert resp.reason == "Found"
    assert get_header(resp, "Content-Length") == "0"
    assert parse_response(serialize(resp)) == resp


# ------------------------------------------------------------------ urls


def test_parse_url_http_forms():
    uri = parse_url("http://forum.local:8080/new_pm_form.php?x=1")
    assert uri == RequestUri("http", "forum.local", 8080, "/new_pm_form.php", "x=1")
    assert parse_url("http://a.example/").port == 80
    assert parse_url("http://a.example").path == "/"
    assert uri.origin_text() == "http://forum.local:8080"
    assert parse_url("http://a.example/x").origin_text() == "http://a.example"


def test_parse_url_local_schemes():
    uri = parse_url("asset:///attack_form.html")
    assert uri.scheme == "asset"
    assert uri.host == ""
    assert uri.path == "/attack_form.html"
    assert parse_url("file:///tmp/page.html").path == "/tmp/page.html"


@pytest.mark.parametrize(
    "url",
    ["ftp://a/x", "http:///nohost", "http://a:notaport/", "", "not a url"],
)
def test_parse_url_rejects(url):
    with pytest.raises(BadUrl):
        parse_url(url)


# ----------------------------------------------------------------- codec


def test_form_urlencode_api_attack_body():
    pairs = [
        ("recip", "user1"),
        ("title", "WebViewAttackTitle"),
        ("message", "HttpAttackMessage"),
    ]
    encoded = form_urlencode(pairs)
    assert encoded == "recip=user1&title=WebViewAttackTitle&message=HttpAttackMessage"
    assert len(encoded.encode()) == 62


def test_form_urlencode_spaces_and_reserved():
    assert (
        form_urlencode([("message", "WebView attack message from Android")])
        == "message=WebView+attack+message+from+Android"
    )
    assert form_urlencode([("a b", "c&d=e")]) == "a+b=c%26d%3De"
    assert form_urlencode([("t", "100%+legit")]) == "t=100%25%2Blegit"


def test_form_urlencode_table_corners():
    # '*' passes through, '~' does not; multibyte goes octet by octet.
    assert form_urlencode([("k", "*-._")]) == "k=*-._"
    assert form_urlencode([("k", "~")]) == "k=%7E"
    assert form_urlencode([("k", "é")]) == "k=%C3%A9"
    assert form_urlencode([("k", "\x00")]) == "k=%00"


def test_form_urldecode_examples():
    assert form_urldecode("a+b=c%26d%3De") == [("a b", "c&d=e")]
    assert form_urldecode("k=%c3%a9") == [("k", "é")]  # lowercase hex accepted
    assert form_urldecode("") == []
    assert form_urldecode("flag") == [("flag", "")]


@pytest.mark.parametrize("bad", ["k=%G1", "k=%4", "k=%", "k=%FF"])
def test_form_urldecode_rejects(bad):
    with pytest.raises(MalformedEncoding):
        form_urldecode(bad)


_pair_text = st.text(max_size=15)


@given(st.lists(st.tuples(_pair_text.filter(bool), _pair_text), max_size=6))
def test_codec_round_trip(pairs):
    assert form_urldecode(form_urlencode(pairs)) == pairs


@given(st.text(max_size=30).filter(lambda s: "~" not in s))
def test_encoder_agrees_with_stdlib_outside_tilde(text):
    # quote_plus treats '~' as safe; the lab table does not.  On every
    # other input the two encoders must agree exactly.
    assert form_urlencode([("k", text)]).removeprefix("k=") == quote_plus(text, safe="*")
