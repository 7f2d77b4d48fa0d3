"""Wire protocol, server daemon and remote client.

Frame layout::

    [4 bytes  payload length, big-endian]
    [1 byte   message tag]
    [N bytes  payload]

Payload primitives, all big-endian:

* ``str``      u16 byte length + UTF-8
* ``index``    u32
* ``element``  32 bytes, must be ``< q``
* ``modulus``  32 bytes
* ``vector``   u32 dim + dim elements
* ``matrix``   u32 rows + u32 cols + rows*cols elements, row-major
* ``map``      u32 count + entries in ascending key order

A server holds the function shares for one server index per session. The
preprocessing message (``SetupShares``) is persisted to the state directory
and can never be replaced; ``InputShares`` requests are answered with
``Results`` computed from the stored shares.
"""

from __future__ import annotations

import hashlib
import logging
import os
import socket
import socketserver
import struct
import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence, Union

from .covering import CoveringScheme, SchemeSlice
from .field import (
    ELEMENT_BYTES,
    FieldError,
    FieldMatrix,
    FieldModulus,
    FieldRandom,
    FieldVector,
    _matrix,
    _vector,
)
from .protocol import (
    FunctionKeyMaterial,
    ServerOutput,
    VerificationKey,
    compute,
    prob_gen,
    random_offset,
    verify,
)

log = logging.getLogger(__name__)

__all__ = [
    "SetupShares",
    "InputShares",
    "Results",
    "Error",
    "Ack",
    "KeyFile",
    "InputKeyFile",
    "WireError",
    "TransportError",
    "RemoteError",
    "encode_message",
    "decode_message",
    "read_frames",
    "StateStore",
    "serve",
    "start_server",
    "RemoteServers",
    "provision",
    "delegate_remote",
    "STATE_DIR_ENV",
    "UNKNOWN_SESSION",
    "BAD_DIMS",
    "DUP_SETUP",
    "BAD_MESSAGE",
    "TOO_LARGE",
]

STATE_DIR_ENV = "MSVC_STATE_DIR"
HEADER = struct.Struct("!IB")
DEFAULT_MAX_FRAME = 1 << 30
DEFAULT_TIMEOUT = 30.0

UNKNOWN_SESSION = "UNKNOWN_SESSION"
BAD_DIMS = "BAD_DIMS"
DUP_SETUP = "DUP_SETUP"
BAD_MESSAGE = "BAD_MESSAGE"
TOO_LARGE = "TOO_LARGE"

Pair = tuple[int, int]


class WireError(ValueError):
    """Malformed frame or payload."""


class TransportError(Exception):
    """Network failure or timeout talking to a server. Never a sign of cheating."""


class RemoteError(TransportError):
    def __init__(self, code: str, detail: str):
        super().__init__(f"{code}: {detail}")
        self.code = code
        self.detail = detail


@dataclass(frozen=True)
class SetupShares:
    session_id: str
    server_index: int
    scheme_digest: bytes
    modulus: int
    A: tuple[int, ...]
    B: tuple[int, ...]
    C: tuple[Pair, ...]
    shares: Mapping[int, FieldMatrix]


@dataclass(frozen=True)
class InputShares:
    session_id: str
    request_id: str
    modulus: int
    shares: Mapping[int, FieldVector]


@dataclass(frozen=True)
class Results:
    session_id: str
    request_id: str
    modulus: int
    results: Mapping[Pair, FieldVector]


@dataclass(frozen=True)
class Error:
    code: str
    detail: str = ""


@dataclass(frozen=True)
class Ack:
    session_id: str


@dataclass(frozen=True)
class KeyFile:
    """Client verification key, stored alongside the per-server share files."""

    session_id: str
    scheme_json: str
    modulus: int
    d: int
    r: FieldVector
    s: Mapping[int, FieldVector]


@dataclass(frozen=True)
class InputKeyFile:
    """All ``b`` input shares of one request, kept by the client for later verification."""

    session_id: str
    request_id: str
    modulus: int
    shares: Mapping[int, FieldVector]


Message = Union[SetupShares, InputShares, Results, Error, Ack, KeyFile, InputKeyFile]

TAGS = {
    SetupShares: 0x01,
    InputShares: 0x02,
    Results: 0x03,
    Error: 0x04,
    Ack: 0x05,
    KeyFile: 0x10,
    InputKeyFile: 0x11,
}


# Encoding


class _Writer:
    def __init__(self):
        self.parts: list[bytes] = []

    def u16(self, v: int):
        self.parts.append(struct.pack("!H", v))

    def u32(self, v: int):
        if not 0 <= v < 1 << 32:
            raise WireError(f"value {v} does not fit in u32")
        self.parts.append(struct.pack("!I", v))

    def str(self, s: str):
        raw = s.encode()
        if len(raw) >= 1 << 16:
            raise WireError("string too long")
        self.u16(len(raw))
        self.parts.append(raw)

    def raw(self, b: bytes):
        self.parts.append(b)

    def modulus(self, q: int):
        self.parts.append(q.to_bytes(ELEMENT_BYTES, "big"))

    def elements(self, values: Iterable[int]):
        self.parts.append(b"".join(v.to_bytes(ELEMENT_BYTES, "big") for v in values))

    def vector(self, v: FieldVector):
        self.u32(v.dim)
        self.elements(v.values)

    def matrix(self, F: FieldMatrix):
        self.u32(F.m)
        self.u32(F.d)
        for row in F.rows:
            self.elements(row)

    def indices(self, items: Sequence[int]):
        self.u32(len(items))
        for i in items:
            self.u32(i)

    def pairs(self, items: Sequence[Pair]):
        self.u32(len(items))
        for u, v in items:
            self.u32(u)
            self.u32(v)

    def getvalue(self) -> bytes:
        return b"".join(self.parts)


def _encode_payload(msg: Message) -> bytes:
    w = _Writer()
    if isinstance(msg, SetupShares):
        if len(msg.scheme_digest) != 32:
            raise WireError("scheme digest must be 32 bytes")
        w.str(msg.session_id)
        w.u32(msg.server_index)
        w.raw(msg.scheme_digest)
        w.modulus(msg.modulus)
        w.indices(sorted(msg.A))
        w.indices(sorted(msg.B))
        w.pairs(sorted(msg.C))
        w.u32(len(msg.shares))
        for u in sorted(msg.shares):
            w.u32(u)
            w.matrix(msg.shares[u])
    elif isinstance(msg, (InputShares, InputKeyFile)):
        w.str(msg.session_id)
        w.str(msg.request_id)
        w.modulus(msg.modulus)
        w.u32(len(msg.shares))
        for v in sorted(msg.shares):
            w.u32(v)
            w.vector(msg.shares[v])
    elif isinstance(msg, Results):
        w.str(msg.session_id)
        w.str(msg.request_id)
        w.modulus(msg.modulus)
        w.u32(len(msg.results))
        for u, v in sorted(msg.results):
            w.u32(u)
            w.u32(v)
            w.vector(msg.results[(u, v)])
    elif isinstance(msg, Error):
        w.str(msg.code)
        w.str(msg.detail)
    elif isinstance(msg, Ack):
        w.str(msg.session_id)
    elif isinstance(msg, KeyFile):
        w.str(msg.session_id)
        w.str(msg.scheme_json)
        w.modulus(msg.modulus)
        w.u32(msg.d)
        w.vector(msg.r)
        w.u32(len(msg.s))
        for u in sorted(msg.s):
            w.u32(u)
            w.vector(msg.s[u])
    else:
        raise WireError(f"cannot encode {type(msg).__name__}")
    return w.getvalue()


def encode_message(msg: Message) -> bytes:
    payload = _encode_payload(msg)
    return HEADER.pack(len(payload), TAGS[type(msg)]) + payload


# Decoding


class _Reader:
    def __init__(self, data: bytes):
        self.data = memoryview(data)
        self.pos = 0

    def take(self, n: int) -> bytes:
        end = self.pos + n
        if end > len(self.data):
            raise WireError("truncated payload")
        out = bytes(self.data[self.pos:end])
        self.pos = end
        return out

    def u16(self) -> int:
        return struct.unpack("!H", self.take(2))[0]

    def u32(self) -> int:
        return struct.unpack("!I", self.take(4))[0]

    def str(self) -> str:
        try:
            return self.take(self.u16()).decode()
        except UnicodeDecodeError as e:
            raise WireError(f"invalid UTF-8 string: {e}") from e

    def modulus(self) -> FieldModulus:
        q = int.from_bytes(self.take(ELEMENT_BYTES), "big")
        try:
            return FieldModulus(q)
        except FieldError as e:
            raise WireError(str(e)) from e

    def elements(self, n: int, q: int) -> tuple[int, ...]:
        raw = self.take(n * ELEMENT_BYTES)
        frm = int.from_bytes
        vals = tuple(frm(raw[i:i + ELEMENT_BYTES], "big") for i in range(0, len(raw), ELEMENT_BYTES))
        if vals and max(vals) >= q:
            raise WireError(f"non-canonical element {max(vals)} >= q")
        return vals

    def vector(self, mod: FieldModulus) -> FieldVector:
        dim = self.u32()
        if dim == 0:
            raise WireError("zero-dimension vector")
        return _vector(self.elements(dim, mod.q), mod)

    def matrix(self, mod: FieldModulus) -> FieldMatrix:
        m, d = self.u32(), self.u32()
        if m == 0 or d == 0:
            raise WireError("zero-dimension matrix")
        if m * d * ELEMENT_BYTES > len(self.data) - self.pos:
            raise WireError("truncated payload")
        return _matrix(tuple(self.elements(d, mod.q) for _ in range(m)), mod)

    def indices(self) -> tuple[int, ...]:
        return tuple(self.u32() for _ in range(self.u32()))

    def pairs(self) -> tuple[Pair, ...]:
        return tuple((self.u32(), self.u32()) for _ in range(self.u32()))

    def keyed(self, read_key, read_value) -> dict:
        out = {}
        prev = None
        for _ in range(self.u32()):
            key = read_key()
            if prev is not None and key <= prev:
                raise WireError("map keys must be strictly ascending")
            prev = key
            out[key] = read_value()
        return out

    def done(self):
        if self.pos != len(self.data):
            raise WireError(f"{len(self.data) - self.pos} trailing bytes in payload")


def _decode_payload(tag: int, payload: bytes) -> Message:
    r = _Reader(payload)
    if tag == TAGS[SetupShares]:
        sid = r.str()
        idx = r.u32()
        digest = r.take(32)
        mod = r.modulus()
        A, B, C = r.indices(), r.indices(), r.pairs()
        shares = r.keyed(r.u32, lambda: r.matrix(mod))
        msg = SetupShares(sid, idx, digest, mod.q, A, B, C, shares)
    elif tag in (TAGS[InputShares], TAGS[InputKeyFile]):
        sid, rid = r.str(), r.str()
        mod = r.modulus()
        shares = r.keyed(r.u32, lambda: r.vector(mod))
        cls = InputShares if tag == TAGS[InputShares] else InputKeyFile
        msg = cls(sid, rid, mod.q, shares)
    elif tag == TAGS[Results]:
        sid, rid = r.str(), r.str()
        mod = r.modulus()
        results = r.keyed(lambda: (r.u32(), r.u32()), lambda: r.vector(mod))
        msg = Results(sid, rid, mod.q, results)
    elif tag == TAGS[Error]:
        msg = Error(r.str(), r.str())
    elif tag == TAGS[Ack]:
        msg = Ack(r.str())
    elif tag == TAGS[KeyFile]:
        sid, scheme_json = r.str(), r.str()
        mod = r.modulus()
        d = r.u32()
        vec = r.vector(mod)
        s = r.keyed(r.u32, lambda: r.vector(mod))
        msg = KeyFile(sid, scheme_json, mod.q, d, vec, s)
    else:
        raise WireError(f"unknown message tag 0x{tag:02x}")
    r.done()
    return msg


def decode_message(data: bytes) -> Message:
    """Decode exactly one frame."""
    if len(data) < HEADER.size:
        raise WireError("truncated frame header")
    length, tag = HEADER.unpack_from(data)
    if len(data) - HEADER.size < length:
        raise WireError("truncated frame")
    if len(data) - HEADER.size > length:
        raise WireError("trailing bytes after frame")
    return _decode_payload(tag, data[HEADER.size:])


def read_frames(data: bytes) -> list[Message]:
    """Decode a concatenation of frames, as stored in key and transcript files."""
    out = []
    pos = 0
    while pos < len(data):
        if len(data) - pos < HEADER.size:
            raise WireError("truncated frame header")
        length, _ = HEADER.unpack_from(data, pos)
        end = pos + HEADER.size + length
        out.append(decode_message(data[pos:end]))
        pos = end
    return out


def _recv_exact(sock: socket.socket, n: int) -> bytes:
    buf = bytearray()
    while len(buf) < n:
        chunk = sock.recv(min(n - len(buf), 1 << 20))
        if not chunk:
            raise ConnectionError("connection closed mid-frame")
        buf.extend(chunk)
    return bytes(buf)


def recv_frame(sock: socket.socket, max_bytes: int = DEFAULT_MAX_FRAME) -> bytes | None:
    """Read one raw frame; ``None`` on clean EOF before a header."""
    first = sock.recv(HEADER.size)
    if not first:
        return None
    header = first + _recv_exact(sock, HEADER.size - len(first)) if len(first) < HEADER.size else first
    length, _ = HEADER.unpack(header)
    if length > max_bytes:
        raise WireError(f"frame of {length} bytes exceeds limit {max_bytes}")
    return header + _recv_exact(sock, length)


# Server


@dataclass
class ServerSession:
    slice: SchemeSlice
    shares: dict[int, FieldMatrix]
    modulus: FieldModulus
    digest: bytes


class DuplicateSetup(Exception):
    pass


class StateStore:
    """Write-once store of preprocessing messages, one file per session.

    ``directory=None`` keeps everything in memory.
    """

    def __init__(self, directory: str | os.PathLike | None = None):
        self.directory = Path(directory) if directory is not None else None
        if self.directory is not None:
            self.directory.mkdir(parents=True, exist_ok=True)
        self._cache: dict[str, ServerSession] = {}
        self._lock = threading.Lock()

    @classmethod
    def from_env(cls, default: str | os.PathLike | None = None) -> StateStore:
        return cls(os.environ.get(STATE_DIR_ENV, default))

    def _path(self, session_id: str) -> Path:
        return self.directory / (hashlib.sha256(session_id.encode()).hexdigest()[:32] + ".setup")

    @staticmethod
    def _session(msg: SetupShares) -> ServerSession:
        sl = SchemeSlice(msg.server_index, frozenset(msg.A), frozenset(msg.B), frozenset(msg.C))
        return ServerSession(sl, dict(msg.shares), FieldModulus(msg.modulus), msg.scheme_digest)

    def put(self, msg: SetupShares) -> None:
        with self._lock:
            if msg.session_id in self._cache:
                raise DuplicateSetup(msg.session_id)
            if self.directory is not None:
                path = self._path(msg.session_id)
                try:
                    with open(path, "xb") as fh:
                        fh.write(encode_message(msg))
                except FileExistsError:
                    raise DuplicateSetup(msg.session_id) from None
            self._cache[msg.session_id] = self._session(msg)

    def get(self, session_id: str) -> ServerSession | None:
        with self._lock:
            if session_id in self._cache:
                return self._cache[session_id]
            if self.directory is None:
                return None
            path = self._path(session_id)
            if not path.exists():
                return None
            msg = decode_message(path.read_bytes())
            if not isinstance(msg, SetupShares) or msg.session_id != session_id:
                raise WireError(f"corrupt state file {path}")
            sess = self._session(msg)
            self._cache[session_id] = sess
            return sess


def _check_setup(msg: SetupShares) -> str | None:
    if set(msg.shares) != set(msg.A):
        return "function shares do not match A"
    shapes = {F.shape for F in msg.shares.values()}
    if len(shapes) != 1:
        return "function shares have different shapes"
    A, B = set(msg.A), set(msg.B)
    if any(u not in A or v not in B for u, v in msg.C):
        return "assigned pair outside A x B"
    return None


class ServerCore:
    """Message handling independent of the socket layer."""

    def __init__(self, store: StateStore, *, tamper: bool = False, rng: FieldRandom | None = None, record: bool = False):
        self.store = store
        self.tamper = tamper
        self._rng = rng or FieldRandom()
        self._rng_lock = threading.Lock()
        # Every decoded request, when recording is on; used to audit what a server saw.
        self.trace: list[Message] | None = [] if record else None

    def handle(self, msg: Message) -> Message:
        if self.trace is not None:
            self.trace.append(msg)
        if isinstance(msg, SetupShares):
            problem = _check_setup(msg)
            if problem:
                return Error(BAD_DIMS, problem)
            try:
                self.store.put(msg)
            except DuplicateSetup:
                return Error(DUP_SETUP, f"session {msg.session_id!r} already set up")
            return Ack(msg.session_id)
        if isinstance(msg, InputShares):
            sess = self.store.get(msg.session_id)
            if sess is None:
                return Error(UNKNOWN_SESSION, f"no setup for session {msg.session_id!r}")
            if msg.modulus != sess.modulus.q:
                return Error(BAD_DIMS, "modulus does not match session")
            if set(msg.shares) != set(sess.slice.B):
                return Error(BAD_DIMS, f"expected input shares {sorted(sess.slice.B)}, got {sorted(msg.shares)}")
            d = next(iter(sess.shares.values())).d
            if any(x.dim != d for x in msg.shares.values()):
                return Error(BAD_DIMS, f"input shares must have dimension {d}")
            out = compute(sess.slice.server, sess.shares, msg.shares, sess.slice)
            results = out.results
            if self.tamper:
                with self._rng_lock:
                    hook = random_offset(self._rng)
                    results = {p: hook(p, y) for p, y in results.items()}
            return Results(msg.session_id, msg.request_id, sess.modulus.q, results)
        return Error(BAD_MESSAGE, f"servers do not accept {type(msg).__name__}")


class _Handler(socketserver.BaseRequestHandler):
    def handle(self):
        core: ServerCore = self.server.core
        sock: socket.socket = self.request
        while True:
            try:
                raw = recv_frame(sock, self.server.max_frame_bytes)
            except WireError as e:
                self._send(Error(TOO_LARGE, str(e)))
                return
            except (ConnectionError, OSError):
                return
            if raw is None:
                return
            try:
                msg = decode_message(raw)
            except WireError as e:
                reply = Error(BAD_MESSAGE, str(e))
            else:
                try:
                    reply = core.handle(msg)
                except Exception as e:  # keep the daemon alive
                    log.exception("error handling %s", type(msg).__name__)
                    reply = Error(BAD_MESSAGE, str(e))
            if not self._send(reply):
                return

    def _send(self, msg: Message) -> bool:
        try:
            self.request.sendall(encode_message(msg))
            return True
        except OSError:
            return False


class _TCPServer(socketserver.ThreadingTCPServer):
    daemon_threads = True
    allow_reuse_address = True


@dataclass
class ServerHandle:
    server: _TCPServer
    thread: threading.Thread | None = None
    core: ServerCore = field(init=False)

    def __post_init__(self):
        self.core = self.server.core

    @property
    def address(self) -> tuple[str, int]:
        host, port = self.server.server_address[:2]
        return host, port

    def shutdown(self) -> None:
        self.server.shutdown()
        self.server.server_close()
        if self.thread is not None:
            self.thread.join(timeout=5)


def _make_server(address, store, *, tamper, max_frame_bytes, rng, record=False) -> _TCPServer:
    srv = _TCPServer(address, _Handler)
    srv.core = ServerCore(store, tamper=tamper, rng=rng, record=record)
    srv.max_frame_bytes = max_frame_bytes
    return srv


def serve(
    address: tuple[str, int],
    store: StateStore,
    *,
    tamper: bool = False,
    max_frame_bytes: int = DEFAULT_MAX_FRAME,
    rng: FieldRandom | None = None,
    on_ready=None,
) -> None:
    """Run a server in the foreground until interrupted.

    ``on_ready`` is called with the bound ``(host, port)`` before serving starts.
    """
    srv = _make_server(address, store, tamper=tamper, max_frame_bytes=max_frame_bytes, rng=rng)
    log.info("serving on %s:%d (tamper=%s)", *srv.server_address[:2], tamper)
    if on_ready is not None:
        on_ready(srv.server_address[:2])
    try:
        srv.serve_forever()
    finally:
        srv.server_close()


def start_server(
    address: tuple[str, int] = ("127.0.0.1", 0),
    store: StateStore | None = None,
    *,
    tamper: bool = False,
    max_frame_bytes: int = DEFAULT_MAX_FRAME,
    rng: FieldRandom | None = None,
    record: bool = False,
) -> ServerHandle:
    """Start a server on a background thread; port 0 picks a free port."""
    srv = _make_server(
        address, store or StateStore(),
        tamper=tamper, max_frame_bytes=max_frame_bytes, rng=rng, record=record,
    )
    t = threading.Thread(target=srv.serve_forever, name=f"msvc-server-{srv.server_address[1]}", daemon=True)
    t.start()
    return ServerHandle(srv, t)


# Client


Endpoint = tuple[str, int]


def parse_endpoint(text: str) -> Endpoint:
    host, sep, port = text.rpartition(":")
    if not sep or not port.isdigit():
        raise ValueError(f"endpoint must look like host:port, got {text!r}")
    return host or "127.0.0.1", int(port)


def request(endpoint: Endpoint, msg: Message, timeout: float = DEFAULT_TIMEOUT) -> Message:
    """Send one message and wait for the reply. Server ``Error`` replies raise :class:`RemoteError`."""
    try:
        with socket.create_connection(endpoint, timeout=timeout) as sock:
            sock.sendall(encode_message(msg))
            raw = recv_frame(sock)
    except (OSError, ConnectionError) as e:
        raise TransportError(f"{endpoint[0]}:{endpoint[1]}: {e}") from e
    if raw is None:
        raise TransportError(f"{endpoint[0]}:{endpoint[1]}: connection closed without reply")
    reply = decode_message(raw)
    if isinstance(reply, Error):
        raise RemoteError(reply.code, reply.detail)
    return reply


def setup_messages(keys: FunctionKeyMaterial, scheme: CoveringScheme, session_id: str) -> dict[int, SetupShares]:
    """One preprocessing message per server, each carrying only that server's slice."""
    digest = scheme.digest()
    modulus = keys.vk_f.r.modulus.q
    out = {}
    for l in scheme.servers():
        sl = scheme.slice(l)
        out[l] = SetupShares(
            session_id, l, digest, modulus,
            tuple(sorted(sl.A)), tuple(sorted(sl.B)), tuple(sorted(sl.C)),
            keys.rho[l],
        )
    return out


def provision(
    endpoints: Sequence[Endpoint],
    keys: FunctionKeyMaterial,
    scheme: CoveringScheme,
    session_id: str,
    timeout: float = DEFAULT_TIMEOUT,
) -> None:
    if len(endpoints) != scheme.k:
        raise ValueError(f"scheme needs {scheme.k} endpoints, got {len(endpoints)}")
    msgs = setup_messages(keys, scheme, session_id)
    for l, ep in zip(scheme.servers(), endpoints):
        reply = request(ep, msgs[l], timeout)
        if not isinstance(reply, Ack):
            raise TransportError(f"unexpected reply {type(reply).__name__} to setup")


class RemoteServers:
    """Fans input shares out to ``k`` daemons concurrently and joins on all replies."""

    def __init__(
        self,
        endpoints: Sequence[Endpoint],
        session_id: str,
        scheme: CoveringScheme,
        timeout: float = DEFAULT_TIMEOUT,
    ):
        if len(endpoints) != scheme.k:
            raise ValueError(f"scheme needs {scheme.k} endpoints, got {len(endpoints)}")
        self.endpoints = list(endpoints)
        self.session_id = session_id
        self.scheme = scheme
        self.timeout = timeout
        self._counter = 0
        self._lock = threading.Lock()

    def _request_id(self) -> str:
        with self._lock:
            self._counter += 1
            return f"{os.getpid()}-{id(self):x}-{self._counter}"

    def gather(self, sigma) -> list[ServerOutput]:
        rid = self._request_id()
        modulus = next(iter(sigma[1].values())).modulus.q

        def one(l: int) -> ServerOutput:
            reply = request(
                self.endpoints[l - 1],
                InputShares(self.session_id, rid, modulus, sigma[l]),
                self.timeout,
            )
            if not isinstance(reply, Results) or reply.request_id != rid:
                raise TransportError(f"server {l} sent an unexpected reply")
            return ServerOutput(l, dict(reply.results))

        with ThreadPoolExecutor(max_workers=self.scheme.k) as pool:
            return list(pool.map(one, self.scheme.servers()))


def delegate_remote(
    endpoints: Sequence[Endpoint],
    vk_f: VerificationKey,
    x: FieldVector,
    scheme: CoveringScheme,
    rng: FieldRandom,
    *,
    session_id: str,
    timeout: float = DEFAULT_TIMEOUT,
) -> FieldVector:
    """Delegate ``F x`` to provisioned daemons.

    Raises :class:`~msvc.protocol.VerificationFailed` if a result fails its
    check and :class:`TransportError` on network failure or timeout.
    """
    servers = RemoteServers(endpoints, session_id, scheme, timeout)
    inp = prob_gen(None, x, scheme, rng)
    outputs = servers.gather(inp.sigma)
    return verify(vk_f, inp.vk_x, outputs, scheme).unwrap()
