import random
import socket
import struct
import threading

import pytest
from hypothesis import given, settings, strategies as st

from wiregen import random_message
from msvc.covering import pi_s, pi_w
from msvc.field import DEFAULT_PRIME, FieldModulus, FieldRandom, FieldVector, encode_element, mat_vec_mul, random_matrix, random_vector
from msvc.protocol import VerificationFailed, key_gen, prob_gen
from msvc.transport import (
    BAD_DIMS,
    BAD_MESSAGE,
    DUP_SETUP,
    TOO_LARGE,
    UNKNOWN_SESSION,
    Ack,
    Error,
    InputShares,
    RemoteError,
    RemoteServers,
    Results,
    SetupShares,
    StateStore,
    TransportError,
    WireError,
    decode_message,
    delegate_remote,
    encode_message,
    parse_endpoint,
    provision,
    read_frames,
    request,
    setup_messages,
    start_server,
)

Q101 = FieldModulus(101)


@pytest.fixture
def cluster():
    """Start k in-memory daemons; stopped at teardown."""
    handles = []

    def start(k, **kw):
        hs = [start_server(**kw) for _ in range(k)]
        handles.extend(hs)
        return hs

    yield start
    for h in handles:
        h.shutdown()


def provisioned(start, scheme, F, rng, session="s", **kw):
    handles = start(scheme.k, **kw)
    eps = [h.address for h in handles]
    keys = key_gen(F, scheme, rng)
    provision(eps, keys, scheme, session)
    return handles, eps, keys


def test_frame_layout():
    raw = encode_message(Ack("ab"))
    assert raw == struct.pack("!IB", 4, 0x05) + b"\x00\x02ab"
    raw = encode_message(Error("BAD_DIMS", ""))
    assert raw[:5] == struct.pack("!IB", len(raw) - 5, 0x04)


def test_results_layout_frozen():
    msg = Results("s", "r", 7, {(1, 2): FieldVector((3,), FieldModulus(7))})
    raw = encode_message(msg)
    payload = (
        b"\x00\x01s" + b"\x00\x01r" + encode_element(7)
        + struct.pack("!I", 1) + struct.pack("!II", 1, 2) + struct.pack("!I", 1) + encode_element(3)
    )
    assert raw == struct.pack("!IB", len(payload), 0x03) + payload


def test_roundtrip_generated():
    r = random.Random(5)
    for _ in range(500):
        msg = random_message(r)
        raw = encode_message(msg)
        assert decode_message(raw) == msg
        assert encode_message(decode_message(raw)) == raw


@settings(max_examples=200, deadline=None)
@given(st.randoms(use_true_random=False))
def test_roundtrip_property(r):
    msg = random_message(r)
    assert decode_message(encode_message(msg)) == msg


def test_empty_results_map():
    msg = Results("s", "r", 101, {})
    assert decode_message(encode_message(msg)).results == {}


def test_non_canonical_element_rejected():
    raw = bytearray(encode_message(Results("s", "r", 101, {(1, 1): FieldVector((5,), Q101)})))
    raw[-32:] = encode_element(101)
    with pytest.raises(WireError):
        decode_message(bytes(raw))


def test_malformed_frames():
    raw = encode_message(InputShares("s", "r", 101, {1: FieldVector((1, 2), Q101)}))
    for cut in (0, 3, 5, len(raw) - 1):
        with pytest.raises(WireError):
            decode_message(raw[:cut])
    with pytest.raises(WireError):
        decode_message(raw + b"\x00")
    with pytest.raises(WireError):
        decode_message(raw[:4] + b"\x7f" + raw[5:])
    # payload length says more than the fields use
    with pytest.raises(WireError):
        decode_message(struct.pack("!IB", len(raw) - 4, raw[4]) + raw[5:] + b"\x00")


def test_unsorted_map_rejected():
    raw = encode_message(InputShares("s", "r", 101, {1: FieldVector((1,), Q101), 2: FieldVector((2,), Q101)}))
    a, b = struct.pack("!I", 1), struct.pack("!I", 2)
    swapped = raw.replace(a + struct.pack("!I", 1) + encode_element(1), b"\x00" * 40, 1)
    swapped = swapped.replace(b + struct.pack("!I", 1) + encode_element(2), a + struct.pack("!I", 1) + encode_element(1), 1)
    swapped = swapped.replace(b"\x00" * 40, b + struct.pack("!I", 1) + encode_element(2), 1)
    assert swapped != raw
    with pytest.raises(WireError):
        decode_message(swapped)


def test_read_frames():
    msgs = [Ack("a"), Error("X", "y"), Ack("b")]
    assert read_frames(b"".join(encode_message(m) for m in msgs)) == msgs
    with pytest.raises(WireError):
        read_frames(encode_message(Ack("a"))[:-1])


def test_parse_endpoint():
    assert parse_endpoint("127.0.0.1:80") == ("127.0.0.1", 80)
    assert parse_endpoint(":9") == ("127.0.0.1", 9)
    with pytest.raises(ValueError):
        parse_endpoint("nohost")


def test_setup_then_input(cluster, rng):
    scheme = pi_s()
    F = random_matrix(3, 4, Q101, rng)
    handles, eps, keys = provisioned(cluster, scheme, F, rng)
    inp = prob_gen(None, random_vector(4, Q101, rng), scheme, rng)
    for l, ep in zip(scheme.servers(), eps):
        reply = request(ep, InputShares("s", "q1", 101, inp.sigma[l]))
        assert isinstance(reply, Results)
        assert sorted(reply.results) == scheme.cells(l)
        assert all(y == mat_vec_mul(keys.rho[l][u], inp.sigma[l][v]) for (u, v), y in reply.results.items())


def test_error_codes(cluster, rng):
    scheme = pi_s()
    handles, eps, keys = provisioned(cluster, scheme, random_matrix(2, 2, Q101, rng), rng)
    x = FieldVector((1, 2), Q101)
    with pytest.raises(RemoteError) as e:
        request(eps[0], InputShares("nope", "r", 101, {1: x, 2: x}))
    assert e.value.code == UNKNOWN_SESSION
    with pytest.raises(RemoteError) as e:
        provision(eps, keys, scheme, "s")
    assert e.value.code == DUP_SETUP
    with pytest.raises(RemoteError) as e:
        request(eps[0], InputShares("s", "r", 101, {1: x, 3: x}))
    assert e.value.code == BAD_DIMS
    with pytest.raises(RemoteError) as e:
        request(eps[0], InputShares("s", "r", 101, {1: FieldVector((1,), Q101), 2: FieldVector((1,), Q101)}))
    assert e.value.code == BAD_DIMS
    with pytest.raises(RemoteError) as e:
        request(eps[0], Ack("s"))
    assert e.value.code == BAD_MESSAGE
    bad = setup_messages(keys, scheme, "other")[1]
    bad = SetupShares(bad.session_id, 1, bad.scheme_digest, 101, bad.A, bad.B, ((3, 3),), bad.shares)
    with pytest.raises(RemoteError) as e:
        request(eps[0], bad)
    assert e.value.code == BAD_DIMS


def test_garbage_and_oversized_frames(cluster):
    (h,) = cluster(1, max_frame_bytes=1000)
    with socket.create_connection(h.address, timeout=5) as s:
        s.sendall(struct.pack("!IB", 1, 0x7F) + b"\x00")
        reply = decode_message(_recv_all(s))
    assert reply.code == BAD_MESSAGE
    with socket.create_connection(h.address, timeout=5) as s:
        s.sendall(struct.pack("!IB", 5000, 0x02))
        reply = decode_message(_recv_all(s))
    assert reply.code == TOO_LARGE


def _recv_all(sock):
    head = sock.recv(5)
    n = struct.unpack("!I", head[:4])[0]
    body = b""
    while len(body) < n:
        body += sock.recv(n - len(body))
    return head + body


@pytest.mark.parametrize("scheme", [pi_s(), pi_w()], ids=["pi_s", "pi_w"])
def test_loopback_equals_in_process(cluster, scheme):
    mod = FieldModulus(DEFAULT_PRIME)
    F = random_matrix(5, 6, mod, FieldRandom(1))
    x = random_vector(6, mod, FieldRandom(2))
    handles, eps, keys = provisioned(cluster, scheme, F, FieldRandom(3))
    remote = delegate_remote(eps, keys.vk_f, x, scheme, FieldRandom(4), session_id="s")
    assert remote == mat_vec_mul(F, x)


def test_tampering_daemon_detected(cluster, rng):
    scheme = pi_s()
    F = random_matrix(3, 3, Q101, rng)
    keys = key_gen(F, scheme, rng)
    handles = [start_server(tamper=(l == 2)) for l in scheme.servers()]
    try:
        eps = [h.address for h in handles]
        provision(eps, keys, scheme, "t")
        rejected = 0
        for _ in range(50):
            try:
                delegate_remote(eps, keys.vk_f, random_vector(3, Q101, rng), scheme, rng, session_id="t")
            except VerificationFailed as e:
                assert e.server == 2
                rejected += 1
        assert rejected == 50
    finally:
        for h in handles:
            h.shutdown()


def test_down_daemon_is_transport_error(cluster, rng):
    scheme = pi_s()
    handles, eps, keys = provisioned(cluster, scheme, random_matrix(2, 2, Q101, rng), rng)
    handles[1].shutdown()
    with pytest.raises(TransportError) as e:
        delegate_remote(eps, keys.vk_f, random_vector(2, Q101, rng), scheme, rng, session_id="s", timeout=2)
    assert not isinstance(e.value, VerificationFailed)


def test_silent_daemon_times_out(cluster, rng):
    scheme = pi_s()
    handles, eps, keys = provisioned(cluster, scheme, random_matrix(2, 2, Q101, rng), rng)
    silent = socket.socket()
    silent.bind(("127.0.0.1", 0))
    silent.listen()
    accepted = []
    t = threading.Thread(target=lambda: accepted.append(silent.accept()), daemon=True)
    t.start()
    try:
        eps[2] = silent.getsockname()
        with pytest.raises(TransportError):
            delegate_remote(eps, keys.vk_f, random_vector(2, Q101, rng), scheme, rng, session_id="s", timeout=0.5)
    finally:
        for conn, _ in accepted:
            conn.close()
        silent.close()


def test_servers_see_only_their_slice(cluster, rng):
    scheme = pi_s()
    handles, eps, keys = provisioned(cluster, scheme, random_matrix(2, 3, Q101, rng), rng, record=True)
    servers = RemoteServers(eps, "s", scheme)
    for _ in range(3):
        servers.gather(prob_gen(None, random_vector(3, Q101, rng), scheme, rng).sigma)
    for l, h in zip(scheme.servers(), handles):
        setups = [m for m in h.core.trace if isinstance(m, SetupShares)]
        inputs = [m for m in h.core.trace if isinstance(m, InputShares)]
        assert len(setups) == 1 and len(inputs) == 3
        assert set(setups[0].shares) == scheme.A_sets[l - 1]
        assert set(setups[0].C) == scheme.C_sets[l - 1]
        assert all(set(m.shares) == scheme.B_sets[l - 1] for m in inputs)


def test_state_survives_restart(tmp_path, rng):
    scheme = pi_w()
    F = random_matrix(2, 2, Q101, rng)
    keys = key_gen(F, scheme, rng)
    handles = [start_server(store=StateStore(tmp_path / str(l))) for l in scheme.servers()]
    eps = [h.address for h in handles]
    provision(eps, keys, scheme, "persist")
    for h in handles:
        h.shutdown()
    handles = [start_server(store=StateStore(tmp_path / str(l))) for l in scheme.servers()]
    try:
        eps = [h.address for h in handles]
        x = random_vector(2, Q101, rng)
        assert delegate_remote(eps, keys.vk_f, x, scheme, rng, session_id="persist") == mat_vec_mul(F, x)
        with pytest.raises(RemoteError) as e:
            provision(eps, keys, scheme, "persist")
        assert e.value.code == DUP_SETUP
    finally:
        for h in handles:
            h.shutdown()


def test_state_dir_from_env(tmp_path, monkeypatch):
    monkeypatch.setenv("MSVC_STATE_DIR", str(tmp_path / "env"))
    store = StateStore.from_env()
    assert store.directory == tmp_path / "env" and store.directory.is_dir()
