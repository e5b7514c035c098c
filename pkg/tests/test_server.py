import os
import signal
import socket
import struct
import subprocess
import sys
import threading
from concurrent.futures import ThreadPoolExecutor

import numpy as np
import pytest

from melsmooth.augment import SmoothingPolicy, augment_step
from melsmooth.features import list_feature_files, read_afv1
from melsmooth.server import (BatchClient, BatchRequest, BatchServer, MalformedRequestError, ProtocolError,
                              UnknownUtteranceError, client_fetch, encode_request, encode_response)


@pytest.fixture(scope="module")
def server(demo_features):
    with BatchServer(demo_features, SmoothingPolicy()) as srv:
        yield srv


@pytest.fixture(scope="module")
def ids(demo_features):
    return [uid for uid, _ in list_feature_files(demo_features)]


def test_request_layout():
    data = encode_request(BatchRequest(1, 2, 3, "ab"))
    assert data == b"AFRQ" + struct.pack("<HQQQH", 1, 1, 2, 3, 2) + b"ab"
    assert encode_response(0, 1, 2, 3, 5, b"x" * 8)[:19] == b"AFRS" + struct.pack("<HBIIHH", 1, 0, 1, 2, 3, 5)


def test_pre_schedule_pass_through(server, demo_features, ids):
    resp = client_fetch(server.server_address, BatchRequest(0, 0, 600_000, ids[0]))
    stored = read_afv1(os.path.join(demo_features, f"{ids[0]}.afv1"))
    assert (resp.l_t, resp.l_f) == (1, 1)
    assert resp.payload == stored.values.tobytes()
    assert resp.values().shape == (stored.n_frames, 102)


def test_identical_requests(server, ids):
    req = BatchRequest(77, 555_555, 600_000, ids[3])
    with BatchClient(server.server_address) as c:
        a, b = c.fetch(req), c.fetch(req)
    assert a == b


def test_matches_library(server, demo_features, ids):
    feat = read_afv1(os.path.join(demo_features, f"{ids[2]}.afv1"))
    for step in range(450_000, 450_040):
        resp = client_fetch(server.server_address, BatchRequest(5, step, 600_000, ids[2]))
        out, l_t, l_f = augment_step(feat, SmoothingPolicy(base_seed=5), step, 600_000)
        assert (resp.l_t, resp.l_f) == (l_t, l_f)
        assert resp.payload == out.values.tobytes()
        assert ((l_t, l_f) == (1, 1)) == (resp.payload == feat.values.tobytes())


def test_unknown_id(server):
    with BatchClient(server.server_address) as c:
        with pytest.raises(UnknownUtteranceError) as exc:
            c.fetch(BatchRequest(0, 0, 10, "nope"))
        assert exc.value.status == 2
        # connection stays usable after an unknown id
        with pytest.raises(UnknownUtteranceError):
            c.fetch(BatchRequest(0, 0, 10, "nope2"))


def test_malformed_closes(server):
    with socket.create_connection(server.server_address, timeout=5) as s:
        s.sendall(b"JUNK" + b"\0" * 40)
        head = s.recv(19)
        assert head[:4] == b"AFRS" and head[6] == 1
        assert s.recv(1) == b""


def test_step_beyond_total_is_malformed(server, ids):
    with pytest.raises(MalformedRequestError):
        client_fetch(server.server_address, BatchRequest(0, 10, 10, ids[0]))


def test_pipelining(server, ids):
    reqs = [BatchRequest(s, 460_000 + s, 600_000, ids[s % len(ids)]) for s in range(10)]
    with BatchClient(server.server_address) as c:
        for r in reqs:
            c.send(r)
        piped = [c.receive() for _ in reqs]
    assert piped == [client_fetch(server.server_address, r) for r in reqs]


def test_concurrent_clients(server, ids):
    req = BatchRequest(123, 599_999, 600_000, ids[1])

    def go(_):
        return client_fetch(server.server_address, req).payload

    with ThreadPoolExecutor(8) as pool:
        results = list(pool.map(go, range(8)))
    assert len(set(results)) == 1


def _stub(reply: bytes):
    srv = socket.socket()
    srv.bind(("127.0.0.1", 0))
    srv.listen(1)

    def run():
        conn, _ = srv.accept()
        conn.recv(1024)
        if reply:
            conn.sendall(reply)
        threading.Event().wait(1.0)
        conn.close()
        srv.close()

    threading.Thread(target=run, daemon=True).start()
    return srv.getsockname()


def test_wrong_magic_stub():
    addr = _stub(b"NOPE" + b"\0" * 15)
    with pytest.raises(ProtocolError, match="magic"):
        client_fetch(addr, BatchRequest(0, 0, 1, "x"))


def test_version_mismatch_stub():
    addr = _stub(b"AFRS" + struct.pack("<HBIIHH", 2, 0, 0, 0, 1, 1))
    with pytest.raises(ProtocolError, match="version"):
        client_fetch(addr, BatchRequest(0, 0, 1, "x"))


def test_timeout_stub():
    addr = _stub(b"")
    with pytest.raises(TimeoutError):
        client_fetch(addr, BatchRequest(0, 0, 1, "x"), timeout=0.2)


def test_serve_subcommand_shutdown(demo_features, ids):
    proc = subprocess.Popen([sys.executable, "-m", "melsmooth", "serve", demo_features, "--port", "0"],
                            stderr=subprocess.PIPE, text=True)
    try:
        line = proc.stderr.readline()
        host, port = line.strip().rsplit(" ", 1)[1].rsplit(":", 1)
        resp = client_fetch((host, int(port)), BatchRequest(0, 0, 2, ids[0]))
        assert (resp.l_t, resp.l_f) == (1, 1)
        proc.send_signal(signal.SIGTERM)
        assert proc.wait(timeout=10) == 0
    finally:
        if proc.poll() is None:
            proc.kill()
