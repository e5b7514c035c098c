"""Sidecar TCP server streaming augmented features to training processes.

Wire format, little-endian, one request per frame, pipelining allowed::

    request : "AFRQ" | u16 version=1 | u64 seed | u64 step | u64 total_steps
              | u16 id_len | id (utf-8)
    response: "AFRS" | u16 version=1 | u8 status | u32 n_frames | u32 n_dims
              | u16 l_t | u16 l_f | n_frames * n_dims float32 (row-major)

Status 0 is ok, 1 a malformed request (the server then closes the
connection), 2 an unknown utterance id.  Error frames carry zero sizes and
no payload.  Each response is ``augment_step`` with the request's seed,
step and id, so the server holds no per-client state.
"""

from __future__ import annotations

import dataclasses
import logging
import signal
import socket
import socketserver
import struct
import threading
from dataclasses import dataclass

import numpy as np

from .augment import SmoothingPolicy, augment_step
from .pipeline import load_corpus

log = logging.getLogger(__name__)

REQUEST_MAGIC = b"AFRQ"
RESPONSE_MAGIC = b"AFRS"
PROTOCOL_VERSION = 1
STATUS_OK = 0
STATUS_MALFORMED = 1
STATUS_UNKNOWN_ID = 2

_REQ = struct.Struct("<4sHQQQH")
_RESP = struct.Struct("<4sHBIIHH")


@dataclass(frozen=True)
class BatchRequest:
    seed: int
    step: int
    total_steps: int
    utterance_id: str


@dataclass(frozen=True)
class BatchResponse:
    status: int
    n_frames: int
    n_dims: int
    l_t: int
    l_f: int
    payload: bytes

    def values(self) -> np.ndarray:
        return np.frombuffer(self.payload, dtype="<f4").reshape(self.n_frames, self.n_dims)


class ProtocolError(Exception):
    pass


class ServerError(Exception):
    def __init__(self, status: int, message: str):
        super().__init__(message)
        self.status = status


class MalformedRequestError(ServerError):
    pass


class UnknownUtteranceError(ServerError):
    pass


def encode_request(req: BatchRequest) -> bytes:
    uid = req.utterance_id.encode("utf-8")
    return _REQ.pack(REQUEST_MAGIC, PROTOCOL_VERSION, req.seed, req.step, req.total_steps, len(uid)) + uid


def encode_response(status: int, n_frames: int = 0, n_dims: int = 0, l_t: int = 0, l_f: int = 0,
                    payload: bytes = b"") -> bytes:
    return _RESP.pack(RESPONSE_MAGIC, PROTOCOL_VERSION, status, n_frames, n_dims, l_t, l_f) + payload


def _recv_exact(sock_or_file, n: int) -> bytes:
    buf = bytearray()
    while len(buf) < n:
        chunk = sock_or_file.recv(n - len(buf))
        if not chunk:
            break
        buf += chunk
    return bytes(buf)


def read_response(sock: socket.socket) -> BatchResponse:
    header = _recv_exact(sock, _RESP.size)
    if len(header) < 4 or header[:4] != RESPONSE_MAGIC:
        raise ProtocolError(f"bad response magic {header[:4]!r}")
    if len(header) < _RESP.size:
        raise ProtocolError("connection closed mid-header")
    _, version, status, n_frames, n_dims, l_t, l_f = _RESP.unpack(header)
    if version != PROTOCOL_VERSION:
        raise ProtocolError(f"protocol version mismatch: server {version}, client {PROTOCOL_VERSION}")
    payload = _recv_exact(sock, 4 * n_frames * n_dims)
    if len(payload) < 4 * n_frames * n_dims:
        raise ProtocolError("connection closed mid-payload")
    if status == STATUS_MALFORMED:
        raise MalformedRequestError(status, "server rejected the request as malformed")
    if status == STATUS_UNKNOWN_ID:
        raise UnknownUtteranceError(status, "unknown utterance id")
    if status != STATUS_OK:
        raise ProtocolError(f"unknown status code {status}")
    return BatchResponse(status, n_frames, n_dims, l_t, l_f, payload)


class _Handler(socketserver.BaseRequestHandler):
    def handle(self):
        sock = self.request
        while True:
            header = _recv_exact(sock, _REQ.size)
            if not header:
                return
            if len(header) < _REQ.size:
                self._reject(sock)
                return
            magic, version, seed, step, total, id_len = _REQ.unpack(header)
            if magic != REQUEST_MAGIC or version != PROTOCOL_VERSION:
                self._reject(sock)
                return
            raw_id = _recv_exact(sock, id_len)
            try:
                if len(raw_id) < id_len:
                    raise ValueError("truncated id")
                uid = raw_id.decode("utf-8")
            except ValueError:
                self._reject(sock)
                return
            if step >= total:
                self._reject(sock)
                return
            sock.sendall(self.server.respond(seed, step, total, uid))

    @staticmethod
    def _reject(sock):
        try:
            sock.sendall(encode_response(STATUS_MALFORMED))
        except OSError:
            pass


class BatchServer(socketserver.ThreadingTCPServer):
    """One handler thread per connection over an immutable in-memory corpus."""

    daemon_threads = True
    allow_reuse_address = True

    def __init__(self, feature_dir, policy: SmoothingPolicy = SmoothingPolicy(), address=("127.0.0.1", 0)):
        self.corpus = {f.utterance_id: f for f in load_corpus(feature_dir)}
        self.policy = policy
        self._thread = None
        super().__init__(address, _Handler)

    def respond(self, seed: int, step: int, total: int, uid: str) -> bytes:
        feat = self.corpus.get(uid)
        if feat is None:
            return encode_response(STATUS_UNKNOWN_ID)
        policy = dataclasses.replace(self.policy, base_seed=seed)
        try:
            out, l_t, l_f = augment_step(feat, policy, step, total, uid)
        except ValueError as exc:
            log.warning("request for %s failed: %s", uid, exc)
            return encode_response(STATUS_MALFORMED)
        payload = np.ascontiguousarray(out.values, dtype="<f4").tobytes()
        return encode_response(STATUS_OK, out.n_frames, out.n_dims, l_t, l_f, payload)

    def start(self) -> "BatchServer":
        """Serve from a background thread (tests, embedding)."""
        self._thread = threading.Thread(target=self.serve_forever, daemon=True)
        self._thread.start()
        return self

    def stop(self) -> None:
        self.shutdown()
        self.server_close()
        if self._thread is not None:
            self._thread.join()

    def __enter__(self):
        return self.start()

    def __exit__(self, *exc):
        self.stop()


def serve(feature_dir, policy: SmoothingPolicy, host: str, port: int, ready=None) -> None:
    """Run in the foreground until SIGINT/SIGTERM."""
    server = BatchServer(feature_dir, policy, (host, port))

    def stop(signum, frame):
        log.info("signal %d, shutting down", signum)
        threading.Thread(target=server.shutdown, daemon=True).start()

    signal.signal(signal.SIGINT, stop)
    signal.signal(signal.SIGTERM, stop)
    if ready is not None:
        ready(server.server_address)
    try:
        server.serve_forever()
    finally:
        server.server_close()


class BatchClient:
    """Persistent connection; requests may be pipelined with ``send``/``receive``."""

    def __init__(self, address, timeout: float = 5.0):
        self.sock = socket.create_connection(address, timeout=timeout)

    def send(self, req: BatchRequest) -> None:
        self.sock.sendall(encode_request(req))

    def receive(self) -> BatchResponse:
        return read_response(self.sock)

    def fetch(self, req: BatchRequest) -> BatchResponse:
        self.send(req)
        return self.receive()

    def close(self) -> None:
        self.sock.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


def client_fetch(address, request: BatchRequest, timeout: float = 5.0) -> BatchResponse:
    """One-shot request.  Raises ``TimeoutError`` (socket timeout), ``ProtocolError``
    or a ``ServerError`` subclass."""
    with BatchClient(address, timeout) as client:
        return client.fetch(request)
