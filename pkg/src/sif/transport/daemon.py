"""Socket daemons: one repository per listening endpoint.

Frames travel over plain TCP. Deployments must layer an encrypted channel
underneath; none is provided here.

Each accepted connection gets its own handler thread. Access to the
repository is serialized by a per-daemon lock, and outgoing messages are sent
after the lock is released. Peer links are persistent outbound connections
that are only ever written to.
"""

from __future__ import annotations

import logging
import os
import random
import socket
import socketserver
import threading
import time
from typing import Mapping, Sequence

from sif.archive import RepositoryState, make_insert_messages
from sif.errors import (
    AlignmentError,
    DecodeError,
    DegenerateBasisError,
    InvalidChainError,
    ParameterMismatchError,
    QueryTimeout,
    RemoteError,
    RoutingError,
    SifError,
    SubgroupError,
    TransportError,
)
from sif.node import handle
from sif.shamir import SharingPolicy
from sif.transport import statefile, wire
from sif.transport.messages import (
    ErrorCode,
    ErrorMessage,
    InsertMessage,
    Message,
    QueryRequest,
    ResultMessage,
    Scheme,
    StatusReply,
    StatusRequest,
    new_txn,
)
from sif.transport.sim import Tap

log = logging.getLogger(__name__)

DEFAULT_TIMEOUT_MS = 30_000

Endpoint = tuple[str, int]


def timeout_seconds(default_ms: int = DEFAULT_TIMEOUT_MS) -> float:
    """Wall-clock protocol timeout; ``SIF_TIMEOUT_MS`` overrides the default."""
    raw = os.environ.get("SIF_TIMEOUT_MS")
    return (int(raw) if raw else default_ms) / 1000.0


def parse_endpoint(text: str) -> Endpoint:
    host, _, port = text.strip().rpartition(":")
    if not host or not port.isdigit():
        raise ValueError(f"endpoint must be host:port, got {text!r}")
    return host, int(port)


def _error_code(exc: Exception) -> int:
    if isinstance(exc, ParameterMismatchError):
        return ErrorCode.PARAMETER_MISMATCH
    if isinstance(exc, AlignmentError):
        return ErrorCode.ALIGNMENT
    if isinstance(exc, RoutingError):
        return ErrorCode.ROUTING
    if isinstance(exc, (InvalidChainError, DegenerateBasisError)):
        return ErrorCode.INVALID_CHAIN
    if isinstance(exc, SubgroupError):
        return ErrorCode.SUBGROUP
    if isinstance(exc, DecodeError):
        return ErrorCode.MALFORMED
    return ErrorCode.INTERNAL


class Connection:
    """A framed, bidirectional stream."""

    def __init__(self, sock: socket.socket):
        sock.setsockopt(socket.IPPROTO_TCP, socket.TCP_NODELAY, 1)
        self.sock = sock
        self._wlock = threading.Lock()

    def _recv_exactly(self, n: int) -> bytes:
        chunks, got = [], 0
        while got < n:
            chunk = self.sock.recv(n - got)
            if not chunk:
                raise ConnectionError("connection closed by peer")
            chunks.append(chunk)
            got += len(chunk)
        return b"".join(chunks)

    def send_frame(self, frame: bytes) -> None:
        with self._wlock:
            self.sock.sendall(frame)

    def send(self, msg: Message) -> None:
        self.send_frame(wire.encode(msg))

    def recv_frame(self) -> bytes:
        return wire.read_frame(self._recv_exactly)

    def recv(self, timeout: float | None = None) -> Message:
        self.sock.settimeout(timeout)
        try:
            return wire.decode(self.recv_frame())
        except socket.timeout:
            raise QueryTimeout(f"no reply within {timeout:.3f}s") from None
        finally:
            self.sock.settimeout(None)

    def close(self) -> None:
        try:
            self.sock.shutdown(socket.SHUT_RDWR)
        except OSError:
            pass
        self.sock.close()


def dial(endpoint: Endpoint, timeout: float | None = None) -> Connection:
    timeout = timeout_seconds() if timeout is None else timeout
    try:
        sock = socket.create_connection(endpoint, timeout=timeout)
    except OSError as exc:
        raise TransportError(f"cannot reach {endpoint[0]}:{endpoint[1]}: {exc}") from exc
    sock.settimeout(None)
    return Connection(sock)


class _Server(socketserver.ThreadingTCPServer):
    allow_reuse_address = True
    daemon_threads = True


class RepositoryDaemon:
    """Hosts one repository actor on ``endpoint``.

    ``peers`` maps repository coordinates to endpoints and may be filled in
    after :meth:`start` (useful with ephemeral ports).
    """

    def __init__(self, repo: RepositoryState, endpoint: Endpoint = ("127.0.0.1", 0),
                 peers: Mapping[int, Endpoint] | None = None, timeout: float | None = None,
                 tap: Tap | None = None, persist_path=None):
        self.repo = repo
        self.persist_path = persist_path
        self.peers: dict[int, Endpoint] = dict(peers or {})
        self.timeout = timeout_seconds() if timeout is None else timeout
        self.tap = tap
        self._lock = threading.Lock()
        self._peer_conns: dict[int, Connection] = {}
        self._peer_lock = threading.Lock()
        self._accepted: set[socket.socket] = set()
        self._server = _Server(endpoint, self._make_handler(), bind_and_activate=True)
        self._thread: threading.Thread | None = None

    @property
    def endpoint(self) -> Endpoint:
        host, port = self._server.server_address[:2]
        return host, port

    def _make_handler(self):
        daemon = self

        class Handler(socketserver.BaseRequestHandler):
            def handle(self):
                daemon._serve_connection(self.request)

        return Handler

    def start(self) -> RepositoryDaemon:
        self._thread = threading.Thread(target=self._server.serve_forever, args=(0.05,),
                                        name=f"repo-{self.repo.repo_id}", daemon=True)
        self._thread.start()
        return self

    def stop(self) -> None:
        self._server.shutdown()
        self._server.server_close()
        for s in list(self._accepted):
            try:
                s.shutdown(socket.SHUT_RDWR)
            except OSError:
                pass
            s.close()
        with self._peer_lock:
            for c in self._peer_conns.values():
                c.close()
            self._peer_conns.clear()

    def replace_repository(self, repo: RepositoryState) -> None:
        """Host ``repo`` from now on, e.g. after its state file was rewritten."""
        if repo.coordinate != self.repo.coordinate:
            raise RoutingError(f"daemon serves coordinate {self.repo.coordinate}, not {repo.coordinate}")
        with self._lock:
            self.repo = repo

    def __enter__(self):
        return self.start()

    def __exit__(self, *exc):
        self.stop()

    def _serve_connection(self, sock: socket.socket) -> None:
        self._accepted.add(sock)
        conn = Connection(sock)
        try:
            while True:
                try:
                    frame = conn.recv_frame()
                except (ConnectionError, OSError):
                    return
                except DecodeError as exc:
                    self._reply(conn, ErrorMessage(bytes(16), ErrorCode.MALFORMED, str(exc)))
                    return
                try:
                    msg = wire.decode(frame)
                except DecodeError as exc:
                    self._reply(conn, ErrorMessage(frame[9:25].ljust(16, b"\0"), ErrorCode.MALFORMED, str(exc)))
                    continue
                try:
                    with self._lock:
                        out = handle(self.repo, msg, conn, now=time.monotonic(), timeout=self.timeout)
                        if isinstance(msg, InsertMessage) and self.persist_path is not None:
                            statefile.save(self.repo, self.persist_path)
                except SifError as exc:
                    log.info("repository %s rejected %s: %s", self.repo.repo_id, type(msg).__name__, exc)
                    out = [(conn, ErrorMessage(msg.txn, _error_code(exc), str(exc), msg.scheme))]
                for dest, reply in out:
                    if isinstance(dest, Connection):
                        self._reply(dest, reply)
                    else:
                        self._send_peer(dest, reply)
        finally:
            self._accepted.discard(sock)
            conn.close()

    def _reply(self, conn: Connection, msg: Message) -> None:
        try:
            conn.send(msg)
        except OSError as exc:
            log.warning("repository %s: reply lost: %s", self.repo.repo_id, exc)

    def _peer(self, coord: int) -> Connection:
        with self._peer_lock:
            conn = self._peer_conns.get(coord)
            if conn is None:
                if coord not in self.peers:
                    raise RoutingError(f"no endpoint known for repository {coord}")
                conn = dial(self.peers[coord], timeout=self.timeout)
                self._peer_conns[coord] = conn
            return conn

    def _drop_peer(self, coord: int) -> None:
        with self._peer_lock:
            conn = self._peer_conns.pop(coord, None)
        if conn is not None:
            conn.close()

    def _send_peer(self, coord: int, msg: Message) -> None:
        frame = wire.encode(msg)
        if self.tap is not None:
            self.tap.record(self.repo.coordinate, coord, frame, 0)
        for attempt in (1, 2):
            try:
                self._peer(coord).send_frame(frame)
                return
            except (OSError, TransportError) as exc:
                self._drop_peer(coord)
                if attempt == 2:
                    # the initiator observes this as a timeout
                    log.warning("repository %s: cannot forward to %s: %s", self.repo.repo_id, coord, exc)


def serve(repo: RepositoryState, endpoint: Endpoint, peers: Mapping[int, Endpoint] | None = None,
          **kwargs) -> RepositoryDaemon:
    """Start a daemon for ``repo`` in a background thread."""
    return RepositoryDaemon(repo, endpoint, peers, **kwargs).start()


class DaemonClient:
    """Client side of daemon mode: issues queries, inserts and status probes."""

    def __init__(self, endpoints: Mapping[int, Endpoint], timeout: float | None = None,
                 rng: random.Random | None = None):
        self.endpoints = dict(endpoints)
        self.timeout = timeout_seconds() if timeout is None else timeout
        self.rng = rng or random.SystemRandom()
        self._conns: dict[int, Connection] = {}

    def close(self) -> None:
        for c in self._conns.values():
            c.close()
        self._conns.clear()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()

    def _conn(self, coord: int) -> Connection:
        conn = self._conns.get(coord)
        if conn is None:
            if coord not in self.endpoints:
                raise RoutingError(f"no endpoint for repository {coord}")
            conn = dial(self.endpoints[coord], timeout=self.timeout)
            self._conns[coord] = conn
        return conn

    def _roundtrip(self, coord: int, msg: Message) -> Message:
        conn = self._conn(coord)
        try:
            conn.send(msg)
            reply = conn.recv(self.timeout)
        except QueryTimeout:
            self._conns.pop(coord, None)
            conn.close()
            raise
        except (OSError, ConnectionError) as exc:
            self._conns.pop(coord, None)
            conn.close()
            raise TransportError(f"repository {coord}: {exc}") from exc
        if isinstance(reply, ErrorMessage):
            raise RemoteError(reply.code, reply.detail)
        if reply.txn != msg.txn:
            raise TransportError(f"repository {coord} answered a different transaction")
        return reply

    def query(self, Z: int, S: Sequence[int], modulus: int, scheme: Scheme = Scheme.SIF,
              txn: bytes | None = None) -> bool:
        """Ask ``S[0]`` to run the chain; blocks until the result or the timeout."""
        S = tuple(S)
        txn = txn if txn is not None else new_txn(self.rng)
        reply = self._roundtrip(S[0], QueryRequest(txn, modulus, Z, S, scheme))
        if not isinstance(reply, ResultMessage):
            raise TransportError(f"unexpected reply {type(reply).__name__}")
        return reply.result

    def status(self, coord: int) -> StatusReply:
        reply = self._roundtrip(coord, StatusRequest(new_txn(self.rng)))
        if not isinstance(reply, StatusReply):
            raise TransportError(f"unexpected reply {type(reply).__name__}")
        return reply

    def insert(self, element: int, policy: SharingPolicy, scheme: Scheme = Scheme.SIF) -> list[InsertMessage]:
        """Send one share to every repository.

        Aborts before sending anything if a repository is unreachable or the
        reported element counts disagree.
        """
        coords = list(policy.x_coords)
        counts = {}
        for c in coords:
            try:
                counts[c] = self.status(c).count
            except TransportError as exc:
                raise AlignmentError(f"insert aborted, repository {c} unreachable: {exc}") from exc
        if len(set(counts.values())) != 1:
            raise AlignmentError(f"insert aborted, element counts disagree: {counts}")
        index = counts[coords[0]]
        msgs = make_insert_messages(element, policy, index, self.rng, scheme=scheme)
        failed = []
        for c, m in zip(coords, msgs):
            try:
                self._roundtrip(c, m)
            except TransportError as exc:
                failed.append((c, str(exc)))
        if failed:
            raise AlignmentError(f"insert of row {index} incomplete, failed at {failed}")
        return msgs
