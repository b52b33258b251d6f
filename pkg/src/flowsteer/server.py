"""Steering server: the wire protocol over TCP, one client at a time.

Two transports share one port.  A connection whose first bytes spell an
HTTP GET is upgraded to a WebSocket (RFC 6455) and each protocol frame
travels as one binary message; anything else is treated as the raw framed
byte stream.  Either way the bytes inside are identical, so clients and
dump files share one codec.

Threading: the simulation loop owns one thread for the whole server
lifetime; each connection adds a reader (the accept thread) and one
writer.  The only cross-thread paths are the driver's command queue and
the writer's outbound queue.  The writer never blocks the simulation: if
the client cannot keep up, the stalest unsent snapshot is replaced by the
newer one while events, acks and errors all stay queued in order.
"""

from __future__ import annotations

import base64
import hashlib
import logging
import socket
import struct
import threading
from collections import deque
from pathlib import Path
from typing import Callable, Optional

from . import protocol
from .scenario import ScenarioRuntime, SceneSpec, scene_sim_factory
from .steering import SnapshotRequest, SteeringDriver

log = logging.getLogger(__name__)

WS_GUID = "258EAFA5-E914-47DA-95CA-C5AB0DC85B11"
MAX_HTTP_HEADER = 16 * 1024


class ServerStartupError(RuntimeError):
    """Fatal configuration problem found before serving begins."""


# ------------------------------------------------------------ websocket layer

def _read_exact(sock: socket.socket, n: int) -> Optional[bytes]:
    buf = bytearray()
    while len(buf) < n:
        chunk = sock.recv(n - len(buf))
        if not chunk:
            return None
        buf.extend(chunk)
    return bytes(buf)


def websocket_accept_key(client_key: str) -> str:
    digest = hashlib.sha1((client_key + WS_GUID).encode("ascii")).digest()
    return base64.b64encode(digest).decode("ascii")


def _ws_upgrade(sock: socket.socket, prefix: bytes) -> bool:
    """Complete the HTTP 101 upgrade; `prefix` holds already-read bytes."""
    data = bytearray(prefix)
    while b"\r\n\r\n" not in data:
        if len(data) > MAX_HTTP_HEADER:
            return False
        chunk = sock.recv(4096)
        if not chunk:
            return False
        data.extend(chunk)
    head, _, _ = bytes(data).partition(b"\r\n\r\n")
    headers = {}
    for line in head.split(b"\r\n")[1:]:
        name, _, value = line.partition(b":")
        headers[name.strip().lower()] = value.strip()
    key = headers.get(b"sec-websocket-key")
    if (b"websocket" not in headers.get(b"upgrade", b"").lower()
            or key is None):
        sock.sendall(b"HTTP/1.1 400 Bad Request\r\n"
                     b"Content-Length: 0\r\n\r\n")
        return False
    accept = websocket_accept_key(key.decode("ascii"))
    sock.sendall(("HTTP/1.1 101 Switching Protocols\r\n"
                  "Upgrade: websocket\r\n"
                  "Connection: Upgrade\r\n"
                  "Sec-WebSocket-Accept: %s\r\n\r\n" % accept)
                 .encode("ascii"))
    return True


def ws_encode_binary(payload: bytes) -> bytes:
    """One unmasked server-to-client binary message."""
    n = len(payload)
    if n < 126:
        head = struct.pack("!BB", 0x82, n)
    elif n < (1 << 16):
        head = struct.pack("!BBH", 0x82, 126, n)
    else:
        head = struct.pack("!BBQ", 0x82, 127, n)
    return head + payload


class _WsReader:
    """Reads complete client messages, answering pings transparently."""

    def __init__(self, sock: socket.socket, send_lock: threading.Lock):
        self._sock = sock
        self._send_lock = send_lock

    def _control(self, opcode: int, payload: bytes) -> None:
        with self._send_lock:
            self._sock.sendall(struct.pack("!BB", 0x80 | opcode,
                                           len(payload)) + payload)

    def _frame(self) -> Optional[tuple[int, bool, bytes]]:
        head = _read_exact(self._sock, 2)
        if head is None:
            return None
        fin = bool(head[0] & 0x80)
        opcode = head[0] & 0x0F
        masked = bool(head[1] & 0x80)
        n = head[1] & 0x7F
        if n == 126:
            ext = _read_exact(self._sock, 2)
            if ext is None:
                return None
            n = struct.unpack("!H", ext)[0]
        elif n == 127:
            ext = _read_exact(self._sock, 8)
            if ext is None:
                return None
            n = struct.unpack("!Q", ext)[0]
        if not masked:
            # clients must mask; a bare frame is a protocol breach
            return None
        mask = _read_exact(self._sock, 4)
        if mask is None:
            return None
        payload = _read_exact(self._sock, n) if n else b""
        if payload is None:
            return None
        data = bytes(b ^ mask[i % 4] for i, b in enumerate(payload))
        return opcode, fin, data

    def recv_message(self) -> Optional[bytes]:
        buf = bytearray()
        while True:
            frame = self._frame()
            if frame is None:
                return None
            opcode, fin, data = frame
            if opcode == 0x8:
                self._control(0x8, data[:125])
                return None
            if opcode == 0x9:
                self._control(0xA, data[:125])
                continue
            if opcode == 0xA:
                continue
            if opcode in (0x0, 0x1, 0x2):
                buf.extend(data)
                if fin:
                    return bytes(buf)
                continue
            return None


# -------------------------------------------------------------- client session

class _Session:
    """One connected client: transport framing, handshake gating, writer."""

    def __init__(self, server: "SteeringServer", sock: socket.socket):
        self.server = server
        self.sock = sock
        self._send_lock = threading.Lock()
        self._ws: Optional[_WsReader] = None
        self._out: deque = deque()
        self._cond = threading.Condition()
        self._done = False
        self._welcomed = False
        self._welcome_dims: Optional[tuple[int, int, int]] = None

    # -- outbound ----------------------------------------------------------

    def enqueue(self, msg: object) -> None:
        """Queue one message for the writer; called from any thread."""
        with self._cond:
            if self._done:
                return
            if isinstance(msg, protocol.Snapshot):
                for i, queued in enumerate(self._out):
                    if isinstance(queued, protocol.Snapshot):
                        del self._out[i]
                        break
            elif (isinstance(msg, protocol.Event)
                    and msg.code == protocol.E_SCENE_LOADED):
                dims = self.server.runtime.spec.dims
                if dims != self._welcome_dims:
                    self._out.append(self.server.welcome())
                    self._welcome_dims = dims
            self._out.append(msg)
            self._cond.notify()

    def _writer_loop(self) -> None:
        while True:
            with self._cond:
                while not self._out and not self._done:
                    self._cond.wait()
                if self._done and not self._out:
                    return
                msg = self._out.popleft()
            frame = protocol.encode(msg)
            try:
                with self._send_lock:
                    if self._ws is not None:
                        self.sock.sendall(ws_encode_binary(frame))
                    else:
                        self.sock.sendall(frame)
            except OSError:
                self.finish()
                return

    def finish(self) -> None:
        with self._cond:
            self._done = True
            self._cond.notify_all()

    def abort(self) -> None:
        """Tear the connection down from another thread (server shutdown)."""
        self.finish()
        try:
            self.sock.shutdown(socket.SHUT_RDWR)
        except OSError:
            pass

    # -- inbound -----------------------------------------------------------

    def _recv_chunk(self) -> Optional[bytes]:
        try:
            if self._ws is not None:
                return self._ws.recv_message()
            chunk = self.sock.recv(65536)
        except OSError:
            return None
        return chunk or None

    def _route(self, item: object) -> None:
        if isinstance(item, protocol.ProtocolViolation):
            self.enqueue(protocol.Error(item.code, item.reason))
            return
        if isinstance(item, protocol.Hello):
            if item.version != protocol.PROTOCOL_VERSION:
                self.enqueue(protocol.Error(
                    protocol.ERR_VERSION_MISMATCH,
                    "server speaks version %d, client sent %d"
                    % (protocol.PROTOCOL_VERSION, item.version)))
                self.finish()
                return
            self.enqueue(self.server.welcome())
            self._welcome_dims = self.server.runtime.spec.dims
            if not self._welcomed:
                self._welcomed = True
                self.server.attach(self)
                # show the current state right away, whatever the cadence
                self.server.driver.submit(SnapshotRequest())
            return
        if not self._welcomed:
            self.enqueue(protocol.Error(
                protocol.ERR_NOT_READY,
                "handshake first: %s before HELLO is discarded"
                % type(item).__name__))
            return
        # everything else is judged by the driver at the step boundary,
        # including server-only types a confused client might send back
        self.server.driver.submit(item)

    def run(self) -> None:
        try:
            prefix = _read_exact(self.sock, 4)
            if prefix is None:
                return
            if prefix == b"GET ":
                if not _ws_upgrade(self.sock, prefix):
                    return
                self._ws = _WsReader(self.sock, self._send_lock)
                prefix = b""
            writer = threading.Thread(target=self._writer_loop,
                                      name="flowsteer-writer", daemon=True)
            writer.start()
            decoder = protocol.Decoder()
            chunk: Optional[bytes] = prefix
            while True:
                if chunk:
                    for item in decoder.feed(chunk):
                        self._route(item)
                        if self._done:
                            break
                # check before blocking in recv again: routing may have
                # ended the session and no more bytes need ever arrive
                if self._done:
                    break
                chunk = self._recv_chunk()
                if chunk is None:
                    break
            self.finish()
            writer.join(timeout=2.0)
        finally:
            self.finish()
            try:
                self.sock.shutdown(socket.SHUT_RDWR)
            except OSError:
                pass
            self.sock.close()


# -------------------------------------------------------------------- server

class SteeringServer:
    """Serve one scene over one listening port until closed.

    The simulation persists across client connections: a client that
    drops and reconnects finds the run where it left it.  Only one client
    is served at a time; further connections wait in the accept backlog.
    """

    def __init__(self, spec: SceneSpec, *, port: int = 0,
                 host: str = "127.0.0.1", cadence: int = 4,
                 mode: str = "interactive",
                 out_dir: Optional[Path | str] = None,
                 scene_dir: Optional[Path | str] = None):
        if mode not in ("interactive", "restart"):
            raise ServerStartupError("mode must be interactive or restart")
        log_path = None
        if out_dir is not None:
            out = Path(out_dir)
            out.mkdir(parents=True, exist_ok=True)
            log_path = out / "events.log"

        self._session: Optional[_Session] = None
        self._session_lock = threading.Lock()
        self.driver = SteeringDriver(scene_sim_factory(spec),
                                     cadence=cadence, sink=self._sink)
        self.driver.reject_edits_while_running = (mode == "restart")
        self.runtime = ScenarioRuntime(spec, self.driver,
                                       scene_dir=scene_dir,
                                       log_path=log_path)
        try:
            self._listener = socket.create_server((host, port), backlog=4)
        except OSError as exc:
            raise ServerStartupError("cannot listen on %s:%d: %s"
                                     % (host, port, exc))
        self.host, self.port = self._listener.getsockname()[:2]
        self._closed = False
        self._driver_thread: Optional[threading.Thread] = None

    # messages emitted while no client is connected are dropped; the log
    # keeps the durable record and reconnecting clients request a snapshot
    def _sink(self, msg: object) -> None:
        with self._session_lock:
            session = self._session
        if session is not None:
            session.enqueue(msg)

    def attach(self, session: _Session) -> None:
        with self._session_lock:
            self._session = session

    def welcome(self) -> protocol.Welcome:
        spec = self.runtime.spec
        return protocol.Welcome(protocol.PROTOCOL_VERSION, *spec.dims,
                                dx=spec.dx, dt=self.driver.sim.params.dt)

    def serve_forever(self) -> None:
        """Accept clients until `close`; runs the simulation loop too."""
        self._driver_thread = threading.Thread(
            target=self.driver.run, name="flowsteer-sim", daemon=True)
        self._driver_thread.start()
        log.info("serving scene %r on %s:%d", self.runtime.spec.name,
                 self.host, self.port)
        try:
            while not self._closed:
                try:
                    sock, addr = self._listener.accept()
                except OSError:
                    break
                log.info("client %s connected", addr)
                session = _Session(self, sock)
                try:
                    session.run()
                finally:
                    with self._session_lock:
                        self._session = None
                    log.info("client %s disconnected", addr)
        finally:
            self.close()

    def close(self) -> None:
        if self._closed:
            return
        self._closed = True
        self.driver.close()
        with self._session_lock:
            session = self._session
            self._session = None
        if session is not None:
            session.abort()
        try:
            self._listener.close()
        except OSError:
            pass
        if self._driver_thread is not None:
            self._driver_thread.join(timeout=2.0)
        self.runtime.log.close()


def serve(spec: SceneSpec, **kwargs) -> SteeringServer:
    """Build a server and run it in the calling thread (CLI entry)."""
    server = SteeringServer(spec, **kwargs)
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        pass
    finally:
        server.close()
    return server
