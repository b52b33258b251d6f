"""Wire-level exercises against a live in-process server.

Every test talks through a real socket, raw-framed or WebSocket, so the
whole stack is covered: transport sniffing, handshake gating, the writer
queue and the simulation thread.
"""

import socket
import struct
import threading
import time

import pytest

from flowsteer import protocol as proto
from flowsteer import replay
from flowsteer import scenario as sc
from flowsteer.server import ServerStartupError, SteeringServer

from test_scenario import micro_scene

DIMS = micro_scene().dims
NCELLS = DIMS[0] * DIMS[1] * DIMS[2]


def cell_index(x, y, z):
    # snapshot cells travel x fastest
    return x + DIMS[0] * (y + DIMS[1] * z)


class ClosedByServer(Exception):
    pass


class RawClient:
    def __init__(self, port, host="127.0.0.1"):
        self.sock = socket.create_connection((host, port), timeout=10)
        self.sock.settimeout(10)
        self.dec = proto.Decoder()
        self.inbox = []

    def close(self):
        self.sock.close()

    def send(self, msg):
        self.sock.sendall(proto.encode(msg))

    def send_raw(self, data):
        self.sock.sendall(data)

    def _pump_once(self):
        chunk = self.sock.recv(65536)
        if not chunk:
            raise ClosedByServer
        self.inbox.extend(self.dec.feed(chunk))

    def read_until(self, pred, timeout=30.0):
        """Consume inbound messages until one satisfies `pred`; return it.

        Everything read before the match is discarded, so successive calls
        always move forward in the stream.
        """
        deadline = time.monotonic() + timeout
        while True:
            while self.inbox:
                msg = self.inbox.pop(0)
                if pred(msg):
                    return msg
            if time.monotonic() > deadline:
                raise TimeoutError("no matching message within %.0fs"
                                   % timeout)
            self._pump_once()

    def expect(self, typ, timeout=30.0):
        return self.read_until(lambda m: isinstance(m, typ), timeout)

    def expect_eof(self, timeout=10.0):
        deadline = time.monotonic() + timeout
        while time.monotonic() < deadline:
            try:
                self._pump_once()
            except ClosedByServer:
                return
        raise TimeoutError("server kept the connection open")


@pytest.fixture()
def server_factory():
    started = []

    def make(spec=None, **kwargs):
        srv = SteeringServer(spec or micro_scene(), port=0, **kwargs)
        thread = threading.Thread(target=srv.serve_forever, daemon=True)
        thread.start()
        started.append((srv, thread))
        return srv

    yield make
    for srv, thread in started:
        srv.close()
        thread.join(timeout=5)


@pytest.fixture()
def server(server_factory):
    return server_factory()


def hello(client):
    client.send(proto.Hello(proto.PROTOCOL_VERSION))
    welcome = client.expect(proto.Welcome)
    snap = client.expect(proto.Snapshot)
    return welcome, snap


# ----------------------------------------------------------------- handshake

def test_hello_gets_welcome_then_fresh_snapshot(server):
    c = RawClient(server.port)
    try:
        welcome, snap = hello(c)
        assert (welcome.nx, welcome.ny, welcome.nz) == DIMS
        assert welcome.version == proto.PROTOCOL_VERSION
        assert welcome.dx == pytest.approx(1.0 / 30.0)
        assert welcome.dt > 0
        assert len(snap.cells) == NCELLS
        assert snap.timestep == 0
        # face cells are sealed, interior water is full
        assert snap.cells[cell_index(0, 0, 0)] == proto.WALL_BYTE
        assert snap.cells[cell_index(2, 2, 2)] == proto.EPS_SCALE
        assert snap.cells[cell_index(5, 5, 12)] == 0
    finally:
        c.close()


def test_commands_before_hello_are_discarded(server):
    c = RawClient(server.port)
    try:
        c.send(proto.Control(proto.V_START))
        err = c.expect(proto.Error)
        assert err.code == proto.ERR_NOT_READY
        hello(c)
        # had the early start been applied, single-step would be illegal
        c.send(proto.Control(proto.V_STEP))
        stepped = c.read_until(lambda m: isinstance(m, proto.Snapshot)
                               and m.timestep > 0)
        assert stepped.timestep == 1
        ack = c.expect(proto.Ack)  # follows the forced snapshot
        assert ack.echo == proto.T_CONTROL
    finally:
        c.close()


def test_version_mismatch_is_fatal(server):
    c = RawClient(server.port)
    try:
        c.send(proto.Hello(proto.PROTOCOL_VERSION + 1))
        err = c.expect(proto.Error)
        assert err.code == proto.ERR_VERSION_MISMATCH
        assert "version" in err.message
        c.expect_eof()
    finally:
        c.close()


def test_repeat_hello_rewelcomes(server):
    c = RawClient(server.port)
    try:
        hello(c)
        c.send(proto.Hello(proto.PROTOCOL_VERSION))
        again = c.read_until(lambda m: isinstance(m, proto.Welcome))
        assert (again.nx, again.ny, again.nz) == DIMS
    finally:
        c.close()


def test_malformed_frame_reports_error_and_resyncs(server):
    c = RawClient(server.port)
    try:
        c.send_raw(struct.pack("<I", 1) + b"\x7f")  # unknown frame type
        err = c.expect(proto.Error)
        assert err.code == proto.ERR_UNKNOWN_TYPE
        hello(c)  # the stream recovered
    finally:
        c.close()


# ------------------------------------------------------------------ steering

def test_start_streams_monotone_snapshots_with_acks(server):
    c = RawClient(server.port)
    try:
        _, first = hello(c)
        c.send(proto.Control(proto.V_START))
        ack = c.expect(proto.Ack)
        assert ack.echo == proto.T_CONTROL
        seen = [first]
        while len(seen) < 5:
            seen.append(c.expect(proto.Snapshot))
        seqs = [s.seq for s in seen]
        steps = [s.timestep for s in seen]
        assert seqs == sorted(seqs) and len(set(seqs)) == len(seqs)
        assert steps == sorted(steps)
        assert steps[-1] > 0
    finally:
        c.close()


def test_edit_lands_at_the_boundary_and_shows_in_cells(server):
    c = RawClient(server.port)
    try:
        _, snap = hello(c)
        target = cell_index(5, 5, 12)
        assert snap.cells[target] == 0
        c.send(proto.EditCells(((5, 5, 12, proto.A_SET_WALL),)))
        ack = c.expect(proto.Ack)
        assert ack.echo == proto.T_EDIT_CELLS
        c.send(proto.Control(proto.V_STEP))
        after = c.read_until(lambda m: isinstance(m, proto.Snapshot)
                             and m.timestep >= 1)
        assert after.cells[target] == proto.WALL_BYTE
    finally:
        c.close()


def test_out_of_bounds_edit_is_rejected(server):
    c = RawClient(server.port)
    try:
        hello(c)
        c.send(proto.EditCells(((99, 0, 0, proto.A_SET_WALL),)))
        err = c.expect(proto.Error)
        assert err.code == proto.ERR_OUT_OF_BOUNDS
    finally:
        c.close()


def test_restart_mode_rejects_edits_mid_run(server_factory):
    srv = server_factory(mode="restart")
    c = RawClient(srv.port)
    try:
        hello(c)
        c.send(proto.Control(proto.V_START))
        c.read_until(lambda m: isinstance(m, proto.Snapshot)
                     and m.timestep > 0)
        c.send(proto.EditCells(((5, 5, 12, proto.A_FILL_WATER),)))
        err = c.expect(proto.Error)
        assert err.code == proto.ERR_MODE_VIOLATION
    finally:
        c.close()


def test_simulation_survives_reconnect(server):
    c1 = RawClient(server.port)
    try:
        hello(c1)
        c1.send(proto.Control(proto.V_START))
        last = c1.read_until(lambda m: isinstance(m, proto.Snapshot)
                             and m.timestep >= 20)
    finally:
        c1.close()
    c2 = RawClient(server.port)
    try:
        _, snap = hello(c2)
        assert snap.timestep > 0
        assert snap.seq > last.seq
        later = c2.read_until(lambda m: isinstance(m, proto.Snapshot)
                              and m.seq > snap.seq)
        assert later.timestep > snap.timestep  # still running
    finally:
        c2.close()


def test_port_collision_raises_startup_error(server):
    with pytest.raises(ServerStartupError, match="cannot listen"):
        SteeringServer(micro_scene(), port=server.port)


# ----------------------------------------------------------------- websocket

RFC_KEY = "dGhlIHNhbXBsZSBub25jZQ=="
RFC_ACCEPT = "s3pPLMBiTxaQ9kYGzzhZRbK+xOo="


class WsClient:
    def __init__(self, port, host="127.0.0.1"):
        self.sock = socket.create_connection((host, port), timeout=10)
        self.sock.settimeout(10)
        self.dec = proto.Decoder()
        self.inbox = []

    def close(self):
        self.sock.close()

    def upgrade(self, key=RFC_KEY):
        self.sock.sendall((
            "GET /stream HTTP/1.1\r\n"
            "Host: localhost\r\n"
            "Upgrade: websocket\r\n"
            "Connection: Upgrade\r\n"
            "Sec-WebSocket-Key: %s\r\n"
            "Sec-WebSocket-Version: 13\r\n\r\n" % key).encode("ascii"))
        reply = b""
        while b"\r\n\r\n" not in reply:
            chunk = self.sock.recv(4096)
            if not chunk:
                raise ClosedByServer
            reply += chunk
        head, _, rest = reply.partition(b"\r\n\r\n")
        assert rest == b""  # frames never race the 101
        return head.decode("ascii")

    def send_binary(self, payload, mask=b"\x37\xfa\x21\x3d", masked=True):
        n = len(payload)
        if n < 126:
            head = struct.pack("!BB", 0x82, (0x80 if masked else 0) | n)
        else:
            head = struct.pack("!BBH", 0x82, (0x80 if masked else 0) | 126, n)
        if not masked:
            self.sock.sendall(head + payload)
            return
        body = bytes(b ^ mask[i % 4] for i, b in enumerate(payload))
        self.sock.sendall(head + mask + body)

    def _read_exact(self, n):
        buf = b""
        while len(buf) < n:
            chunk = self.sock.recv(n - len(buf))
            if not chunk:
                raise ClosedByServer
            buf += chunk
        return buf

    def recv_frame(self):
        b0, b1 = self._read_exact(2)
        assert not (b1 & 0x80), "server frames must be unmasked"
        n = b1 & 0x7F
        if n == 126:
            n = struct.unpack("!H", self._read_exact(2))[0]
        elif n == 127:
            n = struct.unpack("!Q", self._read_exact(8))[0]
        return b0 & 0x0F, self._read_exact(n)

    def expect(self, typ, timeout=30.0):
        deadline = time.monotonic() + timeout
        while True:
            while self.inbox:
                msg = self.inbox.pop(0)
                if isinstance(msg, typ):
                    return msg
            if time.monotonic() > deadline:
                raise TimeoutError
            opcode, payload = self.recv_frame()
            if opcode == 0x2:
                self.inbox.extend(self.dec.feed(payload))


def test_websocket_upgrade_speaks_the_same_frames(server):
    c = WsClient(server.port)
    try:
        head = c.upgrade()
        assert "101" in head.splitlines()[0]
        assert "Sec-WebSocket-Accept: %s" % RFC_ACCEPT in head
        c.send_binary(proto.encode(proto.Hello(proto.PROTOCOL_VERSION)))
        welcome = c.expect(proto.Welcome)
        assert (welcome.nx, welcome.ny, welcome.nz) == DIMS
        snap = c.expect(proto.Snapshot)
        assert len(snap.cells) == NCELLS
        c.send_binary(proto.encode(proto.Control(proto.V_START)))
        c.expect(proto.Ack)
        moving = c.expect(proto.Snapshot)
        while moving.timestep == 0:
            moving = c.expect(proto.Snapshot)
        assert moving.timestep > 0
    finally:
        c.close()


def test_websocket_unmasked_client_frame_drops_connection(server):
    c = WsClient(server.port)
    try:
        c.upgrade()
        c.send_binary(proto.encode(proto.Hello(proto.PROTOCOL_VERSION)),
                      masked=False)
        with pytest.raises((ClosedByServer, TimeoutError, OSError)):
            while True:
                c.recv_frame()
    finally:
        c.close()


def test_non_websocket_get_gets_400(server):
    sock = socket.create_connection(("127.0.0.1", server.port), timeout=10)
    try:
        sock.sendall(b"GET / HTTP/1.1\r\nHost: x\r\n\r\n")
        reply = sock.recv(4096)
        assert b"400" in reply.split(b"\r\n", 1)[0]
    finally:
        sock.close()


# ----------------------------------------------------- replay equivalence

WALL_CELLS = [(x, y, z) for x in (7, 8) for y in range(1, 11) for z in (1, 2)]


def test_live_session_and_replay_write_the_same_log(server_factory, tmp_path):
    srv = server_factory(out_dir=tmp_path / "live", cadence=16)
    c = RawClient(srv.port)
    try:
        hello(c)
        c.send(proto.EditCells(
            tuple((x, y, z, proto.A_SET_WALL) for x, y, z in WALL_CELLS)))
        c.expect(proto.Ack)
        c.send(proto.Control(proto.V_START))
        done = c.read_until(lambda m: isinstance(m, proto.Event)
                            and m.code == proto.E_SUCCESS, timeout=120.0)
        assert done.timestep > 0
    finally:
        c.close()
    srv.close()
    live = replay.strip_clock(sc.read_log(tmp_path / "live" / "events.log"))

    lines = ["at 0 edit %d %d %d wall" % cell for cell in WALL_CELLS]
    lines.append("at 0 start")
    spec = micro_scene()
    result = replay.run_replay(
        spec, replay.parse_script("\n".join(lines), spec),
        total_steps=done.timestep + 10, cadence=16)
    assert replay.strip_clock(result.records) == live
