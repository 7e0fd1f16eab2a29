"""Network service: UDP command ingest, TCP telemetry fan-out, and a
WebSocket bridge for browser clients.

One thread paces the control stack against the wall clock; socket threads
only move bytes. Incoming commands land in a single-slot latest-wins
mailbox read once per plant tick, so a flooding client cannot queue up
stale motion. Every telemetry subscriber receives the static scene frame
first, then the live stream, dropping the oldest frame under
backpressure. The WebSocket side speaks RFC 6455 directly (binary
messages carrying ordinary wire frames in both directions).
"""

from __future__ import annotations

import base64
import hashlib
import logging
import os
import queue
import socket
import struct
import threading
import time
from typing import List, Optional

from .config import NetworkConfig, StackConfig
from .errors import MalformedFrame
from .harness import ScenarioSpec
from .protocol import FrameReader, InterfaceMsg, SceneMsg, TelemetryMsg, decode, encode
from .stack import TeleopStack

logger = logging.getLogger(__name__)

BIND_ENV = "MCR_TELEOP_BIND"
WS_GUID = "258EAFA5-E914-47DA-95CA-C5AB0DC85B11"
MAX_DATAGRAM = 65536
SUBSCRIBER_DEPTH = 64   # frames queued per client before drop-oldest


def resolve_bind(network: NetworkConfig, bind: Optional[str] = None) -> str:
    """Explicit argument, then the environment override, then config."""
    return bind or os.environ.get(BIND_ENV) or network.bind


def build_scene(spec: ScenarioSpec, config: StackConfig) -> dict:
    """Static scene description clients need before the first frame."""
    env = spec.environment
    return {
        "scenario": spec.name,
        "subtasks": list(spec.subtasks),
        "approach_point": list(spec.approach_point),
        "proximity": spec.proximity,
        "start_base": list(spec.start_base),
        "ball_position": list(env.ball_position),
        "grasp_radius": env.grasp_radius,
        "drawer": {
            "handle_closed": list(env.drawer.handle_closed),
            "axis": list(env.drawer.axis),
            "travel": env.drawer.travel,
            "start_joint": env.drawer.start_joint,
            "capture_radius": env.drawer.capture_radius,
        },
        "mapper": {
            "dead_zone": config.mapper.limits.dead_zone,
            "saturation": config.mapper.limits.saturation,
        },
        "rates": {
            "control_rate": config.rates.control_rate,
            "telemetry_rate": config.rates.control_rate / config.rates.telemetry_divisor,
            "source_rate": config.source_rate,
        },
    }


class Mailbox:
    """Single-slot latest-wins hand-off from socket threads to the loop."""

    def __init__(self):
        self._lock = threading.Lock()
        self._msg: Optional[InterfaceMsg] = None

    def store(self, msg: InterfaceMsg):
        with self._lock:
            self._msg = msg

    def take(self) -> Optional[InterfaceMsg]:
        with self._lock:
            msg, self._msg = self._msg, None
            return msg


class Subscriber:
    """Bounded frame queue for one telemetry client, drop-oldest."""

    def __init__(self):
        self._queue = queue.Queue(maxsize=SUBSCRIBER_DEPTH)
        self.closed = False

    def offer(self, frame: bytes):
        while True:
            try:
                self._queue.put_nowait(frame)
                return
            except queue.Full:
                try:
                    self._queue.get_nowait()
                except queue.Empty:
                    pass

    def get(self, timeout: float) -> Optional[bytes]:
        try:
            return self._queue.get(timeout=timeout)
        except queue.Empty:
            return None


# -- RFC 6455 plumbing -------------------------------------------------------

def ws_accept_value(key: str) -> str:
    digest = hashlib.sha1((key + WS_GUID).encode("ascii")).digest()
    return base64.b64encode(digest).decode("ascii")


def _ws_handshake(conn: socket.socket) -> Optional[bytes]:
    """Answer the HTTP upgrade; returns bytes received past the request
    headers (an eager client's first frames), or None on a bad request."""
    data = b""
    while b"\r\n\r\n" not in data:
        chunk = conn.recv(4096)
        if not chunk or len(data) > 16384:
            return None
        data += chunk
    head, rest = data.split(b"\r\n\r\n", 1)
    lines = head.decode("latin-1").split("\r\n")
    if not lines or not lines[0].startswith("GET "):
        return None
    headers = {}
    for line in lines[1:]:
        if ":" in line:
            name, value = line.split(":", 1)
            headers[name.strip().lower()] = value.strip()
    key = headers.get("sec-websocket-key")
    if key is None or "websocket" not in headers.get("upgrade", "").lower():
        return None
    conn.sendall((
        "HTTP/1.1 101 Switching Protocols\r\n"
        "Upgrade: websocket\r\n"
        "Connection: Upgrade\r\n"
        f"Sec-WebSocket-Accept: {ws_accept_value(key)}\r\n\r\n"
    ).encode("ascii"))
    return rest


class _WsConn:
    """Frame-level wrapper over an upgraded socket."""

    def __init__(self, conn: socket.socket, leftover: bytes):
        self.conn = conn
        self._buf = bytearray(leftover)
        self._send_lock = threading.Lock()

    def _read_exact(self, n: int) -> Optional[bytes]:
        while len(self._buf) < n:
            chunk = self.conn.recv(4096)
            if not chunk:
                return None
            self._buf.extend(chunk)
        out, self._buf = bytes(self._buf[:n]), self._buf[n:]
        return out

    def recv_message(self) -> Optional[tuple]:
        """Next complete message as (opcode, payload); None when the peer
        hangs up. Fragmented messages are reassembled."""
        opcode = None
        payload = bytearray()
        while True:
            head = self._read_exact(2)
            if head is None:
                return None
            fin = bool(head[0] & 0x80)
            op = head[0] & 0x0F
            masked = bool(head[1] & 0x80)
            length = head[1] & 0x7F
            if length == 126:
                ext = self._read_exact(2)
                if ext is None:
                    return None
                length = struct.unpack(">H", ext)[0]
            elif length == 127:
                ext = self._read_exact(8)
                if ext is None:
                    return None
                length = struct.unpack(">Q", ext)[0]
            if not masked:
                # clients must mask; treat violation as a hang-up
                return None
            mask = self._read_exact(4)
            body = self._read_exact(length) if mask is not None else None
            if body is None:
                return None
            data = bytes(b ^ mask[i & 3] for i, b in enumerate(body))
            if op in (0x9, 0xA, 0x8):   # control frames never fragment
                return op, data
            if op in (0x1, 0x2):
                opcode = op
                payload.extend(data)
            elif op == 0x0 and opcode is not None:
                payload.extend(data)
            else:
                return None
            if fin and opcode is not None:
                return opcode, bytes(payload)

    def send_message(self, payload: bytes, opcode: int = 0x2):
        head = bytearray([0x80 | opcode])
        n = len(payload)
        if n < 126:
            head.append(n)
        elif n < 1 << 16:
            head.append(126)
            head += struct.pack(">H", n)
        else:
            head.append(127)
            head += struct.pack(">Q", n)
        with self._send_lock:
            self.conn.sendall(bytes(head) + payload)


class TeleopService:
    """The robot end of the wire: one stack, three listening sockets.

    start() binds and spawns the socket threads; serve() runs the
    control loop paced to the wall clock until `duration` sim seconds
    elapse (forever when None); stop() shuts everything down. Ports set
    to 0 in the config come back OS-assigned via the *_port attributes.
    """

    def __init__(self, config: StackConfig, spec: ScenarioSpec,
                 bind: Optional[str] = None, seed: int = 0):
        self.config = config
        self.spec = spec
        self.bind = resolve_bind(config.network, bind)
        self.stack = TeleopStack(config, spec.environment, seed=seed)
        self.stack.sim.body.q_v[:] = spec.start_base
        self.scene_frame = encode(SceneMsg(scene=build_scene(spec, config)))
        self.mailbox = Mailbox()
        self._subs: List[Subscriber] = []
        self._subs_lock = threading.Lock()
        self._stop = threading.Event()
        self._threads: List[threading.Thread] = []
        self._udp: Optional[socket.socket] = None
        self._tcp: Optional[socket.socket] = None
        self._web: Optional[socket.socket] = None
        self.command_port = config.network.command_port
        self.telemetry_port = config.network.telemetry_port
        self.web_port = config.network.web_port

    # -- lifecycle ----------------------------------------------------------

    def start(self):
        self._udp = socket.socket(socket.AF_INET, socket.SOCK_DGRAM)
        self._udp.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
        self._udp.bind((self.bind, self.command_port))
        self._udp.settimeout(0.25)
        self.command_port = self._udp.getsockname()[1]

        self._tcp = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
        self._tcp.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
        self._tcp.bind((self.bind, self.telemetry_port))
        self._tcp.listen(8)
        self._tcp.settimeout(0.25)
        self.telemetry_port = self._tcp.getsockname()[1]

        self._web = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
        self._web.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
        self._web.bind((self.bind, self.web_port))
        self._web.listen(8)
        self._web.settimeout(0.25)
        self.web_port = self._web.getsockname()[1]

        for fn in (self._udp_loop, self._tcp_accept_loop, self._web_accept_loop):
            t = threading.Thread(target=fn, daemon=True)
            t.start()
            self._threads.append(t)
        logger.info("listening on %s: udp %d, tcp %d, ws %d",
                    self.bind, self.command_port, self.telemetry_port,
                    self.web_port)

    def serve(self, duration: Optional[float] = None):
        """Pace the stack against the wall clock and fan out telemetry."""
        t0 = time.monotonic() - self.stack.clock
        until = None if duration is None else self.stack.clock + duration
        while not self._stop.is_set():
            if until is not None and self.stack.clock >= until:
                break
            msg = self.mailbox.take()
            if msg is not None:
                self.stack.submit(msg)
            frame = self.stack.step()
            if frame is not None:
                self._fan_out(encode(frame))
            delay = t0 + self.stack.clock - time.monotonic()
            if delay > 0:
                time.sleep(delay)

    def stop(self):
        self._stop.set()
        for sock in (self._udp, self._tcp, self._web):
            if sock is not None:
                sock.close()
        for t in self._threads:
            t.join(timeout=2.0)

    # -- fan-out ------------------------------------------------------------

    def _fan_out(self, frame: bytes):
        with self._subs_lock:
            subs = list(self._subs)
        for sub in subs:
            if sub.closed:
                with self._subs_lock:
                    if sub in self._subs:
                        self._subs.remove(sub)
            else:
                sub.offer(frame)

    def _subscribe(self) -> Subscriber:
        sub = Subscriber()
        with self._subs_lock:
            self._subs.append(sub)
        return sub

    # -- socket threads -----------------------------------------------------

    def _udp_loop(self):
        while not self._stop.is_set():
            try:
                data, _ = self._udp.recvfrom(MAX_DATAGRAM)
            except socket.timeout:
                continue
            except OSError:
                return
            self._ingest(data, FrameReader())

    def _ingest(self, data: bytes, reader: FrameReader) -> bool:
        """Feed received bytes through; False means the stream is broken
        and a stream transport should drop the connection."""
        try:
            for msg in reader.feed(data):
                if isinstance(msg, InterfaceMsg):
                    self.mailbox.store(msg)
        except MalformedFrame as e:
            logger.warning("dropping malformed input: %s", e)
            return False
        return True

    def _tcp_accept_loop(self):
        while not self._stop.is_set():
            try:
                conn, addr = self._tcp.accept()
            except socket.timeout:
                continue
            except OSError:
                return
            logger.info("telemetry client %s connected", addr)
            threading.Thread(target=self._tcp_client, args=(conn,),
                             daemon=True).start()

    def _tcp_client(self, conn: socket.socket):
        sub = self._subscribe()
        reader = FrameReader()
        conn.settimeout(0.25)

        def receive():
            while not self._stop.is_set() and not sub.closed:
                try:
                    data = conn.recv(4096)
                except socket.timeout:
                    continue
                except OSError:
                    break
                if not data:
                    break
                if not self._ingest(data, reader):
                    break
            sub.closed = True

        threading.Thread(target=receive, daemon=True).start()
        try:
            conn.sendall(self.scene_frame)
            while not self._stop.is_set() and not sub.closed:
                frame = sub.get(timeout=0.25)
                if frame is not None:
                    conn.sendall(frame)
        except OSError:
            pass
        finally:
            sub.closed = True
            conn.close()

    def _web_accept_loop(self):
        while not self._stop.is_set():
            try:
                conn, addr = self._web.accept()
            except socket.timeout:
                continue
            except OSError:
                return
            logger.info("websocket client %s connected", addr)
            threading.Thread(target=self._web_client, args=(conn,),
                             daemon=True).start()

    def _web_client(self, conn: socket.socket):
        conn.settimeout(5.0)
        try:
            leftover = _ws_handshake(conn)
        except OSError:
            conn.close()
            return
        if leftover is None:
            conn.close()
            return
        ws = _WsConn(conn, leftover)
        sub = self._subscribe()
        reader = FrameReader()

        def receive():
            conn.settimeout(0.5)
            while not self._stop.is_set() and not sub.closed:
                try:
                    msg = ws.recv_message()
                except socket.timeout:
                    continue
                except OSError:
                    break
                if msg is None:
                    break
                opcode, payload = msg
                if opcode == 0x8:        # close: acknowledge and drop
                    try:
                        ws.send_message(payload, opcode=0x8)
                    except OSError:
                        pass
                    break
                if opcode == 0x9:        # ping
                    try:
                        ws.send_message(payload, opcode=0xA)
                    except OSError:
                        break
                    continue
                if opcode == 0xA:
                    continue
                if not self._ingest(payload, reader):
                    break
            sub.closed = True

        threading.Thread(target=receive, daemon=True).start()
        try:
            ws.send_message(self.scene_frame)
            while not self._stop.is_set() and not sub.closed:
                frame = sub.get(timeout=0.25)
                if frame is not None:
                    ws.send_message(frame)
        except OSError:
            pass
        finally:
            sub.closed = True
            conn.close()


class LiveSource:
    """Interface frames from the UDP command socket, paced to wall time.

    Makes a trial interactive: datagrams drive the stack while each fresh
    telemetry frame is echoed back to the last sender, so a remote client
    sees the robot it is driving. One datagram carries one wire frame.
    """

    name = "live"

    def __init__(self, network: NetworkConfig, bind: Optional[str] = None):
        self._sock = socket.socket(socket.AF_INET, socket.SOCK_DGRAM)
        self._sock.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
        self._sock.bind((resolve_bind(network, bind), network.command_port))
        self._sock.setblocking(False)
        self.port = self._sock.getsockname()[1]
        self._peer = None
        self._t0: Optional[float] = None
        self._echoed: Optional[float] = None

    def poll(self, clock: float, telemetry: Optional[TelemetryMsg]) -> Optional[InterfaceMsg]:
        if self._t0 is None:
            self._t0 = time.monotonic() - clock
        delay = self._t0 + clock - time.monotonic()
        if delay > 0:
            time.sleep(delay)
        if (telemetry is not None and self._peer is not None
                and telemetry.clock != self._echoed):
            try:
                self._sock.sendto(encode(telemetry), self._peer)
                self._echoed = telemetry.clock
            except OSError:
                pass
        newest = None
        while True:
            try:
                data, addr = self._sock.recvfrom(MAX_DATAGRAM)
            except (BlockingIOError, OSError):
                break
            try:
                msg = decode(data)
            except MalformedFrame as e:
                logger.warning("dropping malformed datagram: %s", e)
                continue
            if isinstance(msg, InterfaceMsg):
                newest, self._peer = msg, addr
        return newest

    def close(self):
        self._sock.close()
