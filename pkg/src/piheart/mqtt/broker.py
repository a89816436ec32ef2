"""Threaded MQTT 3.1.1 broker for the QoS-0 subset.

One broker runs per simulated device, exactly like the mosquitto instance on
each device in the real deployment; traffic never crosses brokers. Retained
messages are kept so late joiners immediately see the last heart rate.
"""

from __future__ import annotations

import logging
import socket
import threading
from dataclasses import dataclass, field

from piheart.mqtt.codec import (
    DEFAULT_MAX_PAYLOAD,
    Connack,
    Connect,
    Disconnect,
    Packet,
    Pingreq,
    Pingresp,
    ProtocolError,
    Publish,
    Suback,
    Subscribe,
    decode_packet,
    encode_packet,
)
from piheart.mqtt.topics import filter_valid, topic_matches

log = logging.getLogger(__name__)

SUBACK_FAILURE = 0x80
CONNECT_TIMEOUT_S = 10.0
SEND_TIMEOUT_S = 10.0


@dataclass(eq=False)
class _Connection:
    sock: socket.socket
    peer: str
    client_id: str = ""
    keep_alive_s: int = 0
    filters: set[str] = field(default_factory=set)
    write_lock: threading.Lock = field(default_factory=threading.Lock)
    closed: bool = False

    def send_bytes(self, data: bytes) -> bool:
        """Best-effort QoS-0 send; a failing subscriber just gets dropped."""
        try:
            with self.write_lock:
                self.sock.sendall(data)
            return True
        except OSError:
            self.close()
            return False

    def send_packet(self, packet: Packet) -> bool:
        return self.send_bytes(encode_packet(packet))

    def close(self) -> None:
        self.closed = True
        try:
            # shutdown first: close() alone leaves a thread blocked in recv
            # holding the descriptor, so the peer would never see FIN
            self.sock.shutdown(socket.SHUT_RDWR)
        except OSError:
            pass
        try:
            self.sock.close()
        except OSError:
            pass


class MqttBroker:
    """TCP broker: thread per connection, one lock around the routing state.

    Port 0 binds an ephemeral port; read .port after start(). Per-connection
    protocol errors close only that connection. Clients idle longer than
    1.5x their keep-alive are disconnected.
    """

    def __init__(
        self,
        host: str = "127.0.0.1",
        port: int = 0,
        max_clients: int = 64,
        max_payload: int = DEFAULT_MAX_PAYLOAD,
    ):
        self.host = host
        self._requested_port = port
        self.max_clients = max_clients
        self.max_payload = max_payload
        self._server: socket.socket | None = None
        self._accept_thread: threading.Thread | None = None
        self._lock = threading.Lock()
        self._sessions: dict[str, _Connection] = {}
        self._subscriptions: dict[str, set[_Connection]] = {}
        self._retained: dict[str, bytes] = {}
        self._running = False
        self._anon_counter = 0

    # -- lifecycle ---------------------------------------------------------

    def start(self) -> "MqttBroker":
        server = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
        server.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
        server.bind((self.host, self._requested_port))  # OSError if in use
        server.listen(self.max_clients)
        self._server = server
        self._running = True
        self._accept_thread = threading.Thread(
            target=self._accept_loop, name=f"mqtt-broker-{self.port}", daemon=True
        )
        self._accept_thread.start()
        return self

    @property
    def port(self) -> int:
        assert self._server is not None, "broker not started"
        return self._server.getsockname()[1]

    @property
    def address(self) -> tuple[str, int]:
        return (self.host, self.port)

    def stop(self) -> None:
        self._running = False
        if self._server is not None:
            try:
                self._server.shutdown(socket.SHUT_RDWR)
            except OSError:
                pass
            try:
                self._server.close()
            except OSError:
                pass
        with self._lock:
            conns = list(self._sessions.values())
            self._sessions.clear()
            self._subscriptions.clear()
        for conn in conns:
            conn.close()
        if self._accept_thread is not None:
            self._accept_thread.join(timeout=2.0)

    def __enter__(self) -> "MqttBroker":
        return self.start()

    def __exit__(self, *exc) -> None:
        self.stop()

    # -- connection handling -------------------------------------------------

    def _accept_loop(self) -> None:
        assert self._server is not None
        while self._running:
            try:
                sock, addr = self._server.accept()
            except OSError:
                return
            with self._lock:
                active = len(self._sessions)
            if active >= self.max_clients:
                sock.close()
                continue
            sock.setsockopt(socket.IPPROTO_TCP, socket.TCP_NODELAY, 1)
            conn = _Connection(sock=sock, peer=f"{addr[0]}:{addr[1]}")
            threading.Thread(
                target=self._serve_connection, args=(conn,), name=f"mqtt-conn-{addr[1]}", daemon=True
            ).start()

    def _serve_connection(self, conn: _Connection) -> None:
        try:
            self._connection_loop(conn)
        except ProtocolError as exc:
            log.debug("protocol error from %s: %s", conn.peer, exc)
        except OSError:
            pass
        finally:
            self._unregister(conn)
            conn.close()

    def _connection_loop(self, conn: _Connection) -> None:
        buffer = bytearray()
        offset = 0
        connected = False
        # deliveries collected while draining the buffer; flushed as one send
        # per target before blocking in recv again (cuts per-message syscall
        # and GIL churn under load without delaying lone packets)
        pending: dict[_Connection, bytearray] = {}
        pending_bytes = 0
        conn.sock.settimeout(CONNECT_TIMEOUT_S)
        while self._running and not conn.closed:
            parsed = decode_packet(buffer, offset, max_remaining_length=self.max_payload + 1024)
            if parsed is None:
                if pending:
                    self._flush(pending)
                    pending_bytes = 0
                try:
                    chunk = conn.sock.recv(65536)
                except socket.timeout:
                    return  # keep-alive (or CONNECT deadline) expired
                if not chunk:
                    return
                buffer += chunk
                continue
            packet, used = parsed
            offset += used
            if offset == len(buffer) or offset > 1 << 20:
                del buffer[:offset]
                offset = 0

            if not connected:
                if not isinstance(packet, Connect):
                    raise ProtocolError("first packet must be CONNECT")
                self._register(conn, packet)
                connected = True
                timeout = packet.keep_alive_s * 1.5 if packet.keep_alive_s else None
                conn.sock.settimeout(timeout)
                conn.send_packet(Connack(session_present=False, return_code=0))
            elif isinstance(packet, Publish):
                pending_bytes += self._route_publish(packet, pending)
                if pending_bytes > 1 << 20:
                    self._flush(pending)
                    pending_bytes = 0
            else:
                if pending:  # keep per-connection ordering around control packets
                    self._flush(pending)
                    pending_bytes = 0
                if isinstance(packet, Subscribe):
                    self._subscribe(conn, packet)
                elif isinstance(packet, Pingreq):
                    conn.send_packet(Pingresp())
                elif isinstance(packet, Disconnect):
                    return
                elif isinstance(packet, Connect):
                    raise ProtocolError("duplicate CONNECT")
                else:
                    raise ProtocolError(f"unexpected {type(packet).__name__} from client")

    @staticmethod
    def _flush(pending: dict[_Connection, bytearray]) -> None:
        for target, data in pending.items():
            target.send_bytes(bytes(data))
        pending.clear()

    def _register(self, conn: _Connection, packet: Connect) -> None:
        with self._lock:
            client_id = packet.client_id
            if not client_id:
                self._anon_counter += 1
                client_id = f"anon-{self._anon_counter}"
            conn.client_id = client_id
            conn.keep_alive_s = packet.keep_alive_s
            previous = self._sessions.get(client_id)
            self._sessions[client_id] = conn
        if previous is not None:
            previous.close()  # client-id takeover

    def _unregister(self, conn: _Connection) -> None:
        with self._lock:
            if self._sessions.get(conn.client_id) is conn:
                del self._sessions[conn.client_id]
            for filt in conn.filters:
                subs = self._subscriptions.get(filt)
                if subs is not None:
                    subs.discard(conn)
                    if not subs:
                        del self._subscriptions[filt]

    # -- MQTT semantics ------------------------------------------------------

    def _subscribe(self, conn: _Connection, packet: Subscribe) -> None:
        codes = []
        retained_out: list[tuple[str, bytes]] = []
        with self._lock:
            for filt, _requested_qos in packet.filters:
                if not filter_valid(filt):
                    codes.append(SUBACK_FAILURE)
                    continue
                codes.append(0)  # granted QoS 0
                conn.filters.add(filt)
                self._subscriptions.setdefault(filt, set()).add(conn)
                for topic, payload in self._retained.items():
                    if topic_matches(filt, topic):
                        retained_out.append((topic, payload))
        conn.send_packet(Suback(packet.packet_id, tuple(codes)))
        for topic, payload in retained_out:
            conn.send_packet(Publish(topic, payload, retain=True))

    def _route_publish(self, packet: Publish, pending: dict[_Connection, bytearray]) -> int:
        """Queue one delivery per matching live subscription (retain forwarded
        as 0 per MQTT 3.1.1); returns bytes queued."""
        with self._lock:
            if packet.retain:
                if packet.payload:
                    self._retained[packet.topic] = packet.payload
                else:
                    self._retained.pop(packet.topic, None)
            targets = [
                conn
                for filt, conns in self._subscriptions.items()
                if topic_matches(filt, packet.topic)
                for conn in conns
            ]
        if not targets:
            return 0
        data = encode_packet(Publish(packet.topic, packet.payload, retain=False), self.max_payload)
        for conn in targets:
            pending.setdefault(conn, bytearray()).extend(data)
        return len(data) * len(targets)

    # -- introspection (tests/status) ----------------------------------------

    def connection_count(self) -> int:
        with self._lock:
            return len(self._sessions)

    def retained_topics(self) -> list[str]:
        with self._lock:
            return sorted(self._retained)
