"""Threaded MQTT 3.1.1 client for the QoS-0 subset.

Blocking connect/subscribe handshakes, a reader thread that dispatches
PUBLISH packets to subscription callbacks in arrival order, and automatic
PINGREQ within each keep-alive interval. No automatic reconnect: a broken
session surfaces through on_session_error and stays broken until the owner
decides otherwise.
"""

from __future__ import annotations

import socket
import threading
import time
from typing import Callable

from piheart.mqtt.codec import (
    DEFAULT_MAX_PAYLOAD,
    Connack,
    Connect,
    Disconnect,
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

SUBACK_FAILURE = 0x80

MessageCallback = Callable[[str, bytes], None]


class ConnectError(ConnectionError):
    """Broker unreachable or refused the handshake."""


class NotConnectedError(RuntimeError):
    """publish/subscribe attempted before the CONNECT handshake finished."""


class SubscribeError(RuntimeError):
    """Broker rejected the subscription (SUBACK failure code)."""


class SessionError(RuntimeError):
    """Connection died mid-session."""


class MqttClient:
    """One broker connection. Shareable across threads; callbacks run on the
    receive thread and must not block."""

    def __init__(
        self,
        host: str,
        port: int,
        client_id: str,
        keep_alive_s: int = 60,
        max_payload: int = DEFAULT_MAX_PAYLOAD,
    ):
        self.host = host
        self.port = port
        self.client_id = client_id
        self.keep_alive_s = keep_alive_s
        self.max_payload = max_payload
        self.on_session_error: Callable[[Exception], None] | None = None
        self._sock: socket.socket | None = None
        self._connected = False
        self._closing = False
        self._send_lock = threading.Lock()
        self._last_send = 0.0
        self._subscriptions: list[tuple[str, MessageCallback]] = []
        self._subs_lock = threading.Lock()
        self._reader: threading.Thread | None = None
        self._pinger: threading.Thread | None = None
        self._connack: Connack | None = None
        self._connack_event = threading.Event()
        self._suback_waiters: dict[int, tuple[threading.Event, list[Suback]]] = {}
        self._next_packet_id = 0
        self._error: Exception | None = None

    # -- lifecycle ---------------------------------------------------------

    @property
    def connected(self) -> bool:
        return self._connected

    def connect(self, timeout: float = 5.0) -> "MqttClient":
        if self._connected:
            return self
        try:
            sock = socket.create_connection((self.host, self.port), timeout=timeout)
        except OSError as exc:
            raise ConnectError(f"cannot reach broker {self.host}:{self.port}: {exc}") from exc
        sock.setsockopt(socket.IPPROTO_TCP, socket.TCP_NODELAY, 1)
        sock.settimeout(None)
        self._sock = sock
        self._closing = False
        self._connack_event.clear()
        self._reader = threading.Thread(
            target=self._read_loop, name=f"mqtt-client-{self.client_id}", daemon=True
        )
        self._reader.start()
        self._send(Connect(self.client_id, self.keep_alive_s, clean_session=True))
        if not self._connack_event.wait(timeout):
            self.disconnect()
            raise ConnectError("timed out waiting for CONNACK")
        assert self._connack is not None
        if self._connack.return_code != 0:
            self.disconnect()
            raise ConnectError(f"broker refused connection (code {self._connack.return_code})")
        self._connected = True
        if self.keep_alive_s > 0:
            self._pinger = threading.Thread(
                target=self._ping_loop, name=f"mqtt-ping-{self.client_id}", daemon=True
            )
            self._pinger.start()
        return self

    def disconnect(self) -> None:
        self._closing = True
        if self._connected and self._sock is not None:
            try:
                self._send(Disconnect())
            except (OSError, NotConnectedError, SessionError):
                pass
        self._connected = False
        if self._sock is not None:
            _shutdown_close(self._sock)
        if self._reader is not None and self._reader is not threading.current_thread():
            self._reader.join(timeout=2.0)

    def __enter__(self) -> "MqttClient":
        return self.connect()

    def __exit__(self, *exc) -> None:
        self.disconnect()

    # -- operations ----------------------------------------------------------

    def publish(self, topic: str, payload: bytes | str, retain: bool = False) -> None:
        if isinstance(payload, str):
            payload = payload.encode("utf-8")
        if not self._connected:
            raise NotConnectedError("publish before CONNACK")
        self._send(Publish(topic, payload, retain=retain))

    def subscribe(self, filt: str, callback: MessageCallback, timeout: float = 5.0) -> None:
        if not self._connected:
            raise NotConnectedError("subscribe before CONNACK")
        if not filter_valid(filt):
            raise SubscribeError(f"invalid topic filter {filt!r}")
        with self._send_lock:
            self._next_packet_id = self._next_packet_id % 65535 + 1
            packet_id = self._next_packet_id
        event = threading.Event()
        slot: list[Suback] = []
        self._suback_waiters[packet_id] = (event, slot)
        try:
            self._send(Subscribe(packet_id, ((filt, 0),)))
            if not event.wait(timeout):
                raise SubscribeError(f"no SUBACK for {filt!r} within {timeout}s")
        finally:
            self._suback_waiters.pop(packet_id, None)
        if slot[0].return_codes[0] == SUBACK_FAILURE:
            raise SubscribeError(f"broker rejected filter {filt!r}")
        with self._subs_lock:
            self._subscriptions.append((filt, callback))

    # -- internals -----------------------------------------------------------

    def _send(self, packet) -> None:
        sock = self._sock
        if sock is None:
            raise NotConnectedError("not connected")
        if self._error is not None:
            raise SessionError(str(self._error))
        data = encode_packet(packet, self.max_payload)
        try:
            with self._send_lock:
                sock.sendall(data)
                self._last_send = time.monotonic()
        except OSError as exc:
            self._fail(SessionError(f"send failed: {exc}"))
            raise SessionError(f"send failed: {exc}") from exc

    def _ping_loop(self) -> None:
        interval = self.keep_alive_s * 0.5
        while self._connected and not self._closing:
            time.sleep(min(interval / 4.0, 0.5))
            if time.monotonic() - self._last_send >= interval:
                try:
                    self._send(Pingreq())
                except (SessionError, NotConnectedError, OSError):
                    return

    def _read_loop(self) -> None:
        sock = self._sock
        assert sock is not None
        buffer = bytearray()
        offset = 0
        try:
            while not self._closing:
                parsed = decode_packet(buffer, offset, max_remaining_length=self.max_payload + 1024)
                if parsed is None:
                    chunk = sock.recv(65536)
                    if not chunk:
                        raise SessionError("connection closed by broker")
                    buffer += chunk
                    continue
                packet, used = parsed
                offset += used
                if offset > 8192 or offset == len(buffer):
                    del buffer[:offset]
                    offset = 0
                self._dispatch(packet)
        except (OSError, ProtocolError, SessionError) as exc:
            if not self._closing:
                self._fail(exc if isinstance(exc, SessionError) else SessionError(str(exc)))

    def _dispatch(self, packet) -> None:
        if isinstance(packet, Publish):
            with self._subs_lock:
                matching = [cb for filt, cb in self._subscriptions if topic_matches(filt, packet.topic)]
            for callback in matching:
                callback(packet.topic, packet.payload)
        elif isinstance(packet, Connack):
            self._connack = packet
            self._connack_event.set()
        elif isinstance(packet, Suback):
            waiter = self._suback_waiters.get(packet.packet_id)
            if waiter is not None:
                event, slot = waiter
                slot.append(packet)
                event.set()
        elif isinstance(packet, Pingresp):
            pass
        else:
            raise ProtocolError(f"unexpected {type(packet).__name__} from broker")

    def _fail(self, exc: Exception) -> None:
        already_failed = self._error is not None
        self._error = exc
        was_connected = self._connected
        self._connected = False
        if self._sock is not None:
            _shutdown_close(self._sock)
        if was_connected and not already_failed and self.on_session_error is not None:
            self.on_session_error(exc)


def _shutdown_close(sock: socket.socket) -> None:
    """shutdown before close so a thread blocked in recv on this socket wakes
    up and the peer sees FIN immediately."""
    try:
        sock.shutdown(socket.SHUT_RDWR)
    except OSError:
        pass
    try:
        sock.close()
    except OSError:
        pass
