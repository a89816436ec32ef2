"""MQTT 3.1.1 packet codec for the QoS-0 subset.

Eight control packets: CONNECT, CONNACK, PUBLISH, SUBSCRIBE, SUBACK,
PINGREQ, PINGRESP, DISCONNECT. encode(decode(bytes)) == bytes for every
well-formed input in this dialect, and decode is total: arbitrary bytes
either yield a packet, a needs-more-data signal (None), or ProtocolError.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Union

from piheart.mqtt.topics import topic_valid

# Fixed-header packet types (MQTT 3.1.1 table 2.1)
TYPE_CONNECT = 1
TYPE_CONNACK = 2
TYPE_PUBLISH = 3
TYPE_SUBSCRIBE = 8
TYPE_SUBACK = 9
TYPE_PINGREQ = 12
TYPE_PINGRESP = 13
TYPE_DISCONNECT = 14

PROTOCOL_NAME = b"MQTT"
PROTOCOL_LEVEL = 4

MAX_REMAINING_LENGTH = 268_435_455  # 4 varint bytes
DEFAULT_MAX_PAYLOAD = 256 * 1024

SUBACK_FAILURE = 0x80


class EncodeError(ValueError):
    """Packet is not encodable (bad topic, oversized payload, ...)."""


class ProtocolError(ValueError):
    """Malformed or unsupported bytes; the connection should be closed."""


@dataclass(frozen=True)
class Connect:
    client_id: str = ""
    keep_alive_s: int = 60
    clean_session: bool = True


@dataclass(frozen=True)
class Connack:
    session_present: bool = False
    return_code: int = 0


@dataclass(frozen=True)
class Publish:
    topic: str
    payload: bytes = b""
    retain: bool = False


@dataclass(frozen=True)
class Subscribe:
    packet_id: int
    # (filter, requested qos); we always grant QoS 0 but keep the request
    # byte so decode/encode round-trips foreign subscribes too
    filters: tuple[tuple[str, int], ...] = field(default_factory=tuple)


@dataclass(frozen=True)
class Suback:
    packet_id: int
    return_codes: tuple[int, ...] = field(default_factory=tuple)


@dataclass(frozen=True)
class Pingreq:
    pass


@dataclass(frozen=True)
class Pingresp:
    pass


@dataclass(frozen=True)
class Disconnect:
    pass


Packet = Union[Connect, Connack, Publish, Subscribe, Suback, Pingreq, Pingresp, Disconnect]


def encode_varint(value: int) -> bytes:
    """MQTT remaining-length encoding: 7 bits per byte, high bit continues."""
    if not 0 <= value <= MAX_REMAINING_LENGTH:
        raise EncodeError(f"remaining length {value} out of range")
    out = bytearray()
    while True:
        digit = value % 128
        value //= 128
        if value:
            digit |= 0x80
        out.append(digit)
        if not value:
            return bytes(out)


def _encode_string(s: str) -> bytes:
    data = s.encode("utf-8")
    if len(data) > 65535:
        raise EncodeError("string exceeds 65535 bytes")
    return len(data).to_bytes(2, "big") + data


def _fixed_header(packet_type: int, flags: int, body: bytes) -> bytes:
    return bytes([(packet_type << 4) | flags]) + encode_varint(len(body)) + body


def encode_packet(packet: Packet, max_payload: int = DEFAULT_MAX_PAYLOAD) -> bytes:
    if isinstance(packet, Connect):
        if "\x00" in packet.client_id:
            raise EncodeError("client id contains NUL")
        if not 0 <= packet.keep_alive_s <= 65535:
            raise EncodeError("keep_alive_s out of u16 range")
        flags = 0x02 if packet.clean_session else 0x00
        body = (
            _encode_string("MQTT")
            + bytes([PROTOCOL_LEVEL, flags])
            + packet.keep_alive_s.to_bytes(2, "big")
            + _encode_string(packet.client_id)
        )
        return _fixed_header(TYPE_CONNECT, 0, body)

    if isinstance(packet, Connack):
        if not 0 <= packet.return_code <= 255:
            raise EncodeError("return code out of range")
        return _fixed_header(
            TYPE_CONNACK, 0, bytes([1 if packet.session_present else 0, packet.return_code])
        )

    if isinstance(packet, Publish):
        if not topic_valid(packet.topic):
            raise EncodeError(f"invalid publish topic {packet.topic!r}")
        if len(packet.payload) > max_payload:
            raise EncodeError(f"payload {len(packet.payload)} exceeds max {max_payload}")
        flags = 0x01 if packet.retain else 0x00  # QoS 0, DUP 0
        return _fixed_header(TYPE_PUBLISH, flags, _encode_string(packet.topic) + packet.payload)

    if isinstance(packet, Subscribe):
        if not packet.filters:
            raise EncodeError("subscribe needs at least one filter")
        if not 1 <= packet.packet_id <= 65535:
            raise EncodeError("packet id must be a nonzero u16")
        body = bytearray(packet.packet_id.to_bytes(2, "big"))
        for filt, qos in packet.filters:
            if not filt or "\x00" in filt:
                raise EncodeError(f"invalid filter {filt!r}")
            if qos not in (0, 1, 2):
                raise EncodeError("requested qos must be 0..2")
            body += _encode_string(filt)
            body.append(qos)
        return _fixed_header(TYPE_SUBSCRIBE, 0x02, bytes(body))

    if isinstance(packet, Suback):
        if not 1 <= packet.packet_id <= 65535:
            raise EncodeError("packet id must be a nonzero u16")
        if not packet.return_codes:
            raise EncodeError("suback needs at least one return code")
        for code in packet.return_codes:
            if code not in (0, 1, 2, SUBACK_FAILURE):
                raise EncodeError(f"invalid suback code {code:#x}")
        body = packet.packet_id.to_bytes(2, "big") + bytes(packet.return_codes)
        return _fixed_header(TYPE_SUBACK, 0, body)

    if isinstance(packet, Pingreq):
        return b"\xc0\x00"
    if isinstance(packet, Pingresp):
        return b"\xd0\x00"
    if isinstance(packet, Disconnect):
        return b"\xe0\x00"

    raise EncodeError(f"cannot encode {type(packet).__name__}")


class _BodyReader:
    """Cursor over a complete packet body; underruns are malformed packets."""

    def __init__(self, data: bytes):
        self.data = data
        self.pos = 0

    def u8(self) -> int:
        if self.pos + 1 > len(self.data):
            raise ProtocolError("truncated field")
        v = self.data[self.pos]
        self.pos += 1
        return v

    def u16(self) -> int:
        if self.pos + 2 > len(self.data):
            raise ProtocolError("truncated field")
        v = int.from_bytes(self.data[self.pos : self.pos + 2], "big")
        self.pos += 2
        return v

    def string(self) -> str:
        length = self.u16()
        if self.pos + length > len(self.data):
            raise ProtocolError("truncated string")
        raw = self.data[self.pos : self.pos + length]
        self.pos += length
        try:
            s = bytes(raw).decode("utf-8")
        except UnicodeDecodeError as exc:
            raise ProtocolError("invalid UTF-8 string") from exc
        if "\x00" in s:
            raise ProtocolError("NUL in string")
        return s

    def rest(self) -> bytes:
        out = bytes(self.data[self.pos :])
        self.pos = len(self.data)
        return out

    def done(self) -> bool:
        return self.pos == len(self.data)


def _decode_connect(flags: int, body: _BodyReader) -> Connect:
    if flags != 0:
        raise ProtocolError("CONNECT flags must be 0")
    if body.string() != "MQTT":
        raise ProtocolError("unknown protocol name")
    if body.u8() != PROTOCOL_LEVEL:
        raise ProtocolError("unsupported protocol level")
    connect_flags = body.u8()
    if connect_flags & 0x01:
        raise ProtocolError("CONNECT reserved flag set")
    if connect_flags & 0xFC:
        raise ProtocolError("will/auth flags unsupported in this dialect")
    keep_alive = body.u16()
    client_id = body.string()
    if not body.done():
        raise ProtocolError("trailing bytes after CONNECT")
    return Connect(client_id, keep_alive, bool(connect_flags & 0x02))


def _decode_connack(flags: int, body: _BodyReader) -> Connack:
    if flags != 0:
        raise ProtocolError("CONNACK flags must be 0")
    ack = body.u8()
    if ack & ~0x01:
        raise ProtocolError("CONNACK reserved bits set")
    code = body.u8()
    if not body.done():
        raise ProtocolError("CONNACK body must be 2 bytes")
    return Connack(bool(ack & 0x01), code)


def _decode_publish(flags: int, body: _BodyReader) -> Publish:
    qos = (flags >> 1) & 0x03
    if qos:
        raise ProtocolError("QoS 1/2 unsupported in this dialect")
    if flags & 0x08:
        raise ProtocolError("DUP must be 0 with QoS 0")
    topic = body.string()
    if not topic_valid(topic):
        raise ProtocolError(f"invalid publish topic {topic!r}")
    return Publish(topic, body.rest(), retain=bool(flags & 0x01))


def _decode_subscribe(flags: int, body: _BodyReader) -> Subscribe:
    if flags != 0x02:
        raise ProtocolError("SUBSCRIBE flags must be 0b0010")
    packet_id = body.u16()
    if packet_id == 0:
        raise ProtocolError("packet id must be nonzero")
    filters = []
    while not body.done():
        filt = body.string()
        if not filt:
            raise ProtocolError("empty topic filter")
        qos = body.u8()
        if qos > 2:
            raise ProtocolError("requested qos out of range")
        filters.append((filt, qos))
    if not filters:
        raise ProtocolError("SUBSCRIBE carries no filters")
    return Subscribe(packet_id, tuple(filters))


def _decode_suback(flags: int, body: _BodyReader) -> Suback:
    if flags != 0:
        raise ProtocolError("SUBACK flags must be 0")
    packet_id = body.u16()
    if packet_id == 0:
        raise ProtocolError("packet id must be nonzero")
    codes = tuple(body.rest())
    if not codes:
        raise ProtocolError("SUBACK carries no return codes")
    for code in codes:
        if code not in (0, 1, 2, SUBACK_FAILURE):
            raise ProtocolError(f"invalid suback code {code:#x}")
    return Suback(packet_id, codes)


def _decode_empty(kind: type, flags: int, body: _BodyReader) -> Packet:
    if flags != 0:
        raise ProtocolError(f"{kind.__name__} flags must be 0")
    if not body.done():
        raise ProtocolError(f"{kind.__name__} body must be empty")
    return kind()


def decode_packet(
    data: bytes | bytearray | memoryview,
    offset: int = 0,
    max_remaining_length: int = MAX_REMAINING_LENGTH,
) -> tuple[Packet, int] | None:
    """Decode one packet starting at offset.

    Returns (packet, bytes consumed), or None when more bytes are needed;
    raises ProtocolError for anything malformed.
    """
    n = len(data)
    if offset >= n:
        return None
    first = data[offset]
    packet_type = first >> 4
    flags = first & 0x0F

    # remaining length: 1-4 varint bytes
    remaining = 0
    multiplier = 1
    pos = offset + 1
    nbytes = 0
    for i in range(4):
        if pos >= n:
            return None
        byte = data[pos]
        pos += 1
        nbytes += 1
        remaining += (byte & 0x7F) * multiplier
        multiplier *= 128
        if not byte & 0x80:
            break
        if i == 3:
            raise ProtocolError("remaining length exceeds 4 bytes")
    if nbytes > 1 and remaining < 128 ** (nbytes - 1):
        raise ProtocolError("non-minimal remaining length encoding")
    if remaining > max_remaining_length:
        raise ProtocolError(f"remaining length {remaining} exceeds limit")
    if pos + remaining > n:
        return None

    body = _BodyReader(bytes(data[pos : pos + remaining]))
    consumed = pos + remaining - offset

    if packet_type == TYPE_CONNECT:
        packet: Packet = _decode_connect(flags, body)
    elif packet_type == TYPE_CONNACK:
        packet = _decode_connack(flags, body)
    elif packet_type == TYPE_PUBLISH:
        packet = _decode_publish(flags, body)
    elif packet_type == TYPE_SUBSCRIBE:
        packet = _decode_subscribe(flags, body)
    elif packet_type == TYPE_SUBACK:
        packet = _decode_suback(flags, body)
    elif packet_type == TYPE_PINGREQ:
        packet = _decode_empty(Pingreq, flags, body)
    elif packet_type == TYPE_PINGRESP:
        packet = _decode_empty(Pingresp, flags, body)
    elif packet_type == TYPE_DISCONNECT:
        packet = _decode_empty(Disconnect, flags, body)
    else:
        raise ProtocolError(f"unsupported packet type {packet_type}")
    return packet, consumed
