import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from piheart.mqtt.codec import (
    Connack,
    Connect,
    Disconnect,
    EncodeError,
    Pingreq,
    Pingresp,
    ProtocolError,
    Publish,
    Suback,
    Subscribe,
    decode_packet,
    encode_packet,
    encode_varint,
)
from piheart.mqtt.topics import topic_matches

from topic_cases import MATCHING_CASES


def roundtrip(packet):
    data = encode_packet(packet)
    decoded = decode_packet(data)
    assert decoded is not None
    got, consumed = decoded
    assert consumed == len(data)
    assert got == packet
    # byte-level identity too
    assert encode_packet(got) == data
    return got


class TestKnownVectors:
    def test_pingreq_is_c0_00(self):
        assert encode_packet(Pingreq()) == b"\xc0\x00"
        assert decode_packet(b"\xc0\x00") == (Pingreq(), 2)

    def test_pingresp_disconnect(self):
        assert encode_packet(Pingresp()) == b"\xd0\x00"
        assert encode_packet(Disconnect()) == b"\xe0\x00"

    def test_varint_vectors(self):
        assert encode_varint(0) == b"\x00"
        assert encode_varint(321) == b"\xc1\x02"  # 321 = 65 + 2*128
        assert encode_varint(127) == b"\x7f"
        assert encode_varint(128) == b"\x80\x01"
        assert encode_varint(16_383) == b"\xff\x7f"
        assert encode_varint(268_435_455) == b"\xff\xff\xff\x7f"
        with pytest.raises(EncodeError):
            encode_varint(268_435_456)

    def test_minimal_publish_bytes(self):
        # PUBLISH 'a/b' payload 'hi': 30 07 00 03 a/b hi
        data = encode_packet(Publish("a/b", b"hi"))
        assert data == b"\x30\x07\x00\x03a/bhi"
        retained = encode_packet(Publish("a/b", b"hi", retain=True))
        assert retained[0] == 0x31

    def test_connack_bytes(self):
        assert encode_packet(Connack(False, 0)) == b"\x20\x02\x00\x00"
        assert encode_packet(Connack(True, 5)) == b"\x20\x02\x01\x05"


class TestDecodeTotality:
    def test_truncated_publish_needs_more(self):
        data = encode_packet(Publish("sensor/hr", b"x" * 50))
        for cut in range(len(data)):
            assert decode_packet(data[:cut]) is None

    def test_empty_input_needs_more(self):
        assert decode_packet(b"") is None

    def test_remaining_length_overflow(self):
        with pytest.raises(ProtocolError, match="remaining length"):
            decode_packet(b"\x30\xff\xff\xff\xff\xff")

    def test_non_minimal_varint_rejected(self):
        with pytest.raises(ProtocolError, match="non-minimal"):
            decode_packet(b"\xc0\x80\x00")

    def test_unknown_packet_type(self):
        for first in (0x00, 0x40, 0x50, 0x60, 0x70, 0xA0, 0xB0, 0xF0):
            with pytest.raises(ProtocolError):
                decode_packet(bytes([first, 0x00]))

    def test_bad_flags(self):
        with pytest.raises(ProtocolError):
            decode_packet(b"\xc1\x00")  # PINGREQ with flags
        with pytest.raises(ProtocolError):
            decode_packet(b"\x80\x00")  # SUBSCRIBE without 0b0010 flags

    def test_qos_rejected(self):
        with pytest.raises(ProtocolError, match="QoS"):
            decode_packet(b"\x32\x05\x00\x03a/b")

    def test_non_utf8_topic(self):
        bad = b"\x30\x05\x00\x03\xff\xfe\xfd"
        with pytest.raises(ProtocolError, match="UTF-8"):
            decode_packet(bad)

    def test_fuzz_random_bytes_never_crash(self):
        rng = np.random.default_rng(1234)
        outcomes = {"packet": 0, "more": 0, "error": 0}
        for _ in range(20_000):
            blob = rng.integers(0, 256, size=int(rng.integers(0, 40))).astype(np.uint8).tobytes()
            try:
                outcomes["packet" if decode_packet(blob) else "more"] += 1
            except ProtocolError:
                outcomes["error"] += 1
        assert outcomes["error"] > 0 and outcomes["more"] > 0

    def test_fuzz_mutated_valid_packets(self):
        rng = np.random.default_rng(99)
        base = encode_packet(Publish("piheart/dev1/hr", b'{"bpm": 72}'))
        for _ in range(5_000):
            blob = bytearray(base)
            for _ in range(int(rng.integers(1, 4))):
                blob[int(rng.integers(0, len(blob)))] = int(rng.integers(0, 256))
            try:
                decode_packet(bytes(blob))
            except ProtocolError:
                pass


topics = st.text(
    alphabet=st.characters(min_codepoint=0x20, max_codepoint=0x7E, exclude_characters="+#"),
    min_size=1,
    max_size=40,
)
payloads = st.binary(max_size=200)
packet_ids = st.integers(min_value=1, max_value=65535)
filters = st.one_of(
    topics,
    st.just("piheart/+/hr"),
    st.just("piheart/#"),
    st.just("+"),
    st.just("#"),
)

packets = st.one_of(
    st.builds(
        Connect,
        client_id=st.text(
            alphabet=st.characters(min_codepoint=0x20, max_codepoint=0x7E), max_size=20
        ),
        keep_alive_s=st.integers(min_value=0, max_value=65535),
        clean_session=st.booleans(),
    ),
    st.builds(Connack, session_present=st.booleans(), return_code=st.integers(0, 5)),
    st.builds(Publish, topic=topics, payload=payloads, retain=st.booleans()),
    st.builds(
        Subscribe,
        packet_id=packet_ids,
        filters=st.lists(st.tuples(filters, st.sampled_from([0, 1, 2])), min_size=1, max_size=5).map(
            tuple
        ),
    ),
    st.builds(
        Suback,
        packet_id=packet_ids,
        return_codes=st.lists(st.sampled_from([0, 1, 2, 0x80]), min_size=1, max_size=5).map(tuple),
    ),
    st.just(Pingreq()),
    st.just(Pingresp()),
    st.just(Disconnect()),
)


class TestRoundTrip:
    @settings(max_examples=400, deadline=None)
    @given(packets)
    def test_decode_encode_identity(self, packet):
        roundtrip(packet)

    @settings(max_examples=200, deadline=None)
    @given(packets, packets, st.integers(0, 20))
    def test_streaming_two_packets_with_partial_tail(self, p1, p2, cut):
        stream = encode_packet(p1) + encode_packet(p2)
        got1, used1 = decode_packet(stream)
        assert got1 == p1
        got2, used2 = decode_packet(stream, offset=used1)
        assert got2 == p2
        assert used1 + used2 == len(stream)
        partial = stream[: max(0, len(stream) - cut - 1)]
        first = decode_packet(partial)
        if first is not None:
            assert first[0] == p1


class TestEncodeValidation:
    def test_publish_topic_rules(self):
        with pytest.raises(EncodeError):
            encode_packet(Publish("", b""))
        with pytest.raises(EncodeError):
            encode_packet(Publish("a/+/b", b""))
        with pytest.raises(EncodeError):
            encode_packet(Publish("a/#", b""))

    def test_payload_cap(self):
        with pytest.raises(EncodeError):
            encode_packet(Publish("t", b"x" * (256 * 1024 + 1)))
        encode_packet(Publish("t", b"x" * 1024, retain=False), max_payload=2048)
        with pytest.raises(EncodeError):
            encode_packet(Publish("t", b"x" * 1024), max_payload=512)

    def test_subscribe_needs_filters(self):
        with pytest.raises(EncodeError):
            encode_packet(Subscribe(packet_id=1, filters=()))


class TestTopicMatching:
    @pytest.mark.parametrize("filt,topic,expected", MATCHING_CASES)
    def test_matching_table(self, filt, topic, expected):
        assert topic_matches(filt, topic) is expected
