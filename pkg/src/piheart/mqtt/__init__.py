"""Minimal MQTT 3.1.1 stack: wire codec, broker, client. QoS 0 only."""

from piheart.mqtt.broker import MqttBroker
from piheart.mqtt.client import (
    ConnectError,
    MqttClient,
    NotConnectedError,
    SessionError,
    SubscribeError,
)
from piheart.mqtt.codec import (
    Connack,
    Connect,
    Disconnect,
    EncodeError,
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
from piheart.mqtt.topics import filter_valid, topic_matches, topic_valid

__all__ = [
    "Connack",
    "Connect",
    "ConnectError",
    "Disconnect",
    "EncodeError",
    "MqttBroker",
    "MqttClient",
    "NotConnectedError",
    "Packet",
    "Pingreq",
    "Pingresp",
    "ProtocolError",
    "Publish",
    "SessionError",
    "Suback",
    "Subscribe",
    "SubscribeError",
    "decode_packet",
    "encode_packet",
    "filter_valid",
    "topic_matches",
    "topic_valid",
]
