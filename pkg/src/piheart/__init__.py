"""Simulated tangible heart-rate displays.

Synthetic BVP sensing, streaming STFT heart-rate estimation, a minimal
MQTT 3.1.1 stack, simulated device nodes and a session orchestrator that
routes heartbeats between two participants.
"""

__version__ = "0.1.0"
