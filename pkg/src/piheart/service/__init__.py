"""Operator-facing FastAPI service: REST session control plus the WebSocket
bridge the console connects to."""

from piheart.service.app import BridgeHandle, bridge_serve, create_app
from piheart.service.manager import SessionManager

__all__ = ["BridgeHandle", "SessionManager", "bridge_serve", "create_app"]
