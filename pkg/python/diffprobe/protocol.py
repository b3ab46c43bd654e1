"""
Newline-delimited JSON protocol between the harness and game subprocesses

One compact JSON object per line:

    {"type": "state", "protocol_version": 1, "payload": {...}}

See PROTOCOL.md for the message flow and payload schemas. Unknown extra
fields are ignored.
"""

import json
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional

from .errors import DiffProbeError

PROTOCOL_VERSION = 1

MESSAGE_TYPES = ("hello", "state", "action", "result", "error")
RESULT_OUTCOMES = ("Win", "Loss")


class ProtocolError(DiffProbeError):
    """Base class for adapter protocol failures"""
    pass


class SchemaError(ProtocolError):
    """Raised when a line is not a valid protocol message"""

    def __init__(self, message: str, line: str = ""):
        self.line = line
        shown = line if len(line) <= 200 else line[:200] + "..."
        super().__init__(f"{message}: {shown!r}" if line else message)


class HandshakeTimeout(ProtocolError):
    pass


class ReadTimeout(ProtocolError):
    pass


class TurnLimitExceeded(ProtocolError):
    pass


class SubprocessCrash(ProtocolError):
    def __init__(self, message: str, returncode: Optional[int] = None):
        self.returncode = returncode
        super().__init__(message)


@dataclass(frozen=True)
class ProtocolMessage:
    type: str
    payload: Dict[str, Any] = field(default_factory=dict)
    protocol_version: int = PROTOCOL_VERSION

    def to_dict(self) -> dict:
        return {"type": self.type, "protocol_version": self.protocol_version, "payload": self.payload}


# ============================================================
# Constructors
# ============================================================

def hello(**payload) -> ProtocolMessage:
    return ProtocolMessage("hello", dict(payload))


def state(
    turn: int,
    state_text: str,
    terminal: bool = False,
    challenge_id: Optional[str] = None,
    structured_state: Optional[dict] = None,
    legal_actions: Optional[List[str]] = None,
    metrics: Optional[Dict[str, float]] = None,
) -> ProtocolMessage:
    payload = {"turn": turn, "state_text": state_text, "terminal": terminal}
    if challenge_id is not None:
        payload["challenge_id"] = challenge_id
    if structured_state is not None:
        payload["structured_state"] = structured_state
    if legal_actions is not None:
        payload["legal_actions"] = list(legal_actions)
    if metrics is not None:
        payload["metrics"] = dict(metrics)
    return ProtocolMessage("state", payload)


def action(action_text: str) -> ProtocolMessage:
    return ProtocolMessage("action", {"action_text": action_text})


def result(outcome: str, metrics: Dict[str, float], flags: Optional[List[str]] = None) -> ProtocolMessage:
    payload = {"outcome": outcome, "metrics": dict(metrics)}
    if flags:
        payload["flags"] = list(flags)
    return ProtocolMessage("result", payload)


def error(message: str) -> ProtocolMessage:
    return ProtocolMessage("error", {"message": message})


# ============================================================
# Codec
# ============================================================

def encode(msg: ProtocolMessage) -> str:
    """One line of compact JSON, newline-terminated"""
    return json.dumps(msg.to_dict(), separators=(",", ":"), ensure_ascii=False) + "\n"


def _require(payload: dict, name: str, types, line: str):
    if name not in payload:
        raise SchemaError(f"missing field '{name}'", line)
    value = payload[name]
    # bool is an int subclass
    if not isinstance(value, types) or (isinstance(value, bool) and types is not bool):
        raise SchemaError(f"field '{name}' has the wrong type", line)
    return value


def _is_scalar(value) -> bool:
    return isinstance(value, (int, float))


def decode(line: str) -> ProtocolMessage:
    """
    Parse and validate one line

    Raises:
        SchemaError: not JSON, not an object, unknown type, missing or
            mistyped field
    """
    text = line.strip()
    try:
        data = json.loads(text)
    except ValueError:
        raise SchemaError("not valid JSON", text) from None
    if not isinstance(data, dict):
        raise SchemaError("message must be a JSON object", text)

    msg_type = data.get("type")
    if msg_type not in MESSAGE_TYPES:
        raise SchemaError(f"unknown message type {msg_type!r}", text)
    version = _require(data, "protocol_version", int, text)
    payload = data.get("payload", {})
    if not isinstance(payload, dict):
        raise SchemaError("payload must be an object", text)

    if msg_type == "state":
        _require(payload, "turn", int, text)
        _require(payload, "state_text", str, text)
        _require(payload, "terminal", bool, text)
        if not isinstance(payload.get("structured_state", {}), dict):
            raise SchemaError("structured_state must be an object", text)
        legal = payload.get("legal_actions")
        if legal is not None and (not isinstance(legal, list) or not all(isinstance(a, str) for a in legal)):
            raise SchemaError("legal_actions must be a list of strings", text)
        _check_metrics(payload.get("metrics", {}), text)
    elif msg_type == "action":
        _require(payload, "action_text", str, text)
    elif msg_type == "result":
        outcome = _require(payload, "outcome", str, text)
        if outcome not in RESULT_OUTCOMES:
            raise SchemaError(f"result outcome must be one of {RESULT_OUTCOMES}", text)
        _check_metrics(payload.get("metrics", {}), text)
    elif msg_type == "error":
        _require(payload, "message", str, text)

    return ProtocolMessage(msg_type, payload, version)


def _check_metrics(metrics, line: str) -> None:
    if not isinstance(metrics, dict) or not all(_is_scalar(v) for v in metrics.values()):
        raise SchemaError("metrics must map names to numbers", line)
