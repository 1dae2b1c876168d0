"""Wire vocabulary: JSON control frames, binary weight frames, task stage machine."""

from __future__ import annotations

import json
from dataclasses import dataclass, field

from .errors import MalformedFrame, UnknownType

MESSAGE_TYPES = (
    "TaskSubmit",
    "TaskAccepted",
    "TrainRequest",
    "WeightsHeader",
    "LocalUpdateHeader",
    "RoundResult",
    "TaskComplete",
    "DataConfigRequest",
    "DataConfigResponse",
    "ArchAssign",
    "HPOResult",
    "IntentSubmit",
    "IntentResolved",
    "Error",
)


@dataclass(frozen=True)
class WireMessage:
    type: str
    taskId: str = ""
    round: int | None = None
    body: dict = field(default_factory=dict)


@dataclass(frozen=True)
class RoundMetrics:
    round: int
    testAccuracy: float
    testLoss: float
    bytesUp: int
    bytesDown: int
    elapsedSeconds: float
    participants: tuple[str, ...]

    def to_dict(self) -> dict:
        return {
            "round": self.round,
            "testAccuracy": self.testAccuracy,
            "testLoss": self.testLoss,
            "bytesUp": self.bytesUp,
            "bytesDown": self.bytesDown,
            "elapsedSeconds": self.elapsedSeconds,
            "participants": list(self.participants),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "RoundMetrics":
        try:
            return cls(
                round=int(d["round"]),
                testAccuracy=float(d["testAccuracy"]),
                testLoss=float(d["testLoss"]),
                bytesUp=int(d["bytesUp"]),
                bytesDown=int(d["bytesDown"]),
                elapsedSeconds=float(d["elapsedSeconds"]),
                participants=tuple(str(p) for p in d.get("participants", [])),
            )
        except (KeyError, TypeError, ValueError) as e:
            raise MalformedFrame(f"bad round metrics: {e}") from e


def encode(msg: WireMessage) -> str:
    """Control frame as a single JSON text frame."""
    if msg.type not in MESSAGE_TYPES:
        raise UnknownType(msg.type)
    out: dict = {"type": msg.type}
    if msg.taskId:
        out["taskId"] = msg.taskId
    if msg.round is not None:
        out["round"] = msg.round
    if msg.body:
        out["body"] = msg.body
    return json.dumps(out, separators=(",", ":"))


def decode(text: str | bytes) -> WireMessage:
    """Parse a control frame; all malformations raise typed errors, never crash."""
    if isinstance(text, bytes):
        try:
            text = text.decode("utf-8")
        except UnicodeDecodeError as e:
            raise MalformedFrame(f"not UTF-8: {e}") from e
    try:
        raw = json.loads(text)
    except (json.JSONDecodeError, RecursionError) as e:
        raise MalformedFrame(f"not valid JSON: {e}") from e
    if not isinstance(raw, dict):
        raise MalformedFrame("control frame must be a JSON object")
    mtype = raw.get("type")
    if not isinstance(mtype, str) or mtype not in MESSAGE_TYPES:
        raise UnknownType(str(mtype))
    task_id = raw.get("taskId", "")
    if not isinstance(task_id, str):
        raise MalformedFrame("taskId must be a string")
    rnd = raw.get("round")
    if rnd is not None and not isinstance(rnd, int):
        raise MalformedFrame("round must be an integer")
    body = raw.get("body", {})
    if not isinstance(body, dict):
        raise MalformedFrame("body must be an object")
    return WireMessage(type=mtype, taskId=task_id, round=rnd, body=body)


class StageMachine:
    """Per-task message ordering guard.

    Legal flow: TaskSubmit -> TaskAccepted -> (TrainRequest -> LocalUpdateHeader)*
    with RoundResult after each round -> TaskComplete. Anything else is rejected
    and leaves the tracked state untouched.
    """

    _NEXT = {
        "created": {"TaskSubmit"},
        "submitted": {"TaskAccepted", "Error"},
        "running": {
            "TrainRequest",
            "LocalUpdateHeader",
            "RoundResult",
            "TaskComplete",
            "Error",
        },
        "complete": set(),
        "failed": set(),
    }

    def __init__(self):
        self.state = "created"
        self.round = 0

    def accept(self, msg: WireMessage) -> bool:
        """Advance the machine if the message is legal; False otherwise."""
        allowed = self._NEXT[self.state]
        if msg.type not in allowed:
            return False
        if msg.type == "TaskSubmit":
            self.state = "submitted"
        elif msg.type == "TaskAccepted":
            self.state = "running"
        elif msg.type == "RoundResult":
            if msg.round is None or msg.round <= self.round:
                return False  # duplicate or out-of-order round
            self.round = msg.round
        elif msg.type == "TaskComplete":
            self.state = "complete"
        elif msg.type == "Error":
            self.state = "failed"
        return True
