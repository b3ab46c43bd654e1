"""
Record types passed between games, agents and the harness
"""

from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Dict, List, Optional, Tuple


# ============================================================
# Agent-facing records
# ============================================================

@dataclass(frozen=True)
class Observation:
    """What a game shows an agent before it acts"""
    game_id: str
    turn_index: int
    state_text: str
    structured_state: Dict[str, Any] = field(default_factory=dict)
    legal_actions: Optional[List[str]] = None

    def __post_init__(self):
        if not self.state_text:
            raise ValueError("Observation state_text must be non-empty")
        if self.turn_index < 0:
            raise ValueError(f"Observation turn_index must be >= 0, got {self.turn_index}")


@dataclass(frozen=True)
class AgentAction:
    """An agent's reply: the full text and the canonical action parsed from it"""
    raw_text: str
    parsed: str


# ============================================================
# Challenges and trials
# ============================================================

class ChallengeKind(str, Enum):
    WORDLE = "wordle"
    BATTLE = "battle"
    EXTERNAL = "external"


class Outcome(str, Enum):
    WIN = "Win"
    LOSS = "Loss"
    PROTOCOL_FAILURE = "ProtocolFailure"


@dataclass(frozen=True)
class Challenge:
    """
    One independent testable unit

    params by kind:
        wordle:   {"answer": "APPLE"}
        battle:   {"boss": "Hexaghost", "deck": "strong"}
        external: {"command": ["python", "game.py"], "params": {...}}
    """
    id: str
    kind: ChallengeKind
    params: Dict[str, Any] = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {"id": self.id, "kind": self.kind.value, "params": dict(self.params)}

    @classmethod
    def from_dict(cls, data: dict) -> "Challenge":
        return cls(id=data["id"], kind=ChallengeKind(data["kind"]), params=dict(data.get("params", {})))


@dataclass
class TrialRecord:
    """One agent attempt at one challenge"""
    challenge_id: str
    agent_id: str
    trial_index: int
    seed: int
    kind: ChallengeKind
    outcome: Outcome
    metrics: Dict[str, float] = field(default_factory=dict)
    transcript_path: Optional[str] = None
    wall_ms: float = 0.0
    failure_reason: Optional[str] = None
    flags: List[str] = field(default_factory=list)

    @property
    def key(self) -> Tuple[str, str, int]:
        """Identity of the (challenge, agent, trial) tuple"""
        return (self.challenge_id, self.agent_id, self.trial_index)

    def to_dict(self) -> dict:
        return {
            "challenge_id": self.challenge_id,
            "agent_id": self.agent_id,
            "trial_index": self.trial_index,
            "seed": self.seed,
            "kind": self.kind.value,
            "outcome": self.outcome.value,
            "metrics": dict(self.metrics),
            "transcript_path": self.transcript_path,
            "wall_ms": self.wall_ms,
            "failure_reason": self.failure_reason,
            "flags": list(self.flags),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "TrialRecord":
        return cls(
            challenge_id=data["challenge_id"],
            agent_id=data["agent_id"],
            trial_index=int(data["trial_index"]),
            seed=int(data["seed"]),
            kind=ChallengeKind(data["kind"]),
            outcome=Outcome(data["outcome"]),
            metrics=dict(data.get("metrics", {})),
            transcript_path=data.get("transcript_path"),
            wall_ms=float(data.get("wall_ms", 0.0)),
            failure_reason=data.get("failure_reason"),
            flags=list(data.get("flags", [])),
        )


@dataclass(frozen=True)
class GameResult:
    """How a finished game session ended"""
    outcome: Outcome
    metrics: Dict[str, float]
    flags: Tuple[str, ...] = ()
