"""
The battle demo as a protocol subprocess

    python -m diffprobe.battle_server

hello params: boss (name or id), deck, turn_cap, player_hp, fixture (path).
The seed comes from the hello payload.
"""

import logging
import sys
from typing import IO, Optional

from . import protocol
from .battle import DEFAULT_TURN_CAP, BattleSession, load_fixture
from .errors import DiffProbeError

logger = logging.getLogger(__name__)


def _send(out: IO[str], msg: protocol.ProtocolMessage) -> None:
    out.write(protocol.encode(msg))
    out.flush()


def _next_message(inp: IO[str]) -> Optional[protocol.ProtocolMessage]:
    for line in inp:
        if line.strip():
            return protocol.decode(line)
    return None


def session_from_hello(payload: dict) -> BattleSession:
    params = payload.get("params", {})
    fixture = load_fixture(params.get("fixture"))
    boss = fixture.boss(params.get("boss", payload.get("challenge_id", "")))
    return BattleSession(
        boss,
        fixture.deck(params.get("deck")),
        seed=int(payload.get("seed", 0)),
        turn_cap=int(params.get("turn_cap", DEFAULT_TURN_CAP)),
        player_hp=int(params.get("player_hp", fixture.player_hp)),
        player_name=fixture.player_name,
    )


def serve(inp: IO[str] = sys.stdin, out: IO[str] = sys.stdout) -> int:
    """Serve one episode; returns the process exit code"""
    try:
        greeting = _next_message(inp)
        if greeting is None or greeting.type != "hello":
            _send(out, protocol.error("expected hello"))
            return 1
        challenge_id = greeting.payload.get("challenge_id")
        session = session_from_hello(greeting.payload)
        _send(out, protocol.hello(game=session.game_id))

        while not session.finished:
            obs = session.observe()
            _send(out, protocol.state(
                turn=obs.turn_index,
                state_text=obs.state_text,
                challenge_id=challenge_id,
                structured_state=obs.structured_state,
                legal_actions=obs.legal_actions,
                metrics=session.metrics(),
            ))
            msg = _next_message(inp)
            if msg is None:
                logger.warning("Harness closed the connection mid-battle")
                return 1
            if msg.type != "action":
                _send(out, protocol.error(f"expected action, got {msg.type}"))
                return 1
            session.apply(msg.payload["action_text"])

        outcome = session.result()
        obs = session.observe()
        _send(out, protocol.state(turn=obs.turn_index, state_text=obs.state_text, terminal=True,
                                  challenge_id=challenge_id, metrics=outcome.metrics))
        _send(out, protocol.result(outcome.outcome.value, outcome.metrics, list(outcome.flags)))
        return 0
    except DiffProbeError as e:
        logger.error("battle server: %s", e)
        _send(out, protocol.error(str(e)))
        return 1


def main() -> int:
    logging.basicConfig(level=logging.WARNING, stream=sys.stderr,
                        format="%(asctime)s %(levelname)s %(name)s: %(message)s")
    return serve()


if __name__ == "__main__":
    sys.exit(main())
