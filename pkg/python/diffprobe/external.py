"""
Runs a game subprocess that speaks the NDJSON stdio protocol

The harness writes hello and action lines to the game's stdin and reads
hello, state, result and error lines from its stdout. A reader thread
feeds a queue so every read carries a timeout and a hung game cannot stall
the runner. stderr goes to the trial log file. The process is always torn
down on exit: stdin closed, then terminate, then kill.
"""

import logging
import queue
import subprocess
import threading
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Union

from . import protocol
from .errors import ProtocolFailure
from .protocol import (
    PROTOCOL_VERSION,
    HandshakeTimeout,
    ProtocolError,
    ProtocolMessage,
    ReadTimeout,
    SchemaError,
    SubprocessCrash,
    TurnLimitExceeded,
)
from .records import GameResult, Observation, Outcome

logger = logging.getLogger(__name__)

_EOF = object()


@dataclass(frozen=True)
class ExternalLimits:
    max_turns: int = 500
    wall_clock_s: float = 600.0
    handshake_timeout_s: float = 10.0
    read_timeout_s: float = 60.0


class GameProcess:
    """
    One game subprocess with line-oriented, timeout-bounded IO

    Usage:
        with GameProcess(["python", "game.py"], stderr_path) as game:
            game.send(protocol.hello(...))
            msg = game.receive(timeout=5)
    """

    def __init__(self, command: Sequence[str], stderr_path: Optional[Union[str, Path]] = None):
        self.command = list(command)
        self._stderr = open(stderr_path, "ab") if stderr_path else subprocess.DEVNULL
        try:
            self.proc = subprocess.Popen(
                self.command,
                stdin=subprocess.PIPE,
                stdout=subprocess.PIPE,
                stderr=self._stderr,
                text=True,
                encoding="utf-8",
                bufsize=1,
            )
        except OSError as e:
            self._close_stderr()
            raise SubprocessCrash(f"cannot launch {self.command[0]!r}: {e}") from e
        self._lines: "queue.Queue" = queue.Queue()
        self._reader = threading.Thread(target=self._read_loop, name=f"game-reader-{self.proc.pid}", daemon=True)
        self._reader.start()
        logger.debug("Started game pid=%d: %s", self.proc.pid, " ".join(self.command))

    @property
    def pid(self) -> int:
        return self.proc.pid

    def _read_loop(self) -> None:
        try:
            for line in self.proc.stdout:
                self._lines.put(line)
        except (OSError, ValueError):
            pass
        finally:
            self._lines.put(_EOF)

    def send(self, msg: ProtocolMessage) -> None:
        try:
            self.proc.stdin.write(protocol.encode(msg))
            self.proc.stdin.flush()
        except (BrokenPipeError, OSError, ValueError) as e:
            raise SubprocessCrash(f"game closed its input: {e}", self.proc.poll()) from e

    def receive(self, timeout: float) -> ProtocolMessage:
        """
        Next non-blank line, decoded

        Raises:
            ReadTimeout: nothing arrived within timeout seconds
            SubprocessCrash: the game closed its output
            SchemaError: the line is not a valid message
        """
        deadline = time.monotonic() + timeout
        while True:
            remaining = deadline - time.monotonic()
            try:
                line = self._lines.get(timeout=max(remaining, 0.0))
            except queue.Empty:
                raise ReadTimeout(f"no message from game within {timeout:.1f}s") from None
            if line is _EOF:
                self._lines.put(_EOF)
                try:
                    code = self.proc.wait(timeout=1.0)
                except subprocess.TimeoutExpired:
                    code = None
                raise SubprocessCrash(f"game exited (return code {code})", code)
            if line.strip():
                return protocol.decode(line)

    def close(self) -> None:
        try:
            if self.proc.stdin and not self.proc.stdin.closed:
                self.proc.stdin.close()
        except OSError:
            pass
        try:
            self.proc.wait(timeout=1.0)
        except subprocess.TimeoutExpired:
            self.proc.terminate()
            try:
                self.proc.wait(timeout=2.0)
            except subprocess.TimeoutExpired:
                logger.warning("Killing unresponsive game pid=%d", self.proc.pid)
                self.proc.kill()
                self.proc.wait()
        self._reader.join(timeout=2.0)
        if self.proc.stdout:
            self.proc.stdout.close()
        self._close_stderr()

    def _close_stderr(self) -> None:
        if self._stderr is not subprocess.DEVNULL:
            self._stderr.close()

    def __enter__(self):
        return self

    def __exit__(self, exc_type, exc_val, exc_tb):
        self.close()
        return False


def _numeric(metrics: Dict[str, Any]) -> Dict[str, float]:
    return {k: v for k, v in metrics.items() if isinstance(v, (int, float))}


def run_external_challenge(
    command: Sequence[str],
    agent,
    challenge_id: str,
    seed: int,
    params: Optional[dict] = None,
    limits: ExternalLimits = ExternalLimits(),
    stderr_path: Optional[Union[str, Path]] = None,
) -> GameResult:
    """
    Play one episode against a protocol subprocess

    The game is authoritative for legality and for when the episode ends.
    Running past max_turns or the wall clock is a Loss flagged
    turn_limit_exceeded.

    Raises:
        ProtocolFailure: handshake timeout, schema violation, crash, hang,
            a game error message, or an agent that cannot act; the cause is
            chained
    """
    started = time.monotonic()
    metrics: Dict[str, float] = {}
    turns = 0

    try:
        game = GameProcess(command, stderr_path)
    except SubprocessCrash as e:
        logger.warning("%s: %s", challenge_id, e)
        raise ProtocolFailure(f"SubprocessCrash: {e}", metrics) from e

    with game:
        try:
            game.send(protocol.hello(challenge_id=challenge_id, seed=seed, params=dict(params or {})))
            try:
                greeting = game.receive(limits.handshake_timeout_s)
            except ReadTimeout as e:
                raise HandshakeTimeout(f"no hello within {limits.handshake_timeout_s:.1f}s") from e
            if greeting.type != "hello":
                raise SchemaError(f"expected hello, got {greeting.type}")
            if greeting.protocol_version != PROTOCOL_VERSION:
                raise SchemaError(f"protocol version {greeting.protocol_version} != {PROTOCOL_VERSION}")
            game_id = str(greeting.payload.get("game", "external"))

            while True:
                msg = game.receive(limits.read_timeout_s)
                if msg.type == "error":
                    raise ProtocolFailure(f"game error: {msg.payload['message']}", metrics)
                if msg.type == "result":
                    return _result(msg, metrics)
                if msg.type != "state":
                    raise SchemaError(f"unexpected {msg.type} message from game")

                payload = msg.payload
                metrics.update(_numeric(payload.get("metrics", {})))
                if payload["terminal"]:
                    final = game.receive(limits.read_timeout_s)
                    if final.type != "result":
                        raise SchemaError(f"expected result after terminal state, got {final.type}")
                    return _result(final, metrics)

                if turns >= limits.max_turns or time.monotonic() - started > limits.wall_clock_s:
                    raise TurnLimitExceeded(f"episode still running after {turns} actions")

                obs = Observation(
                    game_id=game_id,
                    turn_index=payload["turn"],
                    state_text=payload["state_text"],
                    structured_state=payload.get("structured_state", {}),
                    legal_actions=payload.get("legal_actions"),
                )
                chosen = agent.act(obs)
                game.send(protocol.action(chosen.parsed))
                turns += 1

        except TurnLimitExceeded as e:
            logger.info("%s: %s", challenge_id, e)
            if "hp_remaining" in metrics:
                metrics["hp_remaining"] = 0
            return GameResult(Outcome.LOSS, metrics, ("turn_limit_exceeded",))
        except ProtocolError as e:
            logger.warning("%s: protocol failure: %s", challenge_id, e)
            raise ProtocolFailure(f"{type(e).__name__}: {e}", metrics) from e


def _result(msg: ProtocolMessage, metrics: Dict[str, float]) -> GameResult:
    merged = dict(metrics)
    merged.update(_numeric(msg.payload.get("metrics", {})))
    flags: List[str] = [str(f) for f in msg.payload.get("flags", [])]
    return GameResult(Outcome(msg.payload["outcome"]), merged, tuple(flags))
