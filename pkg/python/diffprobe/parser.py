"""
Action parser - extracts the canonical action from an agent's free-text reply

Every reply ends with a marker line the game understands:

- wordle:   GUESS: [C, R, A, N, E]
- battle:   PLAY: Bash | TARGET: 0     PLAY: Defend     END TURN
- external: ACTION: <any text>

Only the last marker line counts, so agents may reason freely above it.
"""

import re
from typing import List, Optional

from .records import AgentAction
from .wordle import WORD_LENGTH


class ParseFailure(Exception):
    """Raised when an agent reply carries no usable action"""

    def __init__(self, reason: str, raw_text: str = ""):
        self.reason = reason
        self.raw_text = raw_text
        super().__init__(reason)


WORDLE_GAME = "wordle"
BATTLE_GAME = "battle"

END_TURN = "END TURN"

_GUESS_MARKER = re.compile(r"GUESS\s*:", re.IGNORECASE)
_GUESS_LIST = re.compile(r"GUESS\s*:\s*\[([^\]]*)\]", re.IGNORECASE)
_PLAY = re.compile(r"PLAY\s*:\s*(?P<card>[^|]+?)\s*(?:\|\s*TARGET\s*:\s*(?P<target>\S+))?\s*$", re.IGNORECASE)
_END_TURN = re.compile(r"\bEND\s+TURN\b", re.IGNORECASE)
_ACTION = re.compile(r"ACTION\s*:\s*(?P<text>.+?)\s*$", re.IGNORECASE)

# Canonical battle actions as the session consumes them
_CANONICAL_PLAY = re.compile(r"^PLAY (?P<card>.+?)(?: TARGET (?P<target>\d+))?$")


class ActionParser:
    """
    Parser for one game's answer marker

    Usage:
        ActionParser("wordle").parse("...\\nGUESS: [C, R, A, N, E]").parsed == "CRANE"
    """

    def __init__(self, game_id: str):
        self.game_id = game_id

    def parse(self, raw: str) -> AgentAction:
        lines = [line.strip() for line in (raw or "").splitlines() if line.strip()]
        if self.game_id == WORDLE_GAME:
            parsed = self._parse_guess(lines)
        elif self.game_id == BATTLE_GAME:
            parsed = self._parse_battle(lines)
        else:
            parsed = self._parse_generic(lines)
        return AgentAction(raw_text=raw, parsed=parsed)

    def _last_line(self, lines: List[str], pattern: re.Pattern) -> Optional[str]:
        for line in reversed(lines):
            if pattern.search(line):
                return line
        return None

    def _parse_guess(self, lines: List[str]) -> str:
        line = self._last_line(lines, _GUESS_MARKER)
        if line is None:
            raise ParseFailure("no 'GUESS: [...]' line found")

        match = _GUESS_LIST.search(line)
        if not match:
            raise ParseFailure("guess is not a bracketed letter list")

        items = [item.strip() for item in match.group(1).split(",")]
        if any(len(item) != 1 or not item.isalpha() for item in items):
            raise ParseFailure("guess list must contain single letters separated by commas")
        if len(items) != WORD_LENGTH:
            raise ParseFailure(f"guess has {len(items)} letters, expected {WORD_LENGTH}")
        return "".join(items).upper()

    def _parse_battle(self, lines: List[str]) -> str:
        for line in reversed(lines):
            play = _PLAY.search(line)
            if play:
                card = " ".join(play.group("card").strip(" *`").split())
                if not card:
                    raise ParseFailure("PLAY line names no card")
                target = play.group("target")
                if target is None:
                    return f"PLAY {card}"
                target = target.strip(" *`")
                if not target.isdigit():
                    raise ParseFailure(f"target must be an enemy index, got '{target}'")
                return f"PLAY {card} TARGET {int(target)}"
            if _END_TURN.search(line):
                return END_TURN
        raise ParseFailure("no 'PLAY: <card> | TARGET: <n>' or 'END TURN' line found")

    def _parse_generic(self, lines: List[str]) -> str:
        line = self._last_line(lines, _ACTION)
        if line is None:
            raise ParseFailure("no 'ACTION: <text>' line found")
        return _ACTION.search(line).group("text")


def parse_action(raw: str, game_id: str) -> AgentAction:
    """Extract the canonical action; raises ParseFailure"""
    return ActionParser(game_id).parse(raw)


def format_action(action_text: str, game_id: str) -> str:
    """Render a canonical action as the marker line parse_action reads back"""
    if game_id == WORDLE_GAME:
        return "GUESS: [" + ", ".join(action_text.upper()) + "]"
    if game_id == BATTLE_GAME:
        if action_text == END_TURN:
            return END_TURN
        match = _CANONICAL_PLAY.match(action_text)
        if not match:
            raise ValueError(f"Not a canonical battle action: {action_text!r}")
        if match.group("target") is None:
            return f"PLAY: {match.group('card')}"
        return f"PLAY: {match.group('card')} | TARGET: {match.group('target')}"
    return f"ACTION: {action_text}"


def split_battle_action(action_text: str):
    """
    Split a canonical battle action into (card name or None, target or None)

    END TURN gives (None, None).
    """
    if action_text.strip().upper() == END_TURN:
        return None, None
    match = _CANONICAL_PLAY.match(action_text.strip())
    if not match:
        raise ParseFailure(f"not a battle action: {action_text!r}", action_text)
    target = match.group("target")
    return match.group("card"), (int(target) if target is not None else None)
