"""Action parsing from free-text agent replies"""
import pytest

from diffprobe.parser import (
    BATTLE_GAME,
    END_TURN,
    WORDLE_GAME,
    ParseFailure,
    format_action,
    parse_action,
    split_battle_action,
)


# ============================================================
# Wordle guesses
# ============================================================

def test_guess_line_after_reasoning():
    raw = "Green A means position one is fixed.\nI'll try a new vowel.\nGUESS: [C, R, A, N, E]"
    action = parse_action(raw, WORDLE_GAME)
    assert action.parsed == "CRANE"
    assert action.raw_text == raw


def test_last_guess_line_wins():
    raw = "GUESS: [S, L, A, T, E]\nActually, better:\nGUESS: [c, r, a, n, e]"
    assert parse_action(raw, WORDLE_GAME).parsed == "CRANE"


def test_guess_marker_is_case_insensitive():
    assert parse_action("guess:[a,l,e,r,t]", WORDLE_GAME).parsed == "ALERT"


@pytest.mark.parametrize("raw,fragment", [
    ("I think it is CRANE", "no 'GUESS"),
    ("GUESS: CRANE", "bracketed"),
    ("GUESS: [C, R, A, N]", "4 letters"),
    ("GUESS: [CR, A, N, E, S]", "single letters"),
    ("GUESS: [C, R, 4, N, E]", "single letters"),
    ("", "no 'GUESS"),
])
def test_bad_guess_replies(raw, fragment):
    with pytest.raises(ParseFailure) as info:
        parse_action(raw, WORDLE_GAME)
    assert fragment in info.value.reason


# ============================================================
# Battle actions
# ============================================================

@pytest.mark.parametrize("raw,expected", [
    ("Bash first for vulnerable.\nPLAY: Bash | TARGET: 0", "PLAY Bash TARGET 0"),
    ("PLAY: Defend", "PLAY Defend"),
    ("play: heavy   blade | target: 1", "PLAY heavy blade TARGET 1"),
    ("Out of energy.\nEND TURN", END_TURN),
    ("PLAY: **Strike** | TARGET: `0`", "PLAY Strike TARGET 0"),
])
def test_battle_replies(raw, expected):
    assert parse_action(raw, BATTLE_GAME).parsed == expected


def test_battle_last_marker_counts():
    raw = "PLAY: Strike | TARGET: 0\nOn second thought\nEND TURN"
    assert parse_action(raw, BATTLE_GAME).parsed == END_TURN


def test_battle_rejects_non_numeric_target():
    with pytest.raises(ParseFailure):
        parse_action("PLAY: Strike | TARGET: boss", BATTLE_GAME)


def test_battle_without_marker():
    with pytest.raises(ParseFailure):
        parse_action("I attack the boss", BATTLE_GAME)


def test_split_battle_action():
    assert split_battle_action("PLAY Bash TARGET 0") == ("Bash", 0)
    assert split_battle_action("PLAY Defend") == ("Defend", None)
    assert split_battle_action("END TURN") == (None, None)
    with pytest.raises(ParseFailure):
        split_battle_action("attack")


# ============================================================
# External games and formatting
# ============================================================

def test_generic_action_line():
    assert parse_action("thinking\nACTION: move north", "maze").parsed == "move north"
    with pytest.raises(ParseFailure):
        parse_action("move north", "maze")


@pytest.mark.parametrize("canonical,game", [
    ("CRANE", WORDLE_GAME),
    ("PLAY Bash TARGET 0", BATTLE_GAME),
    ("PLAY Defend", BATTLE_GAME),
    (END_TURN, BATTLE_GAME),
    ("move north", "maze"),
])
def test_format_action_is_read_back(canonical, game):
    assert parse_action(format_action(canonical, game), game).parsed == canonical


def test_format_action_rejects_non_canonical_battle_text():
    with pytest.raises(ValueError):
        format_action("attack", BATTLE_GAME)
