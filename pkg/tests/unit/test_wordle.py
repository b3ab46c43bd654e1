"""Wordle engine: feedback scoring, puzzle progression, word lists, sessions"""
import random
from collections import Counter

import pytest
from hypothesis import given
from hypothesis import strategies as st

from diffprobe.errors import InputFileError, ProtocolFailure
from diffprobe.records import Outcome
from diffprobe.wordle import (
    ALL_GREEN,
    SOLVED_CODE,
    FormatError,
    GameOver,
    GuessRejected,
    Status,
    Verdict,
    WordleSession,
    bracket,
    load_word_list,
    new_puzzle,
    pattern_code,
    pattern_from_code,
    pattern_from_labels,
    score_guess,
    submit_guess,
)

G, Y, X = Verdict.GREEN, Verdict.YELLOW, Verdict.GRAY

words = st.text(alphabet="ABCDE", min_size=5, max_size=5)


def oracle(answer, guess):
    """Independent multiset bookkeeping: greens first, then yellows left to right"""
    pool = Counter(a for a, g in zip(answer, guess) if a != g)
    out = []
    for a, g in zip(answer, guess):
        if a == g:
            out.append(G)
        elif pool[g]:
            pool[g] -= 1
            out.append(Y)
        else:
            out.append(X)
    return tuple(out)


@pytest.mark.parametrize("answer,guess,expected", [
    ("APPLE", "ALERT", (G, Y, Y, X, X)),
    ("APPLE", "APPLE", (G, G, G, G, G)),
    ("ABBEY", "BABES", (Y, Y, G, G, X)),
    ("APPLE", "PAPER", (Y, Y, G, Y, X)),
    ("SPEED", "ERASE", (Y, X, X, Y, Y)),
    ("LLAMA", "HELLO", (X, X, Y, Y, X)),
])
def test_score_guess_examples(answer, guess, expected):
    assert score_guess(answer, guess) == expected


def test_score_guess_matches_oracle_on_random_pairs():
    rng = random.Random(1234)
    letters = "AEILNORST"
    for _ in range(10_000):
        answer = "".join(rng.choice(letters) for _ in range(5))
        guess = "".join(rng.choice(letters) for _ in range(5))
        assert score_guess(answer, guess) == oracle(answer, guess), (answer, guess)


@given(words, words)
def test_all_green_iff_equal(answer, guess):
    assert (score_guess(answer, guess) == ALL_GREEN) == (answer == guess)


@given(words, words)
def test_marked_letters_never_exceed_multiplicity(answer, guess):
    pattern = score_guess(answer, guess)
    marked = Counter(g for g, v in zip(guess, pattern) if v is not X)
    for letter, count in marked.items():
        assert count <= answer.count(letter)


@given(st.integers(min_value=0, max_value=SOLVED_CODE))
def test_pattern_code_inverse(code):
    assert pattern_code(pattern_from_code(code)) == code


def test_pattern_code_weights():
    assert pattern_code(ALL_GREEN) == SOLVED_CODE
    assert pattern_code((Y, X, X, X, X)) == 1
    assert pattern_code((X, G, X, X, X)) == 6
    assert pattern_from_labels(["Green", "Yellow", "Gray", "Gray", "Green"]) == (G, Y, X, X, G)


# ============================================================
# Puzzle progression
# ============================================================

def test_first_guess_keeps_puzzle_in_progress():
    state, feedback = submit_guess(new_puzzle("apple"), "alert")
    assert state.guesses_used == 1
    assert state.status is Status.IN_PROGRESS
    assert feedback == (G, Y, Y, X, X)


def test_cap_boundary_fails_puzzle():
    state = new_puzzle("APPLE", guess_cap=12)
    for _ in range(11):
        state, _ = submit_guess(state, "CRANE")
    assert state.status is Status.IN_PROGRESS
    state, _ = submit_guess(state, "LEMON")
    assert state.status is Status.FAILED
    assert state.guesses_remaining == 0


def test_solving_sets_status():
    state, _ = submit_guess(new_puzzle("APPLE", guess_cap=6), "APPLE")
    assert state.status is Status.SOLVED
    with pytest.raises(GameOver):
        submit_guess(state, "ALERT")


@pytest.mark.parametrize("guess", ["AB", "APPLES", "APP1E", "AP LE"])
def test_malformed_guess_rejected_without_mutation(guess):
    state = new_puzzle("APPLE")
    with pytest.raises(GuessRejected):
        submit_guess(state, guess)
    assert state.history == ()


def test_strict_mode_rejects_unknown_words(small_word_list):
    state = new_puzzle("APPLE")
    with pytest.raises(GuessRejected) as info:
        submit_guess(state, "ZZZZZ", small_word_list, strict=True)
    assert "allowed" in info.value.reason
    new_state, _ = submit_guess(state, "ZZZZZ", small_word_list, strict=False)
    assert new_state.guesses_used == 1


# ============================================================
# Word lists
# ============================================================

def test_load_word_list_same_file(write_words):
    path = write_words("words.txt", ["apple", "alert", "# comment", "", "APPLE"])
    wl = load_word_list(path)
    assert wl.allowed == {"APPLE", "ALERT"}
    assert wl.answers == wl.allowed


def test_load_word_list_bad_word_reports_line(write_words):
    path = write_words("words.txt", ["apple", "apples"])
    with pytest.raises(FormatError) as info:
        load_word_list(path)
    assert info.value.line_no == 2


def test_load_word_list_answers_must_be_allowed(write_words):
    allowed = write_words("allowed.txt", ["apple", "alert"])
    answers = write_words("answers.txt", ["apple", "crane"])
    with pytest.raises(FormatError) as info:
        load_word_list(allowed, answers)
    assert info.value.line_no == 2


def test_load_word_list_missing_file(tmp_path):
    with pytest.raises(InputFileError):
        load_word_list(tmp_path / "nope.txt")


def test_default_word_list_is_consistent(word_list):
    assert word_list.answers <= word_list.allowed
    assert len(word_list.answers) > 2000
    assert len(word_list.digest) == 64


# ============================================================
# Session
# ============================================================

def test_session_renders_words_as_bracketed_lists(small_word_list):
    session = WordleSession("APPLE", small_word_list)
    session.apply("ALERT")
    obs = session.observe()
    assert bracket("ALERT") in obs.state_text
    assert "ALERT" not in obs.state_text
    assert obs.structured_state["history"] == [
        {"guess": list("ALERT"), "feedback": ["Green", "Yellow", "Yellow", "Gray", "Gray"]}
    ]
    assert obs.structured_state["guesses_remaining"] == 11


def test_session_win_and_metrics(small_word_list):
    session = WordleSession("APPLE", small_word_list, guess_cap=6)
    for guess in ("CRANE", "APPLE"):
        session.apply(guess)
    result = session.result()
    assert result.outcome is Outcome.WIN
    assert result.metrics["guesses"] == 2
    assert result.metrics["guess_cap"] == 6


def test_session_loss_counts_cap(small_word_list):
    session = WordleSession("APPLE", small_word_list, guess_cap=2)
    session.apply("CRANE")
    session.apply("LEMON")
    result = session.result()
    assert result.outcome is Outcome.LOSS
    assert result.metrics["guesses"] == 2
    assert result.metrics["solved"] == 0


def test_session_rejections_do_not_consume_guesses(small_word_list):
    session = WordleSession("APPLE", small_word_list, strict=True, max_rejections=3)
    session.apply("ZZZZZ")
    assert session.state.guesses_used == 0
    assert "rejected" in session.observe().state_text
    session.apply("CRANE")
    session.apply("QQQQQ")
    session.apply("QQQQQ")
    with pytest.raises(ProtocolFailure) as info:
        session.apply("QQQQQ")
    assert info.value.metrics["rejected_guesses"] == 4
