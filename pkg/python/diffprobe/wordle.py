"""
Wordle game logic: word validation, feedback scoring and puzzle progression

Words are normalized to upper case on the way in; everything inside this
module compares upper-case strings exactly.
"""

import hashlib
import logging
import re
from collections import Counter
from dataclasses import dataclass, field, replace
from enum import Enum
from functools import cached_property, lru_cache
from importlib import resources
from pathlib import Path
from typing import FrozenSet, List, Optional, Tuple, Union

from .errors import InputError, InputFileError, ProtocolFailure
from .records import GameResult, Observation, Outcome

logger = logging.getLogger(__name__)

WORD_LENGTH = 5
DEFAULT_GUESS_CAP = 12
ORIGINAL_GUESS_CAP = 6

_WORD_RE = re.compile(r"^[A-Z]{5}$")


class WordleError(InputError):
    """Base class for Wordle rule violations"""
    pass


class GuessRejected(WordleError):
    """Raised when a guess is malformed or (in strict mode) not in the word list"""

    def __init__(self, guess: str, reason: str):
        self.guess = guess
        self.reason = reason
        super().__init__(f"Guess rejected: {reason}")


class GameOver(WordleError):
    """Raised when guessing on a puzzle that is already solved or failed"""
    pass


class FormatError(WordleError):
    """Raised when a word list file contains an invalid entry"""

    def __init__(self, path, line_no: int, message: str):
        self.path = str(path)
        self.line_no = line_no
        super().__init__(f"{self.path}:{line_no}: {message}")


# ============================================================
# Words and feedback
# ============================================================

class Verdict(Enum):
    """Per-letter feedback; values are the base-3 digits of a pattern code"""
    GRAY = 0
    YELLOW = 1
    GREEN = 2

    @property
    def label(self) -> str:
        return self.name.capitalize()


FeedbackPattern = Tuple[Verdict, Verdict, Verdict, Verdict, Verdict]

ALL_GREEN: FeedbackPattern = (Verdict.GREEN,) * WORD_LENGTH
SOLVED_CODE = 3 ** WORD_LENGTH - 1


def is_word(text: str) -> bool:
    """True if text is exactly five upper-case letters A-Z"""
    return bool(_WORD_RE.match(text))


def normalize_word(text: str) -> str:
    """
    Upper-case and validate a word

    Raises:
        GuessRejected: if the text is not five letters A-Z
    """
    word = text.strip().upper()
    if len(word) != WORD_LENGTH:
        raise GuessRejected(word, f"expected {WORD_LENGTH} letters, got {len(word)}")
    if not is_word(word):
        raise GuessRejected(word, "only letters A-Z are allowed")
    return word


def score_guess(answer: str, guess: str) -> FeedbackPattern:
    """
    Compute the feedback pattern for guess against answer

    Greens are marked first and each consumes one occurrence of its letter
    from the answer; the remaining positions are then scanned left to right
    and marked Yellow while an unconsumed occurrence of that letter remains.

    Examples:
        score_guess("APPLE", "ALERT") -> (GREEN, YELLOW, YELLOW, GRAY, GRAY)
        score_guess("ABBEY", "BABES") -> (YELLOW, YELLOW, GREEN, GREEN, GRAY)
    """
    verdicts = [Verdict.GRAY] * WORD_LENGTH
    remaining = Counter()

    for i, (g, a) in enumerate(zip(guess, answer)):
        if g == a:
            verdicts[i] = Verdict.GREEN
        else:
            remaining[a] += 1

    for i, g in enumerate(guess):
        if verdicts[i] is Verdict.GREEN:
            continue
        if remaining[g] > 0:
            verdicts[i] = Verdict.YELLOW
            remaining[g] -= 1

    return tuple(verdicts)


def pattern_code(pattern: FeedbackPattern) -> int:
    """Encode a pattern as an integer in [0, 243); position i has weight 3**i"""
    return sum(v.value * 3 ** i for i, v in enumerate(pattern))


def pattern_from_code(code: int) -> FeedbackPattern:
    """Inverse of pattern_code"""
    verdicts = []
    for _ in range(WORD_LENGTH):
        code, digit = divmod(code, 3)
        verdicts.append(Verdict(digit))
    return tuple(verdicts)


def pattern_from_labels(labels: List[str]) -> FeedbackPattern:
    """Build a pattern from labels such as ["Green", "Gray", ...]"""
    return tuple(Verdict[label.upper()] for label in labels)


def bracket(word: str) -> str:
    """Render a word as a bracketed letter list: APPLE -> [A, P, P, L, E]"""
    return "[" + ", ".join(word) + "]"


def bracket_pattern(pattern: FeedbackPattern) -> str:
    return "[" + ", ".join(v.label for v in pattern) + "]"


# ============================================================
# Word lists
# ============================================================

@dataclass(frozen=True)
class WordList:
    """Allowed guesses and possible answers; answers is a subset of allowed"""
    allowed: FrozenSet[str]
    answers: FrozenSet[str]

    def __post_init__(self):
        if not self.allowed or not self.answers:
            raise ValueError("Word lists must be non-empty")
        if not self.answers <= self.allowed:
            missing = sorted(self.answers - self.allowed)
            raise ValueError(f"Answers missing from allowed guesses: {missing[:5]}")

    @cached_property
    def sorted_allowed(self) -> Tuple[str, ...]:
        return tuple(sorted(self.allowed))

    @cached_property
    def sorted_answers(self) -> Tuple[str, ...]:
        return tuple(sorted(self.answers))

    @cached_property
    def digest(self) -> str:
        """Content hash used for caching and run provenance"""
        h = hashlib.sha256()
        h.update("\n".join(self.sorted_allowed).encode("ascii"))
        h.update(b"|")
        h.update("\n".join(self.sorted_answers).encode("ascii"))
        return h.hexdigest()

    @classmethod
    def from_words(cls, allowed, answers=None) -> "WordList":
        """Build from iterables of words of any case"""
        allowed_set = frozenset(normalize_word(w) for w in allowed)
        answer_set = frozenset(normalize_word(w) for w in answers) if answers is not None else allowed_set
        return cls(allowed=allowed_set, answers=answer_set)


def _read_words(path: Path) -> List[Tuple[int, str]]:
    """Read (line_no, WORD) pairs, skipping blanks and '#' comments"""
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as e:
        raise InputFileError(path, e) from e

    words = []
    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        word = line.upper()
        if len(word) != WORD_LENGTH or not is_word(word):
            raise FormatError(path, line_no, f"'{line}' is not a five-letter A-Z word")
        words.append((line_no, word))
    return words


def load_word_list(path: Union[str, Path], answers_path: Optional[Union[str, Path]] = None) -> WordList:
    """
    Load a word list file (one word per line, '#' comments ignored)

    Args:
        path: allowed-guesses file
        answers_path: optional answers file; defaults to the allowed file

    Raises:
        InputFileError: file missing or unreadable
        FormatError: bad word, or an answer absent from the allowed list
    """
    path = Path(path)
    allowed_entries = _read_words(path)
    if not allowed_entries:
        raise FormatError(path, 0, "word list is empty")
    allowed = frozenset(w for _, w in allowed_entries)

    if answers_path is None:
        answers = allowed
    else:
        answers_path = Path(answers_path)
        answer_entries = _read_words(answers_path)
        if not answer_entries:
            raise FormatError(answers_path, 0, "answer list is empty")
        for line_no, word in answer_entries:
            if word not in allowed:
                raise FormatError(answers_path, line_no, f"answer '{word}' is not in the allowed list {path}")
        answers = frozenset(w for _, w in answer_entries)

    word_list = WordList(allowed=allowed, answers=answers)
    logger.debug("Loaded word list %s: %d allowed, %d answers", path, len(allowed), len(answers))
    return word_list


@lru_cache(maxsize=1)
def default_word_list() -> WordList:
    """The word list shipped in diffprobe/data"""
    data = resources.files("diffprobe") / "data"
    with resources.as_file(data / "allowed.txt") as allowed, resources.as_file(data / "answers.txt") as answers:
        return load_word_list(allowed, answers)


# ============================================================
# Puzzle state
# ============================================================

class Status(str, Enum):
    IN_PROGRESS = "InProgress"
    SOLVED = "Solved"
    FAILED = "Failed"


@dataclass(frozen=True)
class PuzzleState:
    """One puzzle in progress; a value type, every guess returns a new state"""
    answer: str
    history: Tuple[Tuple[str, FeedbackPattern], ...] = ()
    guess_cap: int = DEFAULT_GUESS_CAP
    status: Status = Status.IN_PROGRESS

    def __post_init__(self):
        if self.guess_cap < 1:
            raise ValueError(f"guess_cap must be positive, got {self.guess_cap}")
        if len(self.history) > self.guess_cap:
            raise ValueError("history longer than guess_cap")

    @property
    def guesses_used(self) -> int:
        return len(self.history)

    @property
    def guesses_remaining(self) -> int:
        return self.guess_cap - len(self.history)


def new_puzzle(answer: str, guess_cap: int = DEFAULT_GUESS_CAP) -> PuzzleState:
    return PuzzleState(answer=normalize_word(answer), guess_cap=guess_cap)


def submit_guess(
    state: PuzzleState,
    guess: str,
    word_list: Optional[WordList] = None,
    strict: bool = False,
) -> Tuple[PuzzleState, FeedbackPattern]:
    """
    Score a guess and advance the puzzle

    Returns:
        (new state, feedback for this guess)

    Raises:
        GameOver: the puzzle is no longer in progress
        GuessRejected: malformed guess, or strict mode and not an allowed word
    """
    if state.status is not Status.IN_PROGRESS:
        raise GameOver(f"Puzzle is already {state.status.value}")

    word = normalize_word(guess)
    if strict and word_list is not None and word not in word_list.allowed:
        raise GuessRejected(word, "not in the allowed word list")

    feedback = score_guess(state.answer, word)
    history = state.history + ((word, feedback),)

    if feedback == ALL_GREEN:
        status = Status.SOLVED
    elif len(history) >= state.guess_cap:
        status = Status.FAILED
    else:
        status = Status.IN_PROGRESS

    return replace(state, history=history, status=status), feedback


# ============================================================
# Session: puzzle as seen by an agent
# ============================================================

@dataclass
class WordleSession:
    """
    Drives one puzzle for an agent

    observe() renders the state with every word and feedback as bracketed
    lists; apply() takes a canonical five-letter guess. Rejected guesses do
    not consume a guess but are counted, and too many consecutive
    rejections end the trial as a protocol failure.
    """
    answer: str
    word_list: Optional[WordList] = None
    guess_cap: int = DEFAULT_GUESS_CAP
    strict: bool = False
    max_rejections: int = 5

    game_id: str = field(default="wordle", init=False)
    state: PuzzleState = field(init=False)
    rejected: int = field(default=0, init=False)
    decisions: int = field(default=0, init=False)
    _consecutive_rejections: int = field(default=0, init=False)
    _notice: Optional[str] = field(default=None, init=False)

    def __post_init__(self):
        self.state = new_puzzle(self.answer, self.guess_cap)

    @property
    def finished(self) -> bool:
        return self.state.status is not Status.IN_PROGRESS

    def observe(self) -> Observation:
        state = self.state
        lines = [
            f"Wordle puzzle. You have used {state.guesses_used} of {state.guess_cap} guesses; "
            f"{state.guesses_remaining} remain."
        ]
        if not state.history:
            lines.append("No guesses yet.")
        for i, (word, feedback) in enumerate(state.history, start=1):
            lines.append(f"Attempt {i}: {bracket(word)} -> {bracket_pattern(feedback)}")
        if self._notice:
            lines.append(self._notice)
        lines.append("Make your next guess.")

        structured = {
            "history": [
                {"guess": list(word), "feedback": [v.label for v in feedback]}
                for word, feedback in state.history
            ],
            "guesses_used": state.guesses_used,
            "guesses_remaining": state.guesses_remaining,
            "guess_cap": state.guess_cap,
        }
        return Observation(
            game_id=self.game_id,
            turn_index=self.decisions,
            state_text="\n".join(lines),
            structured_state=structured,
        )

    def apply(self, action_text: str) -> None:
        self.decisions += 1
        try:
            self.state, _ = submit_guess(self.state, action_text, self.word_list, self.strict)
        except GuessRejected as e:
            self.rejected += 1
            self._consecutive_rejections += 1
            shown = bracket(e.guess) if e.guess.isalpha() else "your guess"
            self._notice = f"The guess {shown} was rejected: {e.reason}. It did not use up a guess."
            logger.debug("Rejected guess on %s: %s", self.answer, e.reason)
            if self._consecutive_rejections >= self.max_rejections:
                raise ProtocolFailure(
                    f"{self._consecutive_rejections} consecutive rejected guesses",
                    metrics=self.metrics(),
                ) from e
            return
        self._consecutive_rejections = 0
        self._notice = None

    def metrics(self) -> dict:
        used = self.state.guesses_used
        guesses = used if self.state.status is Status.SOLVED else self.state.guess_cap
        return {
            "guesses": guesses if self.finished else used,
            "guess_cap": self.state.guess_cap,
            "rejected_guesses": self.rejected,
            "solved": 1 if self.state.status is Status.SOLVED else 0,
        }

    def result(self) -> GameResult:
        if not self.finished:
            raise GameOver("Puzzle is still in progress")
        outcome = Outcome.WIN if self.state.status is Status.SOLVED else Outcome.LOSS
        return GameResult(outcome=outcome, metrics=self.metrics())
