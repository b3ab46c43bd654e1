"""
Information-theoretic Wordle solver

Chooses each guess by maximizing the entropy of the feedback partition it
induces over the remaining candidates:

1. Filter candidates against every (guess, feedback) seen so far
2. With two or fewer candidates left, guess the first one
3. Otherwise score a guess pool (all allowed words, or the candidates once
   few remain) and take the highest entropy, preferring candidates and then
   lexicographic order on ties

Feedback codes for allowed x answers are precomputed once per word list
into a numpy matrix; the pure word-level functions below give the same
answers without it.
"""

import logging
import math
import threading
from collections import Counter
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np
from tqdm import tqdm

from .errors import InputError
from .wordle import (
    ALL_GREEN,
    DEFAULT_GUESS_CAP,
    ORIGINAL_GUESS_CAP,
    SOLVED_CODE,
    WORD_LENGTH,
    FeedbackPattern,
    WordList,
    pattern_code,
    score_guess,
)

logger = logging.getLogger(__name__)

CANDIDATE_POOL_THRESHOLD = 3
HUMAN_AVERAGE_GUESSES = 3.97

# Entropies are compared after rounding so float noise cannot break ties
_ENTROPY_DECIMALS = 10
_N_PATTERNS = 3 ** WORD_LENGTH
_MATRIX_BLOCK = 256
_ENTROPY_BLOCK = 1024


class EmptyResult(InputError):
    """Raised when no candidate is consistent with the feedback history"""
    pass


class UnknownAnswer(InputError):
    """Raised when solving for a word that is not in the answer list"""
    pass


# ============================================================
# Candidate sets
# ============================================================

@dataclass(frozen=True)
class CandidateSet:
    """Words still consistent with the feedback so far, sorted"""
    candidates: Tuple[str, ...]

    def __post_init__(self):
        object.__setattr__(self, "candidates", tuple(sorted(set(self.candidates))))

    @classmethod
    def of(cls, words: Iterable[str]) -> "CandidateSet":
        return cls(tuple(words))

    def __len__(self) -> int:
        return len(self.candidates)

    def __iter__(self):
        return iter(self.candidates)

    def __contains__(self, word: str) -> bool:
        return word in self.candidates


def filter_candidates(candidates: CandidateSet, guess: str, observed: FeedbackPattern) -> CandidateSet:
    """
    Keep exactly the candidates c with score_guess(c, guess) == observed

    Raises:
        EmptyResult: nothing is consistent with the observed feedback
    """
    kept = [c for c in candidates if score_guess(c, guess) == observed]
    if not kept:
        raise EmptyResult(f"No candidate is consistent with feedback for guess {guess}")
    return CandidateSet(tuple(kept))


def _entropy_from_counts(counts: Iterable[int], total: int) -> float:
    # H = log2(n) - sum(c * log2 c) / n, equal to -sum(p log2 p)
    return math.log2(total) - sum(c * math.log2(c) for c in counts if c > 1) / total


def entropy_of_guess(guess: str, candidates: CandidateSet) -> float:
    """
    Entropy in bits of the feedback partition guess induces over candidates

    Returns 0.0 for a single candidate and log2(|set|) when every candidate
    yields a distinct pattern.
    """
    if len(candidates) == 0:
        raise EmptyResult("Cannot score a guess against an empty candidate set")
    partition = Counter(pattern_code(score_guess(c, guess)) for c in candidates)
    return _entropy_from_counts(partition.values(), len(candidates))


# ============================================================
# Pattern matrix
# ============================================================

def _letters(words: Sequence[str]) -> np.ndarray:
    return np.array([[ord(ch) - ord("A") for ch in w] for w in words], dtype=np.int8).reshape(len(words), WORD_LENGTH)


def build_pattern_matrix(guesses: Sequence[str], answers: Sequence[str]) -> np.ndarray:
    """
    Feedback codes for every (guess, answer) pair as a (len(guesses), len(answers)) uint8 array

    Codes match pattern_code(score_guess(answer, guess)). A non-green guess
    letter at position i is Yellow iff the number of earlier non-green
    positions holding the same letter is below the count of that letter
    among the answer's non-green positions.
    """
    g = _letters(guesses)
    a = _letters(answers)
    out = np.empty((len(guesses), len(answers)), dtype=np.uint8)
    weights = 3 ** np.arange(WORD_LENGTH)
    earlier = np.triu(np.ones((WORD_LENGTH, WORD_LENGTH), dtype=bool), k=1)  # [k, i]: k < i

    for start in range(0, len(guesses), _MATRIX_BLOCK):
        gb = g[start:start + _MATRIX_BLOCK]
        green = gb[:, None, :] == a[None, :, :]
        same_letter = gb[:, None, :, None] == a[None, :, None, :]
        available = (same_letter & ~green[:, :, None, :]).sum(axis=3)
        same_earlier = (gb[:, :, None] == gb[:, None, :]) & earlier
        prior = (~green[:, :, :, None] & same_earlier[:, None, :, :]).sum(axis=2)
        yellow = ~green & (prior < available)
        codes = (green.astype(np.int64) * 2 + yellow.astype(np.int64)) @ weights
        out[start:start + len(gb)] = codes.astype(np.uint8)
    return out


def _entropies(codes: np.ndarray) -> np.ndarray:
    """Row-wise partition entropy of a (pool, candidates) code matrix"""
    n_rows, n_cands = codes.shape
    result = np.empty(n_rows, dtype=np.float64)
    for start in range(0, n_rows, _ENTROPY_BLOCK):
        block = codes[start:start + _ENTROPY_BLOCK].astype(np.int64)
        rows = block.shape[0]
        flat = block + (np.arange(rows, dtype=np.int64)[:, None] * _N_PATTERNS)
        counts = np.bincount(flat.ravel(), minlength=rows * _N_PATTERNS).reshape(rows, _N_PATTERNS)
        c = counts.astype(np.float64)
        terms = np.zeros_like(c)
        np.log2(c, out=terms, where=c > 1)
        result[start:start + rows] = math.log2(n_cands) - (c * terms).sum(axis=1) / n_cands
    return result


# ============================================================
# Solver
# ============================================================

@dataclass(frozen=True)
class SolveResult:
    answer: str
    guesses: Tuple[str, ...]
    solved: bool

    @property
    def guesses_used(self) -> int:
        return len(self.guesses)


class Solver:
    """
    Entropy solver bound to one word list

    The pattern matrix is built on construction; the opening guess is
    computed on first use and then reused.
    """

    def __init__(self, word_list: WordList, pool_threshold: int = CANDIDATE_POOL_THRESHOLD):
        self.word_list = word_list
        self.pool_threshold = pool_threshold
        self.guesses: Tuple[str, ...] = word_list.sorted_allowed
        self.answers: Tuple[str, ...] = word_list.sorted_answers
        self._guess_index: Dict[str, int] = {w: i for i, w in enumerate(self.guesses)}
        self._answer_index: Dict[str, int] = {w: i for i, w in enumerate(self.answers)}

        logger.info("Building pattern matrix %dx%d", len(self.guesses), len(self.answers))
        self.matrix = build_pattern_matrix(self.guesses, self.answers)

        self._opening: Optional[str] = None
        self._opening_lock = threading.Lock()

    def all_candidates(self) -> CandidateSet:
        return CandidateSet(self.answers)

    def opening_guess(self) -> str:
        """Best first guess against the full answer list"""
        with self._opening_lock:
            if self._opening is None:
                self._opening = self._best_guess(self.all_candidates())
                logger.info("Opening guess for word list %s: %s", self.word_list.digest[:12], self._opening)
            return self._opening

    def _codes(self, pool: Sequence[str], candidates: Sequence[str]) -> np.ndarray:
        rows = [self._guess_index.get(w) for w in pool]
        cols = [self._answer_index.get(w) for w in candidates]
        if None in rows or None in cols:
            return build_pattern_matrix(pool, candidates)
        return self.matrix[np.ix_(rows, cols)]

    def _best_guess(self, candidates: CandidateSet) -> str:
        if len(candidates) > self.pool_threshold:
            pool = self.guesses
        else:
            pool = candidates.candidates

        scores = np.round(_entropies(self._codes(pool, candidates.candidates)), _ENTROPY_DECIMALS)
        is_candidate = np.array([w in candidates for w in pool], dtype=bool)
        lexical = np.arange(len(pool))  # pools are sorted
        best = np.lexsort((lexical, ~is_candidate, -scores))[0]
        return pool[best]

    def next_guess(self, candidates: CandidateSet, history_len: int = 0) -> str:
        """
        Choose the next guess for the remaining candidates

        Raises:
            EmptyResult: candidates is empty
        """
        if len(candidates) == 0:
            raise EmptyResult("No candidates remain")
        if len(candidates) <= 2:
            return candidates.candidates[0]
        if history_len == 0 and candidates.candidates == self.answers:
            return self.opening_guess()
        return self._best_guess(candidates)

    def filter_candidates(self, candidates: CandidateSet, guess: str, observed: FeedbackPattern) -> CandidateSet:
        """Matrix-backed filter_candidates; same result as the pure function"""
        row = self._guess_index.get(guess)
        cols = [self._answer_index.get(w) for w in candidates]
        if row is None or None in cols:
            return filter_candidates(candidates, guess, observed)
        code = pattern_code(observed)
        mask = self.matrix[row, cols] == code
        kept = tuple(w for w, keep in zip(candidates.candidates, mask) if keep)
        if not kept:
            raise EmptyResult(f"No candidate is consistent with feedback for guess {guess}")
        return CandidateSet(kept)

    def solve(self, answer: str, cap: int = DEFAULT_GUESS_CAP) -> SolveResult:
        """Play one puzzle to the end; deterministic for a fixed word list"""
        answer = answer.upper()
        if answer not in self._answer_index:
            raise UnknownAnswer(f"{answer} is not in the answer list")

        candidates = self.all_candidates()
        guesses: List[str] = []
        for turn in range(cap):
            guess = self.next_guess(candidates, history_len=turn)
            guesses.append(guess)
            feedback = score_guess(answer, guess)
            if feedback == ALL_GREEN:
                return SolveResult(answer, tuple(guesses), solved=True)
            candidates = self.filter_candidates(candidates, guess, feedback)
        return SolveResult(answer, tuple(guesses), solved=False)


_SOLVERS: Dict[str, Solver] = {}
_SOLVERS_LOCK = threading.Lock()


def solver_for(word_list: WordList) -> Solver:
    """Shared solver per word-list digest, built at most once per key"""
    key = word_list.digest
    with _SOLVERS_LOCK:
        solver = _SOLVERS.get(key)
        if solver is None:
            solver = Solver(word_list)
            _SOLVERS[key] = solver
        return solver


def next_guess(candidates: CandidateSet, allowed: WordList, history_len: int = 0) -> str:
    return solver_for(allowed).next_guess(candidates, history_len)


def solve(answer: str, word_list: WordList, cap: int = DEFAULT_GUESS_CAP) -> SolveResult:
    return solver_for(word_list).solve(answer, cap)


# ============================================================
# Benchmark
# ============================================================

@dataclass(frozen=True)
class BenchmarkSummary:
    n: int
    cap: int
    mean_guesses: float
    win_rate_within_6: float
    win_rate_within_cap: float
    failures: int
    human_reference: float = HUMAN_AVERAGE_GUESSES

    def summary_line(self) -> str:
        return (
            f"n={self.n} mean={self.mean_guesses:.3f} "
            f"win<={ORIGINAL_GUESS_CAP}={self.win_rate_within_6:.2%} "
            f"win<={self.cap}={self.win_rate_within_cap:.2%} "
            f"(human average {self.human_reference:.2f})"
        )


def benchmark(
    word_list: WordList,
    cap: int = DEFAULT_GUESS_CAP,
    answers: Optional[Sequence[str]] = None,
    progress: bool = False,
) -> Tuple[List[SolveResult], BenchmarkSummary]:
    """
    Solve every answer once; failures count as cap guesses in the mean

    Args:
        answers: subset to solve; defaults to the whole answer list
    """
    solver = solver_for(word_list)
    targets = list(answers) if answers is not None else list(solver.answers)
    results = [solver.solve(a, cap) for a in tqdm(targets, disable=not progress, desc="solving")]

    counted = [r.guesses_used if r.solved else cap for r in results]
    n = len(results)
    summary = BenchmarkSummary(
        n=n,
        cap=cap,
        mean_guesses=sum(counted) / n if n else 0.0,
        win_rate_within_6=sum(1 for r in results if r.solved and r.guesses_used <= ORIGINAL_GUESS_CAP) / n if n else 0.0,
        win_rate_within_cap=sum(1 for r in results if r.solved) / n if n else 0.0,
        failures=sum(1 for r in results if not r.solved),
    )
    return results, summary


def candidates_from_history(
    solver: Solver,
    history: Sequence[Tuple[str, FeedbackPattern]],
) -> CandidateSet:
    """Replay a feedback history over the full answer list"""
    candidates = solver.all_candidates()
    for guess, feedback in history:
        candidates = solver.filter_candidates(candidates, guess, feedback)
    return candidates
