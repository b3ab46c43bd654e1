"""
Prompt bundles, transcripts and chat message construction

The shipped prompt texts are reconstructions: they follow the structure of
zero-shot, chain-of-thought and strategy-augmented prompting but are not the
wording of any published experiment.

Words are always shown to the model as bracketed letter lists
("[A, P, P, L, E]") because models read whole words as opaque tokens and
then cannot reason about single letters.
"""

import json
import re
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import TYPE_CHECKING, AbstractSet, Dict, FrozenSet, List, Optional, Set, Union

from .errors import InputError
from .records import Observation
from .wordle import bracket

if TYPE_CHECKING:
    from .agents import AgentConfig


class ConfigError(InputError):
    """Raised when an agent configuration cannot build a prompt"""
    pass


Message = Dict[str, str]


# ============================================================
# Prompt bundles
# ============================================================

@dataclass(frozen=True)
class PromptBundle:
    rules_text: str
    io_format_text: str
    reasoning_text: str = ""
    strategy_text: str = ""

    def __post_init__(self):
        if not self.rules_text or not self.io_format_text:
            raise ValueError("PromptBundle needs rules_text and io_format_text")


WORDLE_RULES = """You are playing Wordle.
A secret English word of five letters has been chosen. You try to find it by guessing five-letter words.
Every word in this conversation is written as a list of letters in square brackets, for example [S, T, O, N, E].

After each guess you receive one verdict per letter, in order:
- Green: the letter is in the secret word at this position.
- Yellow: the letter is in the secret word but at a different position.
- Gray: the letter is not in the secret word, or it already appears as often as the secret word allows.

A letter that appears twice in your guess only earns two colored verdicts if the secret word contains it twice.
Guesses must be real English words. You win by getting all five verdicts Green within the allowed number of guesses."""

WORDLE_IO_FORMAT = """Answer format:
End your reply with one final line holding your guess as a list of five letters, exactly like this:
GUESS: [S, T, O, N, E]
Nothing may follow that line."""

WORDLE_REASONING = """Think step by step before answering:
1. List the letters known to be at fixed positions (Green).
2. List the letters known to be in the word but not at the positions where they were tried (Yellow).
3. List the letters ruled out (Gray).
4. Write down a few candidate words, as letter lists, that satisfy every constraint above.
5. Check each candidate letter by letter against every earlier verdict, then pick one."""

WORDLE_STRATEGY = """Expert advice for Wordle:
- Open with a word of five different, common letters, such as [S, L, A, T, E] or [C, R, A, N, E].
- Vowels A, E and O and the consonants R, S, T, L and N are the most frequent letters; test them early.
- Never reuse a Gray letter, always keep Green letters in place, and move Yellow letters to new positions.
- When many candidates remain, a guess that tests several new letters is worth more than one that can only win.
- When two or three candidates remain, guess one of them.
- Repeated letters are common in answers; consider them once the usual letters are exhausted."""

WORDLE_BUNDLE = PromptBundle(
    rules_text=WORDLE_RULES,
    io_format_text=WORDLE_IO_FORMAT,
    reasoning_text=WORDLE_REASONING,
    strategy_text=WORDLE_STRATEGY,
)

BATTLE_RULES = """You are playing a turn-based card battle against a boss.
Each turn you have 3 energy and a hand of cards. Playing a card costs its energy.
Attacks deal damage to an enemy; an enemy's block absorbs damage first.
Block cards give you block that absorbs the damage of the next enemy attack; your block resets at the start of your turn.
Vulnerable makes a combatant take 50% more attack damage. Strength adds to the damage of every attack.
Each enemy shows its intent for its next action. You win when every enemy has 0 hp and lose when you reach 0 hp."""

BATTLE_IO_FORMAT = """Answer format:
End your reply with exactly one final line, either
PLAY: <card name> | TARGET: <enemy index>
for a card that targets an enemy, or
PLAY: <card name>
for a card without a target, or
END TURN
to end your turn."""

BATTLE_REASONING = """Think step by step about the enemy's intent and your remaining energy before choosing a card."""

BATTLE_BUNDLE = PromptBundle(
    rules_text=BATTLE_RULES,
    io_format_text=BATTLE_IO_FORMAT,
    reasoning_text=BATTLE_REASONING,
)

GENERIC_BUNDLE = PromptBundle(
    rules_text="You are playing a game. Read the state carefully and choose one of the legal actions.",
    io_format_text="End your reply with one final line of the form\nACTION: <one legal action, copied exactly>",
    reasoning_text="Think step by step about the consequences of each legal action before choosing.",
)


def default_bundle(game_id: str) -> PromptBundle:
    if game_id == "wordle":
        return WORDLE_BUNDLE
    if game_id == "battle":
        return BATTLE_BUNDLE
    return GENERIC_BUNDLE


# ============================================================
# Word rendering
# ============================================================

# Five-letter tokens in any case; GUESS is the answer marker
_WORD_TOKEN = re.compile(r"\b[A-Za-z]{5}\b")
_LETTER_LIST = re.compile(r"\[\s*" + r"\s*,\s*".join([r"([A-Za-z])"] * 5) + r"\s*\]")
_MARKERS = frozenset({"GUESS"})


def listed_words(text: str) -> Set[str]:
    """Words text already shows as bracketed letter lists"""
    return {"".join(m.groups()).upper() for m in _LETTER_LIST.finditer(text)}


def in_play_words(obs: Observation, transcript: Optional["Transcript"] = None) -> FrozenSet[str]:
    """
    Words in play for one decision

    Guesses from the observation's history plus every letter list shown in
    the observation or the conversation so far.
    """
    words = listed_words(obs.state_text)
    for entry in obs.structured_state.get("history", []):
        if isinstance(entry, dict) and isinstance(entry.get("guess"), (list, str)):
            words.add("".join(entry["guess"]).upper())
    if transcript is not None:
        for entry in transcript.entries:
            words |= listed_words(entry.content)
    return frozenset(words)


def _is_in_play(token: str, in_play: AbstractSet[str]) -> bool:
    if token in _MARKERS:
        return False
    return token.isupper() or token.upper() in in_play


def bracket_words(text: str, in_play: AbstractSet[str] = frozenset()) -> str:
    """
    Rewrite every in-play word in text as a bracketed letter list

    Upper-case five-letter tokens always count as in play; other tokens
    count when their upper-case form is in `in_play`.
    """
    return _WORD_TOKEN.sub(
        lambda m: bracket(m.group().upper()) if _is_in_play(m.group(), in_play) else m.group(), text
    )


def find_bare_words(text: str, in_play: AbstractSet[str] = frozenset()) -> List[str]:
    """In-play words that appear outside bracketed-list form"""
    return [tok for tok in _WORD_TOKEN.findall(text) if _is_in_play(tok, in_play)]


# ============================================================
# Transcripts
# ============================================================

@dataclass
class TranscriptEntry:
    role: str
    content: str
    timestamp: float = field(default_factory=time.time)
    prompt_tokens: Optional[int] = None
    completion_tokens: Optional[int] = None

    def to_dict(self) -> dict:
        data = {"role": self.role, "content": self.content, "timestamp": self.timestamp}
        if self.prompt_tokens is not None:
            data["prompt_tokens"] = self.prompt_tokens
        if self.completion_tokens is not None:
            data["completion_tokens"] = self.completion_tokens
        return data


class Transcript:
    """
    Ordered chat history of one trial

    Two assistant entries are never adjacent.
    """

    ROLES = ("system", "user", "assistant")

    def __init__(self):
        self.entries: List[TranscriptEntry] = []

    def __len__(self) -> int:
        return len(self.entries)

    def add(self, role: str, content: str, prompt_tokens: Optional[int] = None,
            completion_tokens: Optional[int] = None) -> TranscriptEntry:
        if role not in self.ROLES:
            raise ValueError(f"Unknown transcript role: {role}")
        if role == "assistant" and self.entries and self.entries[-1].role == "assistant":
            raise ValueError("Two consecutive assistant entries in transcript")
        entry = TranscriptEntry(role, content, prompt_tokens=prompt_tokens, completion_tokens=completion_tokens)
        self.entries.append(entry)
        return entry

    @property
    def prompt_tokens(self) -> int:
        return sum(e.prompt_tokens or 0 for e in self.entries)

    @property
    def completion_tokens(self) -> int:
        return sum(e.completion_tokens or 0 for e in self.entries)

    def exchanges(self, window: Optional[int] = None) -> List[TranscriptEntry]:
        """
        Non-system entries of the last `window` exchanges

        An exchange starts at a user entry and runs to the next one.
        """
        chat = [e for e in self.entries if e.role != "system"]
        if window is None:
            return chat
        if window <= 0:
            return []
        starts = [i for i, e in enumerate(chat) if e.role == "user"]
        if len(starts) <= window:
            return chat
        return chat[starts[-window]:]

    def save(self, path: Union[str, Path]) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", encoding="utf-8") as f:
            for entry in self.entries:
                f.write(json.dumps(entry.to_dict(), separators=(",", ":")) + "\n")
        return path

    @classmethod
    def load(cls, path: Union[str, Path]) -> "Transcript":
        transcript = cls()
        with open(path, "r", encoding="utf-8") as f:
            for line in f:
                if line.strip():
                    data = json.loads(line)
                    entry = transcript.add(data["role"], data["content"],
                                           data.get("prompt_tokens"), data.get("completion_tokens"))
                    entry.timestamp = data.get("timestamp", entry.timestamp)
        return transcript


# ============================================================
# Message construction
# ============================================================

def system_text(config: "AgentConfig", bundle: PromptBundle) -> str:
    parts = [bundle.rules_text, bundle.io_format_text]
    if config.kind.uses_reasoning:
        parts.append(bundle.reasoning_text)
    if config.kind.uses_strategy:
        strategy = config.strategy_text if config.strategy_text is not None else bundle.strategy_text
        if not strategy or not strategy.strip():
            raise ConfigError("CoT+ prompting needs non-empty strategy text")
        parts.append(strategy)
    return "\n\n".join(p for p in parts if p)


def build_prompt(
    config: "AgentConfig",
    bundle: PromptBundle,
    obs: Observation,
    transcript: Transcript,
) -> List[Message]:
    """
    Chat messages for one decision

    system = rules + io format (+ reasoning for CoT kinds, + strategy for
    CoT+), then prior turns from the transcript, then the observation.
    Words in play are bracketed in any letter case. Deterministic in its
    inputs.

    Raises:
        ConfigError: CoT+ without strategy text
    """
    in_play = in_play_words(obs, transcript)
    messages: List[Message] = [{"role": "system", "content": system_text(config, bundle)}]
    for entry in transcript.exchanges(config.history_window):
        messages.append({"role": entry.role, "content": bracket_words(entry.content, in_play)})
    messages.append({"role": "user", "content": bracket_words(obs.state_text, in_play)})
    return messages


def corrective_message(reason: str, game_id: str) -> Message:
    """User message sent after an unparseable reply"""
    if game_id == "wordle":
        example = "GUESS: [S, T, O, N, E]"
    elif game_id == "battle":
        example = "PLAY: <card name> | TARGET: 0"
    else:
        example = "ACTION: <one legal action>"
    content = (
        f"Your reply could not be read ({reason}). "
        f"Reply again and end with one final line in the exact form {example}"
    )
    return {"role": "user", "content": content}
