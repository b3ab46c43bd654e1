"""
Agents - uniform act(observation) -> AgentAction interface

LLM agents (zero-shot, CoT, CoT+) prompt a chat endpoint and parse its
reply; mock agents (random, scripted, solver-backed) are deterministic
functions of (seed, observation) and never touch the network.

One agent instance serves one trial.
"""

import logging
import random
from dataclasses import dataclass, replace
from enum import Enum
from typing import Dict, List, Optional, Tuple

from .battle import IntentKind, compute_damage
from .errors import ProtocolFailure
from .parser import BATTLE_GAME, END_TURN, WORDLE_GAME, ParseFailure, format_action, parse_action
from .prompts import (
    ConfigError,
    PromptBundle,
    Transcript,
    bracket_words,
    build_prompt,
    corrective_message,
    default_bundle,
    in_play_words,
    system_text,
)
from .records import AgentAction, Observation
from .solver import CandidateSet, EmptyResult, candidates_from_history, filter_candidates, solver_for
from .transport import ChatTransport, TransportError
from .wordle import WordList, default_word_list, pattern_from_labels

logger = logging.getLogger(__name__)

# Prior exchanges replayed into prompts when the config does not say
DEFAULT_HISTORY_WINDOW: Dict[str, Optional[int]] = {WORDLE_GAME: None, BATTLE_GAME: 8}


class AgentKind(str, Enum):
    ZEROSHOT = "zeroshot"
    COT = "cot"
    COTPLUS = "cotplus"
    RANDOM = "random"
    SCRIPTED = "scripted"
    SOLVER = "solver"

    @property
    def is_llm(self) -> bool:
        return self in (AgentKind.ZEROSHOT, AgentKind.COT, AgentKind.COTPLUS)

    @property
    def uses_reasoning(self) -> bool:
        return self in (AgentKind.COT, AgentKind.COTPLUS)

    @property
    def uses_strategy(self) -> bool:
        return self is AgentKind.COTPLUS


@dataclass(frozen=True)
class AgentConfig:
    """
    Agent settings

    Mock kinds ignore the model fields. script holds actions for the
    scripted kind; policy names a built-in scripted policy ("expert").
    history_window None means the per-game default.
    """
    kind: AgentKind
    model_name: str = ""
    temperature: float = 1.0
    max_parse_retries: int = 3
    seed: int = 0
    strategy_text: Optional[str] = None
    script: Tuple[str, ...] = ()
    policy: Optional[str] = None
    history_window: Optional[int] = None
    agent_id: Optional[str] = None

    def __post_init__(self):
        if self.temperature < 0:
            raise ConfigError(f"temperature must be >= 0, got {self.temperature}")
        if self.max_parse_retries < 1:
            raise ConfigError("max_parse_retries must be >= 1")
        if self.kind is AgentKind.SCRIPTED and not self.script and not self.policy:
            raise ConfigError("scripted agent needs a script or a policy")
        if self.kind is AgentKind.COTPLUS and self.strategy_text is not None and not self.strategy_text.strip():
            raise ConfigError("CoT+ prompting needs non-empty strategy text")

    @property
    def label(self) -> str:
        if self.agent_id:
            return self.agent_id
        if self.kind is AgentKind.SCRIPTED:
            return f"scripted:{self.policy or ','.join(self.script)}"
        if self.kind.is_llm and self.model_name:
            return f"{self.kind.value}:{self.model_name}"
        return self.kind.value

    def to_dict(self) -> dict:
        return {
            "kind": self.kind.value,
            "agent_id": self.label,
            "model_name": self.model_name,
            "temperature": self.temperature,
            "max_parse_retries": self.max_parse_retries,
            "seed": self.seed,
            "strategy_text": self.strategy_text,
            "script": list(self.script),
            "policy": self.policy,
            "history_window": self.history_window,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "AgentConfig":
        return cls(
            kind=AgentKind(data["kind"]),
            model_name=data.get("model_name", ""),
            temperature=float(data.get("temperature", 1.0)),
            max_parse_retries=int(data.get("max_parse_retries", 3)),
            seed=int(data.get("seed", 0)),
            strategy_text=data.get("strategy_text"),
            script=tuple(data.get("script", ())),
            policy=data.get("policy"),
            history_window=data.get("history_window"),
            agent_id=data.get("agent_id"),
        )


def parse_agent_spec(spec: str) -> AgentConfig:
    """
    Agent config from a command-line spec

    solver | random | zeroshot | cot | cotplus | scripted:expert | scripted:CRANE,SLATE
    """
    name, _, arg = spec.strip().partition(":")
    try:
        kind = AgentKind(name.lower())
    except ValueError:
        raise ConfigError(f"Unknown agent '{spec}'; expected one of {', '.join(k.value for k in AgentKind)}") from None
    if kind is AgentKind.SCRIPTED:
        if not arg:
            raise ConfigError("scripted agent needs ':expert' or ':<action>,<action>,...'")
        if arg.lower() in BUILTIN_POLICIES:
            return AgentConfig(kind, policy=arg.lower(), agent_id=spec)
        return AgentConfig(kind, script=tuple(a.strip() for a in arg.split(",") if a.strip()), agent_id=spec)
    if kind.is_llm and arg:
        return AgentConfig(kind, model_name=arg, agent_id=spec)
    return AgentConfig(kind, agent_id=spec)


# ============================================================
# Agents
# ============================================================

class Agent:
    """Base class: act(observation) -> AgentAction"""

    def __init__(self, config: AgentConfig):
        self.config = config
        self.transcript: Optional[Transcript] = None

    @property
    def agent_id(self) -> str:
        return self.config.label

    def supports(self, game_id: str) -> bool:
        return True

    def act(self, obs: Observation) -> AgentAction:
        raise NotImplementedError

    def _action(self, obs: Observation, parsed: str) -> AgentAction:
        return AgentAction(raw_text=format_action(parsed, obs.game_id), parsed=parsed)


class LLMAgent(Agent):
    """
    Prompted agent over a chat transport

    Unparseable replies get a corrective follow-up; after max_parse_retries
    unreadable replies in a row, or a transport failure, the trial fails.
    """

    def __init__(self, config: AgentConfig, transport: ChatTransport, bundle: Optional[PromptBundle] = None):
        super().__init__(config)
        if not config.model_name:
            raise ConfigError(f"{config.kind.value} agent needs a model name")
        self.transport = transport
        self.bundle = bundle
        self.transcript = Transcript()

    def _bundle_for(self, game_id: str) -> PromptBundle:
        return self.bundle or default_bundle(game_id)

    def act(self, obs: Observation) -> AgentAction:
        bundle = self._bundle_for(obs.game_id)
        window = self.config.history_window
        if window is None:
            window = DEFAULT_HISTORY_WINDOW.get(obs.game_id)
        messages = build_prompt(replace(self.config, history_window=window), bundle, obs, self.transcript)

        if not len(self.transcript):
            self.transcript.add("system", system_text(self.config, bundle))
        self.transcript.add("user", messages[-1]["content"])

        reason = ""
        for attempt in range(1, self.config.max_parse_retries + 1):
            try:
                completion = self.transport.complete(messages, self.config.model_name, self.config.temperature)
            except TransportError as e:
                raise ProtocolFailure(f"transport failure: {e}") from e
            self.transcript.add("assistant", completion.text, completion.prompt_tokens, completion.completion_tokens)

            try:
                return parse_action(completion.text, obs.game_id)
            except ParseFailure as e:
                reason = e.reason
                logger.debug("Unparseable reply (attempt %d/%d): %s", attempt, self.config.max_parse_retries, reason)
                correction = corrective_message(reason, obs.game_id)
                replayed = bracket_words(completion.text, in_play_words(obs, self.transcript))
                messages = messages + [{"role": "assistant", "content": replayed}, correction]
                self.transcript.add("user", correction["content"])

        raise ProtocolFailure(f"{self.config.max_parse_retries} unparseable replies, last: {reason}")


class RandomAgent(Agent):
    """
    Uniform choices seeded by (seed, observation)

    Wordle: a word still consistent with the feedback so far. Other games:
    a legal action, ending the turn only when nothing else is legal.
    """

    def __init__(self, config: AgentConfig, word_list: Optional[WordList] = None):
        super().__init__(config)
        self._word_list = word_list

    @property
    def word_list(self) -> WordList:
        if self._word_list is None:
            self._word_list = default_word_list()
        return self._word_list

    def _rng(self, obs: Observation) -> random.Random:
        return random.Random(f"{self.config.seed}|{obs.game_id}|{obs.turn_index}|{obs.state_text}")

    def act(self, obs: Observation) -> AgentAction:
        rng = self._rng(obs)
        if obs.game_id == WORDLE_GAME:
            return self._action(obs, self._random_word(obs, rng))
        if not obs.legal_actions:
            raise ProtocolFailure("random agent needs legal_actions for this game")
        choices = [a for a in obs.legal_actions if a != END_TURN] or list(obs.legal_actions)
        return self._action(obs, rng.choice(choices))

    def _random_word(self, obs: Observation, rng: random.Random) -> str:
        candidates = CandidateSet(self.word_list.sorted_answers)
        try:
            for guess, feedback in _wordle_history(obs):
                candidates = filter_candidates(candidates, guess, feedback)
        except EmptyResult:
            candidates = CandidateSet(self.word_list.sorted_allowed)
        return rng.choice(candidates.candidates)


class ScriptedAgent(Agent):
    """Plays script[turn_index], repeating the last entry once the script runs out"""

    def act(self, obs: Observation) -> AgentAction:
        script = self.config.script
        parsed = script[min(obs.turn_index, len(script) - 1)]
        if obs.game_id == WORDLE_GAME:
            parsed = parsed.upper()
        return self._action(obs, parsed)


class SolverAgent(Agent):
    """Delegates every Wordle decision to the entropy solver"""

    def __init__(self, config: AgentConfig, word_list: Optional[WordList] = None):
        super().__init__(config)
        self.word_list = word_list or default_word_list()

    def supports(self, game_id: str) -> bool:
        return game_id == WORDLE_GAME

    def act(self, obs: Observation) -> AgentAction:
        if obs.game_id != WORDLE_GAME:
            raise ProtocolFailure(f"solver agent cannot play {obs.game_id}")
        solver = solver_for(self.word_list)
        history = _wordle_history(obs)
        try:
            candidates = candidates_from_history(solver, history)
            guess = solver.next_guess(candidates, history_len=len(history))
        except EmptyResult as e:
            raise ProtocolFailure(f"solver has no consistent candidate: {e}") from e
        return self._action(obs, guess)


class ExpertBattleAgent(Agent):
    """
    Rule-based battle baseline

    Priorities each decision: Spot Weakness against an attack intent, Bash
    on a target that is not vulnerable, a lethal attack, just enough block
    for the incoming attack, the hardest-hitting attack, any other
    playable card, then END TURN.
    """

    def supports(self, game_id: str) -> bool:
        return game_id == BATTLE_GAME

    def act(self, obs: Observation) -> AgentAction:
        if obs.game_id != BATTLE_GAME:
            raise ProtocolFailure(f"expert battle agent cannot play {obs.game_id}")
        return self._action(obs, self._choose(obs.structured_state, set(obs.legal_actions or ())))

    def _choose(self, state: dict, legal: set) -> str:
        energy = state["energy"]
        player = state["player"]
        living = [e for e in state["enemies"] if e["alive"]]
        if not living:
            return END_TURN
        target = min(living, key=lambda e: (e["hp"] + e["block"], e["index"]))
        t = target["index"]
        hand = [c for c in state["hand"] if c["cost"] <= energy]

        def play(card: dict) -> Optional[str]:
            action = f"PLAY {card['name']} TARGET {t}" if card["targeted"] else f"PLAY {card['name']}"
            return action if action in legal else None

        def damage(card: dict) -> int:
            return compute_damage(card["damage"], player["strength"], card["strength_multiplier"],
                                  target["vulnerable"] > 0)

        intends_attack = target["intent"] is not None and target["intent"]["type"] == IntentKind.ATTACK.value
        incoming = sum(e["intent"]["damage"] for e in living
                       if e["intent"] and e["intent"]["type"] == IntentKind.ATTACK.value)
        attacks = sorted((c for c in hand if c["damage"] > 0), key=lambda c: (-damage(c), c["cost"], c["name"]))
        blocks = sorted((c for c in hand if c["block"] > 0), key=lambda c: (-c["block"], c["name"]))

        ordered: List[dict] = []
        if intends_attack:
            ordered += [c for c in hand if c["grants_strength"] and c["requires_attack_intent"]]
        if target["vulnerable"] == 0:
            ordered += [c for c in hand if c["applies_vulnerable"]]
        ordered += [c for c in attacks if damage(c) >= target["hp"] + target["block"]]
        if incoming > player["block"]:
            ordered += blocks[:1]
        ordered += attacks
        ordered += [c for c in hand if c not in attacks and c not in blocks]
        ordered += blocks

        for card in ordered:
            action = play(card)
            if action:
                return action
        return END_TURN


BUILTIN_POLICIES = {"expert": ExpertBattleAgent}


def _wordle_history(obs: Observation):
    return [
        ("".join(entry["guess"]).upper(), pattern_from_labels(entry["feedback"]))
        for entry in obs.structured_state.get("history", [])
    ]


def create_agent(
    config: AgentConfig,
    transport: Optional[ChatTransport] = None,
    word_list: Optional[WordList] = None,
    bundle: Optional[PromptBundle] = None,
) -> Agent:
    """
    Build the agent a config describes

    Raises:
        ConfigError: LLM kind without a transport, or an unknown policy
    """
    if config.kind.is_llm:
        if transport is None:
            raise ConfigError(f"{config.kind.value} agent needs a chat endpoint (llm.endpoint_url)")
        return LLMAgent(config, transport, bundle)
    if config.kind is AgentKind.RANDOM:
        return RandomAgent(config, word_list)
    if config.kind is AgentKind.SOLVER:
        return SolverAgent(config, word_list)
    if config.policy:
        try:
            return BUILTIN_POLICIES[config.policy](config)
        except KeyError:
            raise ConfigError(f"Unknown scripted policy '{config.policy}'") from None
    return ScriptedAgent(config)
