"""
Deck-battle demo - one player against scripted bosses

Combat math:
- attack damage = base + multiplier * strength, x1.5 (floored) on a vulnerable target
- block absorbs damage before hp; vulnerable never changes block gain
- 3 energy and 5 cards per turn; the discard pile is reshuffled with a
  seeded shuffle when the draw pile runs out; hand limit 10

Turn order: the player plays cards until END TURN, the hand is discarded,
each living enemy acts on its cyclic intent script, vulnerable counters
tick down, then a new player turn starts with block cleared.

All state is immutable; every transition returns a new BattleState.
"""

import hashlib
import json
import logging
import random
from dataclasses import dataclass, field, replace
from enum import Enum
from importlib import resources
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple, Union

from .errors import InputError, InputFileError
from .parser import END_TURN, ParseFailure, split_battle_action
from .records import GameResult, Observation, Outcome

logger = logging.getLogger(__name__)

ENERGY_PER_TURN = 3
HAND_SIZE = 5
HAND_LIMIT = 10
DEFAULT_TURN_CAP = 50
MAX_CONSECUTIVE_ILLEGAL = 5


class BattleError(InputError):
    pass


class IllegalPlay(BattleError):
    """Raised when a card cannot be played; the state is left unchanged"""
    pass


class TurnCapExceeded(BattleError):
    """Raised when a battle outlasts its turn cap; recorded as a flagged loss"""
    pass


# ============================================================
# Damage
# ============================================================

def compute_damage(base: int, strength: int, multiplier: int, target_vulnerable: bool) -> int:
    """
    Attack damage before block

    compute_damage(6, 0, 1, True)   -> 9
    compute_damage(14, 12, 3, False) -> 50
    """
    if base < 0:
        raise ValueError(f"base damage must be >= 0, got {base}")
    raw = max(0, base + multiplier * strength)
    if target_vulnerable:
        raw = (raw * 3) // 2
    return raw


# ============================================================
# Cards, combatants, bosses
# ============================================================

@dataclass(frozen=True)
class Card:
    name: str
    cost: int
    damage: int = 0
    block: int = 0
    strength_multiplier: int = 1
    applies_vulnerable: int = 0
    grants_strength: int = 0
    draw: int = 0
    requires_attack_intent: bool = False

    def __post_init__(self):
        if self.cost < 0:
            raise ValueError(f"Card {self.name} has negative cost")
        if not any((self.damage, self.block, self.applies_vulnerable, self.grants_strength, self.draw)):
            raise ValueError(f"Card {self.name} has no effect")

    @property
    def is_attack(self) -> bool:
        return self.damage > 0

    @property
    def targeted(self) -> bool:
        return self.is_attack or self.applies_vulnerable > 0 or self.requires_attack_intent

    def describe(self) -> str:
        parts = []
        if self.requires_attack_intent:
            parts.append("If the enemy intends to attack,")
        if self.damage:
            parts.append(f"Deal {self.damage} damage.")
            if self.strength_multiplier > 1:
                parts.append(f"Strength affects this card {self.strength_multiplier} times.")
        if self.applies_vulnerable:
            parts.append(f"Apply {self.applies_vulnerable} Vulnerable.")
        if self.block:
            parts.append(f"Gain {self.block} Block.")
        if self.grants_strength:
            verb = "gain" if self.requires_attack_intent else "Gain"
            parts.append(f"{verb} {self.grants_strength} Strength.")
        if self.draw:
            parts.append(f"Draw {self.draw} card{'s' if self.draw > 1 else ''}.")
        return " ".join(parts)

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "cost": self.cost,
            "damage": self.damage,
            "block": self.block,
            "strength_multiplier": self.strength_multiplier,
            "applies_vulnerable": self.applies_vulnerable,
            "grants_strength": self.grants_strength,
            "draw": self.draw,
            "requires_attack_intent": self.requires_attack_intent,
            "targeted": self.targeted,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "Card":
        return cls(
            name=data["name"],
            cost=int(data["cost"]),
            damage=int(data.get("damage", 0)),
            block=int(data.get("block", 0)),
            strength_multiplier=int(data.get("strength_multiplier", 1 if data.get("damage") else 0)),
            applies_vulnerable=int(data.get("applies_vulnerable", 0)),
            grants_strength=int(data.get("grants_strength", 0)),
            draw=int(data.get("draw", 0)),
            requires_attack_intent=bool(data.get("requires_attack_intent", False)),
        )


@dataclass(frozen=True)
class Combatant:
    name: str
    hp: int
    max_hp: int
    block: int = 0
    strength: int = 0
    vulnerable_turns: int = 0

    def __post_init__(self):
        if not 0 <= self.hp <= self.max_hp:
            raise ValueError(f"{self.name}: hp {self.hp} outside [0, {self.max_hp}]")
        if self.block < 0 or self.vulnerable_turns < 0:
            raise ValueError(f"{self.name}: block and vulnerable must be >= 0")

    @property
    def dead(self) -> bool:
        return self.hp == 0

    @property
    def vulnerable(self) -> bool:
        return self.vulnerable_turns > 0

    def take_damage(self, amount: int) -> "Combatant":
        absorbed = min(self.block, amount)
        return replace(self, block=self.block - absorbed, hp=max(0, self.hp - (amount - absorbed)))

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "hp": self.hp,
            "max_hp": self.max_hp,
            "block": self.block,
            "strength": self.strength,
            "vulnerable": self.vulnerable_turns,
        }


class IntentKind(str, Enum):
    ATTACK = "Attack"
    DEBUFF = "Debuff"
    BLOCK = "Block"


@dataclass(frozen=True)
class Intent:
    kind: IntentKind
    amount: int

    @classmethod
    def from_dict(cls, data: dict) -> "Intent":
        return cls(kind=IntentKind(data["type"]), amount=int(data["amount"]))


@dataclass(frozen=True)
class BossSpec:
    name: str
    hp: int
    intent_script: Tuple[Intent, ...]

    def __post_init__(self):
        if not self.intent_script:
            raise ValueError(f"Boss {self.name} has an empty intent script")
        if self.hp <= 0:
            raise ValueError(f"Boss {self.name} needs positive hp")

    @property
    def challenge_id(self) -> str:
        return "_".join(self.name.lower().split())

    def intent_at(self, turn: int) -> Intent:
        """Intent for the enemy turn following player turn `turn` (1-based)"""
        return self.intent_script[(turn - 1) % len(self.intent_script)]

    @classmethod
    def from_dict(cls, data: dict) -> "BossSpec":
        return cls(
            name=data["name"],
            hp=int(data["hp"]),
            intent_script=tuple(Intent.from_dict(i) for i in data["intents"]),
        )


# ============================================================
# Battle state and transitions
# ============================================================

@dataclass(frozen=True)
class BattleState:
    player: Combatant
    enemies: Tuple[Combatant, ...]
    bosses: Tuple[BossSpec, ...]
    energy: int
    hand: Tuple[Card, ...]
    draw_pile: Tuple[Card, ...]
    discard_pile: Tuple[Card, ...]
    turn: int
    rng_seed: int
    shuffle_count: int = 0

    @property
    def living_enemies(self) -> List[int]:
        return [i for i, e in enumerate(self.enemies) if not e.dead]

    @property
    def won(self) -> bool:
        return not self.living_enemies

    @property
    def lost(self) -> bool:
        return self.player.dead

    def intent_of(self, index: int) -> Intent:
        return self.bosses[index].intent_at(self.turn)


def _shuffled(cards: Sequence[Card], seed: int, count: int) -> Tuple[Card, ...]:
    order = list(cards)
    random.Random(f"{seed}:{count}").shuffle(order)
    return tuple(order)


def draw_cards(state: BattleState, n: int) -> BattleState:
    """Draw n cards, reshuffling the discard pile into the draw pile as needed"""
    hand = list(state.hand)
    draw = list(state.draw_pile)
    discard = list(state.discard_pile)
    shuffles = state.shuffle_count

    for _ in range(n):
        if not draw:
            if not discard:
                break
            draw = list(_shuffled(discard, state.rng_seed, shuffles))
            shuffles += 1
            discard = []
        card = draw.pop(0)
        if len(hand) < HAND_LIMIT:
            hand.append(card)
        else:
            discard.append(card)

    return replace(state, hand=tuple(hand), draw_pile=tuple(draw),
                   discard_pile=tuple(discard), shuffle_count=shuffles)


def new_battle(
    bosses: Union[BossSpec, Sequence[BossSpec]],
    deck: Sequence[Card],
    seed: int,
    player_hp: int = 80,
    player_name: str = "Ironclad",
) -> BattleState:
    if not deck:
        raise BattleError("Deck must not be empty")
    if isinstance(bosses, BossSpec):
        bosses = (bosses,)
    bosses = tuple(bosses)
    state = BattleState(
        player=Combatant(player_name, player_hp, player_hp),
        enemies=tuple(Combatant(b.name, b.hp, b.hp) for b in bosses),
        bosses=bosses,
        energy=ENERGY_PER_TURN,
        hand=(),
        draw_pile=_shuffled(deck, seed, 0),
        discard_pile=(),
        turn=1,
        rng_seed=seed,
        shuffle_count=1,
    )
    return draw_cards(state, HAND_SIZE)


def _find_card(state: BattleState, card: Union[Card, str]) -> int:
    name = card.name if isinstance(card, Card) else card
    for i, held in enumerate(state.hand):
        if held.name.lower() == name.strip().lower():
            return i
    raise IllegalPlay(f"{name} is not in hand")


def play_card(state: BattleState, card: Union[Card, str], target: Optional[int] = None) -> BattleState:
    """
    Play a card from hand

    Raises:
        IllegalPlay: card not in hand, not enough energy, bad target, or
            an attack-intent condition that does not hold
    """
    index = _find_card(state, card)
    played = state.hand[index]

    if played.cost > state.energy:
        raise IllegalPlay(f"{played.name} costs {played.cost} energy, only {state.energy} left")

    enemies = list(state.enemies)
    if played.targeted:
        if target is None:
            living = state.living_enemies
            if len(living) != 1:
                raise IllegalPlay(f"{played.name} needs a target")
            target = living[0]
        if not 0 <= target < len(enemies) or enemies[target].dead:
            raise IllegalPlay(f"No living enemy at index {target}")
        if played.requires_attack_intent and state.intent_of(target).kind is not IntentKind.ATTACK:
            raise IllegalPlay(f"{played.name} needs an enemy that intends to attack")

    player = state.player
    if played.damage:
        foe = enemies[target]
        amount = compute_damage(played.damage, player.strength, played.strength_multiplier, foe.vulnerable)
        enemies[target] = foe.take_damage(amount)
    if played.applies_vulnerable:
        foe = enemies[target]
        enemies[target] = replace(foe, vulnerable_turns=foe.vulnerable_turns + played.applies_vulnerable)
    if played.block:
        player = replace(player, block=player.block + played.block)
    if played.grants_strength:
        player = replace(player, strength=player.strength + played.grants_strength)

    hand = state.hand[:index] + state.hand[index + 1:]
    state = replace(state, player=player, enemies=tuple(enemies),
                    energy=state.energy - played.cost, hand=hand)
    if played.draw:
        state = draw_cards(state, played.draw)
    return replace(state, discard_pile=state.discard_pile + (played,))


def resolve_enemy_intents(state: BattleState) -> BattleState:
    """
    Discard the hand and let each living enemy act on its intent

    Player block stays where the attacks left it until the next player
    turn starts.
    """
    player = state.player
    enemies = list(state.enemies)
    for i, enemy in enumerate(enemies):
        if enemy.dead or player.dead:
            continue
        enemy = replace(enemy, block=0)
        intent = state.intent_of(i)
        if intent.kind is IntentKind.ATTACK:
            player = player.take_damage(compute_damage(intent.amount, enemy.strength, 1, player.vulnerable))
        elif intent.kind is IntentKind.DEBUFF:
            player = replace(player, vulnerable_turns=player.vulnerable_turns + intent.amount)
        elif intent.kind is IntentKind.BLOCK:
            enemy = replace(enemy, block=enemy.block + intent.amount)
        enemies[i] = enemy

    def tick(c: Combatant) -> Combatant:
        return replace(c, vulnerable_turns=max(0, c.vulnerable_turns - 1))

    return replace(
        state,
        player=tick(player),
        enemies=tuple(tick(e) for e in enemies),
        hand=(),
        discard_pile=state.discard_pile + state.hand,
    )


def enemy_turn(state: BattleState) -> BattleState:
    """
    Resolve the enemy turn and start the next player turn

    The player must be alive. If the enemy turn kills the player the
    returned state is final (turn is not advanced).
    """
    if state.player.dead:
        raise BattleError("enemy_turn called with a dead player")
    state = resolve_enemy_intents(state)
    if state.player.dead:
        return state
    state = replace(
        state,
        player=replace(state.player, block=0),
        energy=ENERGY_PER_TURN,
        turn=state.turn + 1,
    )
    return draw_cards(state, HAND_SIZE)


def check_turn_cap(state: BattleState, turn_cap: int) -> None:
    if not state.lost and not state.won and state.turn > turn_cap:
        raise TurnCapExceeded(f"Battle against {state.enemies[0].name} still running after {turn_cap} turns")


# ============================================================
# Observations and sessions
# ============================================================

def legal_actions(state: BattleState) -> List[str]:
    """Canonical actions the player may take now, END TURN last"""
    actions = []
    seen = set()
    for card in state.hand:
        if card.name in seen or card.cost > state.energy:
            continue
        seen.add(card.name)
        if not card.targeted:
            actions.append(f"PLAY {card.name}")
            continue
        for i in state.living_enemies:
            if card.requires_attack_intent and state.intent_of(i).kind is not IntentKind.ATTACK:
                continue
            actions.append(f"PLAY {card.name} TARGET {i}")
    actions.append(END_TURN)
    return actions


def _describe_intent(state: BattleState, index: int) -> str:
    intent = state.intent_of(index)
    enemy = state.enemies[index]
    if intent.kind is IntentKind.ATTACK:
        shown = compute_damage(intent.amount, enemy.strength, 1, state.player.vulnerable)
        return f"Attack, {shown} damage"
    if intent.kind is IntentKind.DEBUFF:
        return f"Debuff, applies {intent.amount} Vulnerable"
    return f"Block, gains {intent.amount} block"


def _intent_dict(state: BattleState, index: int) -> dict:
    intent = state.intent_of(index)
    data = {"type": intent.kind.value, "amount": intent.amount}
    if intent.kind is IntentKind.ATTACK:
        enemy = state.enemies[index]
        data["damage"] = compute_damage(intent.amount, enemy.strength, 1, state.player.vulnerable)
    return data


def render_state(state: BattleState) -> Tuple[str, dict]:
    """Natural-language and structured views of what the player can perceive"""
    p = state.player
    lines = [
        f"Boss battle, turn {state.turn}. Energy: {state.energy}/{ENERGY_PER_TURN}.",
        f"You ({p.name}): {p.hp}/{p.max_hp} hp, {p.block} block, "
        f"strength {p.strength}, vulnerable {p.vulnerable_turns}.",
    ]
    enemies = []
    for i, e in enumerate(state.enemies):
        if e.dead:
            lines.append(f"Enemy {i} ({e.name}): defeated.")
        else:
            lines.append(
                f"Enemy {i} ({e.name}): {e.hp}/{e.max_hp} hp, {e.block} block, "
                f"strength {e.strength}, vulnerable {e.vulnerable_turns}. Intent: {_describe_intent(state, i)}."
            )
        info = dict(e.to_dict(), index=i, alive=not e.dead)
        info["intent"] = None if e.dead else _intent_dict(state, i)
        enemies.append(info)

    lines.append("Hand:")
    for card in state.hand:
        lines.append(f"- {card.name} (cost {card.cost}): {card.describe()}")
    if not state.hand:
        lines.append("- (empty)")
    lines.append(f"Draw pile: {len(state.draw_pile)} cards. Discard pile: {len(state.discard_pile)} cards.")

    structured = {
        "turn": state.turn,
        "energy": state.energy,
        "player": p.to_dict(),
        "enemies": enemies,
        "hand": [c.to_dict() for c in state.hand],
        "draw_pile": len(state.draw_pile),
        "discard_pile": len(state.discard_pile),
    }
    return "\n".join(lines), structured


@dataclass
class BattleSession:
    """
    Drives one battle for an agent

    Illegal actions leave the state unchanged and are counted; after
    max_consecutive_illegal of them in a row the turn is ended for the
    player.
    """
    bosses: Union[BossSpec, Sequence[BossSpec]]
    deck: Sequence[Card]
    seed: int
    turn_cap: int = DEFAULT_TURN_CAP
    player_hp: int = 80
    player_name: str = "Ironclad"
    max_consecutive_illegal: int = MAX_CONSECUTIVE_ILLEGAL

    game_id: str = field(default="battle", init=False)
    state: BattleState = field(init=False)
    decisions: int = field(default=0, init=False)
    illegal_actions: int = field(default=0, init=False)
    turn_cap_exceeded: bool = field(default=False, init=False)
    _consecutive_illegal: int = field(default=0, init=False)
    _notice: Optional[str] = field(default=None, init=False)

    def __post_init__(self):
        if self.turn_cap < 1:
            raise ValueError("turn_cap must be >= 1")
        self.state = new_battle(self.bosses, self.deck, self.seed, self.player_hp, self.player_name)

    @property
    def finished(self) -> bool:
        return self.state.won or self.state.lost or self.turn_cap_exceeded

    def observe(self) -> Observation:
        text, structured = render_state(self.state)
        if self._notice:
            text += "\n" + self._notice
        text += "\nChoose a card to play or end your turn."
        return Observation(
            game_id=self.game_id,
            turn_index=self.decisions,
            state_text=text,
            structured_state=structured,
            legal_actions=legal_actions(self.state),
        )

    def apply(self, action_text: str) -> None:
        if self.finished:
            raise BattleError("Battle is already over")
        self.decisions += 1
        try:
            card, target = split_battle_action(action_text)
            if card is None:
                self._end_turn()
            else:
                self.state = play_card(self.state, card, target)
        except (IllegalPlay, ParseFailure) as e:
            self.illegal_actions += 1
            self._consecutive_illegal += 1
            self._notice = f"Your last action was not allowed: {e}."
            logger.debug("Illegal battle action %r: %s", action_text, e)
            if self._consecutive_illegal >= self.max_consecutive_illegal:
                self._notice += " Your turn was ended for you."
                self._end_turn(keep_notice=True)
            return
        self._consecutive_illegal = 0
        self._notice = None

    def _end_turn(self, keep_notice: bool = False) -> None:
        self._consecutive_illegal = 0
        if not keep_notice:
            self._notice = None
        self.state = enemy_turn(self.state)
        try:
            check_turn_cap(self.state, self.turn_cap)
        except TurnCapExceeded as e:
            logger.info("%s", e)
            self.turn_cap_exceeded = True
            self.state = replace(self.state, turn=self.turn_cap)

    def metrics(self) -> dict:
        lost = self.state.lost or self.turn_cap_exceeded
        return {
            "hp_remaining": 0 if lost else self.state.player.hp,
            "turns": self.state.turn,
            "illegal_actions": self.illegal_actions,
            "turn_cap_exceeded": 1 if self.turn_cap_exceeded else 0,
        }

    def result(self) -> GameResult:
        if not self.finished:
            raise BattleError("Battle is still in progress")
        if self.state.won:
            return GameResult(Outcome.WIN, self.metrics())
        flags = ("turn_cap_exceeded",) if self.turn_cap_exceeded else ()
        return GameResult(Outcome.LOSS, self.metrics(), flags)


@dataclass(frozen=True)
class BattleResult:
    outcome: Outcome
    hp_remaining: int
    turns: int
    illegal_actions: int = 0
    flags: Tuple[str, ...] = ()


def run_battle(
    boss: Union[BossSpec, Sequence[BossSpec]],
    deck: Sequence[Card],
    agent,
    seed: int,
    turn_cap: int = DEFAULT_TURN_CAP,
    player_hp: int = 80,
) -> BattleResult:
    """
    Play a battle to the end with agent.act(observation) -> AgentAction

    A battle still running after turn_cap turns is a Loss flagged
    turn_cap_exceeded; every Loss records hp_remaining = 0.
    """
    session = BattleSession(boss, deck, seed, turn_cap=turn_cap, player_hp=player_hp)
    while not session.finished:
        session.apply(agent.act(session.observe()).parsed)
    result = session.result()
    m = result.metrics
    return BattleResult(result.outcome, m["hp_remaining"], m["turns"], m["illegal_actions"], result.flags)


# ============================================================
# Fixture
# ============================================================

@dataclass(frozen=True)
class BattleFixture:
    cards: Dict[str, Card]
    decks: Dict[str, Tuple[Card, ...]]
    bosses: Tuple[BossSpec, ...]
    player_name: str
    player_hp: int
    default_deck: str
    digest: str

    def deck(self, name: Optional[str] = None) -> Tuple[Card, ...]:
        name = name or self.default_deck
        try:
            return self.decks[name]
        except KeyError:
            raise BattleError(f"Unknown deck '{name}'; known: {', '.join(sorted(self.decks))}") from None

    def boss(self, name_or_id: str) -> BossSpec:
        for boss in self.bosses:
            if name_or_id in (boss.name, boss.challenge_id):
                return boss
        raise BattleError(f"Unknown boss '{name_or_id}'")


def parse_fixture(text: str, source: str = "<fixture>") -> BattleFixture:
    try:
        data = json.loads(text)
        cards = {c["name"]: Card.from_dict(c) for c in data["cards"]}
        decks = {}
        for name, entries in data["decks"].items():
            deck = []
            for entry in entries:
                deck.extend([cards[entry["card"]]] * int(entry.get("count", 1)))
            decks[name] = tuple(deck)
        bosses = tuple(BossSpec.from_dict(b) for b in data["bosses"])
        player = data["player"]
        default_deck = data.get("default_deck") or next(iter(decks), "")
    except (ValueError, KeyError, TypeError) as e:
        raise BattleError(f"Invalid battle fixture {source}: {e}") from e
    if default_deck not in decks:
        raise BattleError(f"Invalid battle fixture {source}: default deck '{default_deck}' is not defined")
    return BattleFixture(
        cards=cards,
        decks=decks,
        bosses=bosses,
        player_name=player["name"],
        player_hp=int(player["hp"]),
        default_deck=default_deck,
        digest=hashlib.sha256(text.encode("utf-8")).hexdigest(),
    )


def load_fixture(path: Optional[Union[str, Path]] = None) -> BattleFixture:
    """Load a battle fixture file, or the packaged one when path is None"""
    if path is None:
        text = (resources.files("diffprobe") / "data" / "battle_fixture.json").read_text(encoding="utf-8")
        return parse_fixture(text, "battle_fixture.json")
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as e:
        raise InputFileError(path, e) from e
    return parse_fixture(text, str(path))
