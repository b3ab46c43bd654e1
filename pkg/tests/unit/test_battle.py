"""Card battle demo: damage rules, card effects, enemy turns, sessions, fixture"""
from dataclasses import replace

import pytest

from diffprobe.agents import AgentConfig, AgentKind, ExpertBattleAgent
from diffprobe.battle import (
    END_TURN,
    ENERGY_PER_TURN,
    HAND_SIZE,
    BattleError,
    BattleSession,
    IllegalPlay,
    compute_damage,
    enemy_turn,
    legal_actions,
    load_fixture,
    new_battle,
    parse_fixture,
    play_card,
    render_state,
    run_battle,
)
from diffprobe.errors import InputFileError
from diffprobe.records import Outcome


@pytest.fixture
def cards(battle_fixture):
    return battle_fixture.cards


@pytest.fixture
def slime(battle_fixture):
    return battle_fixture.boss("slime_boss")


def with_hand(state, *cards, energy=ENERGY_PER_TURN):
    return replace(state, hand=tuple(cards), energy=energy)


@pytest.fixture
def start(battle_fixture, slime):
    return new_battle(slime, battle_fixture.deck(), seed=7)


# ============================================================
# Damage
# ============================================================

@pytest.mark.parametrize("base,strength,multiplier,vulnerable,expected", [
    (6, 0, 1, False, 6),
    (6, 0, 1, True, 9),
    (8, 0, 1, False, 8),
    (14, 12, 3, False, 50),
    (14, 15, 3, False, 59),
    (14, 12, 3, True, 75),
    (5, -10, 1, False, 0),
])
def test_compute_damage(base, strength, multiplier, vulnerable, expected):
    assert compute_damage(base, strength, multiplier, vulnerable) == expected


def test_compute_damage_rejects_negative_base():
    with pytest.raises(ValueError):
        compute_damage(-1, 0, 1, False)


# ============================================================
# Card effects
# ============================================================

def test_strike_deals_six(start, cards):
    state = play_card(with_hand(start, cards["Strike"]), "Strike", 0)
    assert state.enemies[0].hp == 90 - 6
    assert state.energy == ENERGY_PER_TURN - 1
    assert state.discard_pile[-1] == cards["Strike"]


def test_bash_then_strike_uses_vulnerable(start, cards):
    state = with_hand(start, cards["Bash"], cards["Strike"])
    state = play_card(state, "Bash", 0)
    assert state.enemies[0].hp == 90 - 8
    assert state.enemies[0].vulnerable_turns == 2
    state = play_card(state, "strike", 0)
    assert state.enemies[0].hp == 90 - 8 - 9


def test_heavy_blade_scales_with_strength(start, cards):
    state = with_hand(start, cards["Heavy Blade"])
    state = replace(state, player=replace(state.player, strength=12))
    assert play_card(state, "Heavy Blade", 0).enemies[0].hp == 90 - 50


def test_spot_weakness_needs_attack_intent(start, cards):
    state = with_hand(start, cards["Spot Weakness"])
    # turn 1 intent of the first boss is an attack
    assert play_card(state, "Spot Weakness", 0).player.strength == 3
    debuff_turn = replace(state, turn=2)
    with pytest.raises(IllegalPlay):
        play_card(debuff_turn, "Spot Weakness", 0)
    assert not any(a.startswith("PLAY Spot Weakness") for a in legal_actions(debuff_turn))


def test_defend_and_shrug_block(start, cards):
    state = with_hand(start, cards["Defend"], cards["Shrug It Off"])
    state = play_card(state, "Defend")
    state = play_card(state, "Shrug It Off")
    assert state.player.block == 13
    assert len(state.hand) == 1  # shrug draws a card


@pytest.mark.parametrize("play,reason", [
    (("Catalyst", 0), "not in hand"),
    (("Strike", 3), "No living enemy"),
])
def test_illegal_plays(start, cards, play, reason):
    with pytest.raises(IllegalPlay) as info:
        play_card(with_hand(start, cards["Strike"]), *play)
    assert reason in str(info.value)


def test_energy_is_enforced(start, cards):
    state = with_hand(start, cards["Bash"], cards["Heavy Blade"])
    state = play_card(state, "Bash", 0)
    with pytest.raises(IllegalPlay):
        play_card(state, "Heavy Blade", 0)


# ============================================================
# Enemy turns
# ============================================================

def test_block_absorbs_attack_and_resets(start, cards):
    state = play_card(with_hand(start, cards["Defend"]), "Defend")
    state = enemy_turn(state)
    assert state.player.hp == 80 - (8 - 5)
    assert state.player.block == 0
    assert state.turn == 2
    assert state.energy == ENERGY_PER_TURN
    assert len(state.hand) == HAND_SIZE


def test_debuff_makes_next_attack_hit_harder(start):
    state = enemy_turn(enemy_turn(start))
    assert state.player.vulnerable_turns == 1
    text, structured = render_state(state)
    assert "Attack, 24 damage" in text
    assert structured["enemies"][0]["intent"]["damage"] == 24


def test_cards_are_conserved_across_turns(start, battle_fixture):
    state = start
    for _ in range(6):
        state = enemy_turn(state)
        if state.lost:
            break
        total = len(state.hand) + len(state.draw_pile) + len(state.discard_pile)
        assert total == len(battle_fixture.deck())


def test_legal_actions_end_with_end_turn(start, cards):
    actions = legal_actions(with_hand(start, cards["Strike"], cards["Defend"], cards["Strike"]))
    assert actions == ["PLAY Strike TARGET 0", "PLAY Defend", END_TURN]


# ============================================================
# Sessions
# ============================================================

def test_illegal_action_keeps_state_and_counts(battle_fixture, slime):
    session = BattleSession(slime, battle_fixture.deck(), seed=3)
    before = session.state
    session.apply("PLAY Catalyst TARGET 0")
    assert session.state == before
    assert session.illegal_actions == 1
    assert "not allowed" in session.observe().state_text


def test_repeated_illegal_actions_end_the_turn(battle_fixture, slime):
    session = BattleSession(slime, battle_fixture.deck(), seed=3, max_consecutive_illegal=2)
    session.apply("dance")
    session.apply("dance")
    assert session.state.turn == 2
    assert "ended for you" in session.observe().state_text


def test_turn_cap_is_a_flagged_loss(battle_fixture, slime):
    session = BattleSession(slime, battle_fixture.deck(), seed=3, turn_cap=1)
    session.apply(END_TURN)
    assert session.finished
    result = session.result()
    assert result.outcome is Outcome.LOSS
    assert result.flags == ("turn_cap_exceeded",)
    assert result.metrics["hp_remaining"] == 0


def test_result_before_the_end_raises(battle_fixture, slime):
    with pytest.raises(BattleError):
        BattleSession(slime, battle_fixture.deck(), seed=3).result()


def test_expert_battles_are_deterministic_and_legal(battle_fixture):
    agent = ExpertBattleAgent(AgentConfig(AgentKind.SCRIPTED, policy="expert"))
    for boss in battle_fixture.bosses:
        first = run_battle(boss, battle_fixture.deck(), agent, seed=11)
        again = run_battle(boss, battle_fixture.deck(), agent, seed=11)
        assert first == again
        assert first.illegal_actions == 0
        if first.outcome is Outcome.LOSS:
            assert first.hp_remaining == 0
        else:
            assert 0 < first.hp_remaining <= 80


# ============================================================
# Fixture
# ============================================================

def test_packaged_fixture(battle_fixture):
    assert [b.challenge_id for b in battle_fixture.bosses] == [
        "slime_boss", "hexaghost", "the_guardian", "the_collector", "the_champ", "bronze_automaton",
    ]
    assert len(battle_fixture.deck("starter")) == 10
    assert len(battle_fixture.deck()) == 13
    assert battle_fixture.cards["Bash"].applies_vulnerable == 2
    assert len(battle_fixture.digest) == 64


def test_unknown_deck_and_boss(battle_fixture):
    with pytest.raises(BattleError):
        battle_fixture.deck("legendary")
    with pytest.raises(BattleError):
        battle_fixture.boss("Time Eater")


def test_bad_fixture_files(tmp_path):
    with pytest.raises(BattleError):
        parse_fixture("{not json")
    with pytest.raises(BattleError):
        parse_fixture('{"cards": [], "decks": {}, "bosses": [], "player": {"name": "x", "hp": 1}}')
    with pytest.raises(InputFileError):
        load_fixture(tmp_path / "missing.json")
