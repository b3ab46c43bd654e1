"""Trial runner: seeds, record log, resume, manifest and failure accounting"""
import json

import pytest

from diffprobe.agents import AgentConfig, AgentKind, parse_agent_spec
from diffprobe.errors import InputFileError, RunnerIOError
from diffprobe.harness import (
    MANIFEST_FILE,
    TRIALS_FILE,
    RunConfig,
    RunMismatch,
    TrialLog,
    battle_challenges,
    derive_seed,
    load_trials,
    run,
    run_all,
    wordle_challenges,
)
from diffprobe.prompts import ConfigError
from diffprobe.records import ChallengeKind, Outcome, TrialRecord
from diffprobe.transport import CompletionResult


def make_config(run_dir, **kwargs):
    kwargs.setdefault("trials_per_challenge", 3)
    kwargs.setdefault("agents", [parse_agent_spec("solver"), parse_agent_spec("random")])
    return RunConfig(out_dir=str(run_dir), progress=False, **kwargs)


def summary(records):
    return sorted((r.key, r.seed, r.outcome, tuple(sorted(r.metrics.items()))) for r in records)


class EchoTransport:
    def __init__(self, text):
        self.text = text

    def complete(self, messages, model_name, temperature=1.0):
        return CompletionResult(self.text, prompt_tokens=1, completion_tokens=1)


# ============================================================
# Seeds and challenge sets
# ============================================================

def test_derive_seed_is_stable_and_distinct():
    a = derive_seed(0, "APPLE", "solver", 0)
    assert a == derive_seed(0, "APPLE", "solver", 0)
    assert 0 <= a < 2 ** 63
    others = {derive_seed(0, "APPLE", "solver", 1), derive_seed(1, "APPLE", "solver", 0),
              derive_seed(0, "CRANE", "solver", 0), derive_seed(0, "APPLE", "random", 0)}
    assert a not in others
    assert len(others) == 4


def test_challenge_builders(battle_fixture):
    assert [c.id for c in wordle_challenges(["apple", "Crane"])] == ["APPLE", "CRANE"]
    battles = battle_challenges(battle_fixture, "strong", ["Hexaghost", "the_champ"])
    assert [c.id for c in battles] == ["hexaghost", "the_champ"]
    assert battles[0].params == {"boss": "Hexaghost", "deck": "strong"}


# ============================================================
# Running
# ============================================================

def test_every_tuple_is_recorded_once(run_dir, small_word_list):
    challenges = wordle_challenges(["APPLE", "LLAMA", "SPEED"])
    records = run_all(make_config(run_dir), challenges, word_list=small_word_list)
    assert len(records) == 3 * 2 * 3
    assert len({r.key for r in records}) == len(records)
    assert summary(load_trials(run_dir)) == summary(records)
    solver = [r for r in records if r.agent_id == "solver"]
    assert all(r.outcome is Outcome.WIN for r in solver)
    manifest = json.loads((run_dir / MANIFEST_FILE).read_text())
    assert len(manifest["manifest_hash"]) == 64
    assert manifest["digests"]["word_list"] == small_word_list.digest


def test_resume_skips_recorded_tuples(run_dir, small_word_list):
    challenges = wordle_challenges(["APPLE", "LLAMA"])
    config = make_config(run_dir)
    partial = []
    for record in run(config, challenges, word_list=small_word_list):
        partial.append(record)
        if len(partial) == 5:
            break
    rest = run_all(config, challenges, word_list=small_word_list)
    assert len(partial) + len(rest) == 12
    assert not {r.key for r in partial} & {r.key for r in rest}
    assert run_all(config, challenges, word_list=small_word_list) == []

    fresh = run_all(make_config(run_dir / "fresh"), challenges, word_list=small_word_list)
    assert summary(load_trials(run_dir)) == summary(fresh)


def test_results_do_not_depend_on_parallelism(run_dir, small_word_list):
    challenges = wordle_challenges(["APPLE", "ABBEY", "HELLO", "MAPLE"])
    serial = run_all(make_config(run_dir / "serial"), challenges, word_list=small_word_list)
    parallel = run_all(make_config(run_dir / "parallel", parallelism=4), challenges, word_list=small_word_list)
    assert summary(serial) == summary(parallel)


def test_different_run_in_same_directory(run_dir, small_word_list):
    challenges = wordle_challenges(["APPLE"])
    run_all(make_config(run_dir), challenges, word_list=small_word_list)
    # parallelism is not part of the run identity
    run_all(make_config(run_dir, parallelism=2), challenges, word_list=small_word_list)
    with pytest.raises(RunMismatch):
        run_all(make_config(run_dir, guess_cap=6), challenges, word_list=small_word_list)


def test_rejected_guesses_become_protocol_failures(run_dir, small_word_list):
    config = make_config(run_dir, strict=True, max_rejections=2, trials_per_challenge=1,
                         agents=[parse_agent_spec("scripted:ZZZZZ")])
    [record] = run_all(config, wordle_challenges(["APPLE"]), word_list=small_word_list)
    assert record.outcome is Outcome.PROTOCOL_FAILURE
    assert record.metrics["guesses"] == 12
    assert record.metrics["guess_cap"] == 12
    assert record.metrics["rejected_guesses"] == 2
    assert "consecutive" in record.failure_reason


def test_battle_trials(run_dir, battle_fixture):
    config = make_config(run_dir, trials_per_challenge=2, agents=[parse_agent_spec("scripted:expert")])
    records = run_all(config, battle_challenges(battle_fixture, bosses=["slime_boss"]), fixture=battle_fixture)
    assert len(records) == 2
    for record in records:
        assert record.kind is ChallengeKind.BATTLE
        assert "hp_remaining" in record.metrics
        if record.outcome is not Outcome.WIN:
            assert record.metrics["hp_remaining"] == 0
    assert records[0].seed != records[1].seed


def test_llm_trials_save_transcripts(run_dir, small_word_list):
    config = make_config(run_dir, trials_per_challenge=1,
                         agents=[AgentConfig(AgentKind.ZEROSHOT, model_name="m")])
    [record] = run_all(config, wordle_challenges(["CRANE"]), word_list=small_word_list,
                       transport=EchoTransport("GUESS: [C, R, A, N, E]"))
    assert record.outcome is Outcome.WIN
    assert record.metrics["guesses"] == 1
    lines = (run_dir / record.transcript_path).read_text().splitlines()
    assert [json.loads(line)["role"] for line in lines] == ["system", "user", "assistant"]


@pytest.mark.parametrize("agent,challenges", [
    ("solver", "battle"),
    ("scripted:expert", "wordle"),
])
def test_agent_must_fit_the_game(run_dir, battle_fixture, agent, challenges):
    sets = {"battle": battle_challenges(battle_fixture), "wordle": wordle_challenges(["APPLE"])}
    with pytest.raises(ConfigError):
        run_all(make_config(run_dir, agents=[parse_agent_spec(agent)]), sets[challenges])


def test_llm_agents_need_endpoint(run_dir, monkeypatch):
    monkeypatch.delenv("DIFFPROBE_API_KEY", raising=False)
    with pytest.raises(ConfigError):
        run_all(make_config(run_dir, agents=[parse_agent_spec("cot:m")]), wordle_challenges(["APPLE"]))


def test_duplicate_ids_rejected(run_dir):
    with pytest.raises(ConfigError):
        run_all(make_config(run_dir), wordle_challenges(["APPLE", "apple"]))
    with pytest.raises(ConfigError):
        run_all(make_config(run_dir, agents=[parse_agent_spec("random")] * 2), wordle_challenges(["APPLE"]))


def test_run_config_validation_and_round_trip():
    with pytest.raises(ConfigError):
        RunConfig(trials_per_challenge=0)
    with pytest.raises(ConfigError):
        RunConfig(parallelism=0)
    config = RunConfig(trials_per_challenge=4, guess_cap=6, agents=[parse_agent_spec("solver")])
    again = RunConfig.from_dict(config.to_dict())
    assert again.to_dict() == config.to_dict()
    assert RunConfig.from_dict({"agents": ["random"], "unknown": 1}).agents[0].kind is AgentKind.RANDOM


# ============================================================
# Trial log
# ============================================================

def record(i, cid="APPLE"):
    return TrialRecord(cid, "solver", i, i, ChallengeKind.WORDLE, Outcome.WIN, {"guesses": 3, "guess_cap": 12})


def test_torn_final_line_is_truncated(run_dir):
    log = TrialLog(run_dir / TRIALS_FILE)
    log.append(record(0))
    log.append(record(1))
    with open(log.path, "a", encoding="utf-8") as f:
        f.write('{"challenge_id": "APPLE", "agent_')
    assert [r.trial_index for r in log.load()] == [0, 1]
    assert log.path.read_text().endswith("\n")
    log.append(record(2))
    assert [r.trial_index for r in log.load()] == [0, 1, 2]


def test_complete_but_unterminated_final_line_is_redone(run_dir):
    log = TrialLog(run_dir / TRIALS_FILE)
    log.append(record(0))
    with open(log.path, "a", encoding="utf-8") as f:
        f.write(json.dumps(record(1).to_dict()))
    assert log.completed_keys() == {("APPLE", "solver", 0)}


def test_corruption_inside_the_log_is_an_error(run_dir):
    log = TrialLog(run_dir / TRIALS_FILE)
    log.append(record(0))
    with open(log.path, "a", encoding="utf-8") as f:
        f.write("garbage\n")
    log.append(record(1))
    with pytest.raises(RunnerIOError):
        log.load()


def test_load_trials_needs_a_file(tmp_path):
    with pytest.raises(InputFileError):
        load_trials(tmp_path)
