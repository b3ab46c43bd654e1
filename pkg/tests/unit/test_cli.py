"""Command-line entry point: subcommands and exit codes"""
import json

import pandas as pd
import pytest

from diffprobe.cli import EXIT_INPUT, EXIT_OK, EXIT_STATISTICS, EXIT_USAGE, game_command, main
from diffprobe.harness import MANIFEST_FILE, TRIALS_FILE, TrialLog, load_trials
from diffprobe.records import ChallengeKind, Outcome, TrialRecord

from ..conftest import GUESS_ONLY, SMALL_WORDS

HUMAN_AVG = {"APPLE": 3.6, "CRANE": 3.7, "LLAMA": 4.6, "ABBEY": 4.9}


@pytest.fixture
def words(write_words):
    return str(write_words("allowed.txt", SMALL_WORDS + GUESS_ONLY)), str(write_words("answers.txt", SMALL_WORDS))


@pytest.fixture
def human_csv(tmp_path):
    def _write(values):
        path = tmp_path / "human.csv"
        rows = ["answer,avg_guesses,sample_size"] + [f"{k.lower()},{v},1000" for k, v in values.items()]
        path.write_text("\n".join(rows) + "\n", encoding="utf-8")
        return str(path)
    return _write


def write_trials(run_dir, values, agent="solver"):
    log = TrialLog(run_dir / TRIALS_FILE)
    for i, (cid, guesses) in enumerate(sorted(values.items())):
        log.append(TrialRecord(cid, agent, 0, i, ChallengeKind.WORDLE, Outcome.WIN,
                               {"guesses": guesses, "guess_cap": 12}))


# ============================================================
# Usage
# ============================================================

@pytest.mark.parametrize("argv", [
    [],
    ["no-such-command"],
    ["run", "--trials", "many"],
    ["correlate"],
    ["solve"],
    ["protocol-check"],
])
def test_usage_errors_exit_64(argv, capsys):
    assert main(argv) == EXIT_USAGE
    assert "usage" in capsys.readouterr().err.lower()


def test_help_exits_zero(capsys):
    with pytest.raises(SystemExit) as info:
        main(["--help"])
    assert info.value.code == 0
    assert "bench-solver" in capsys.readouterr().out


@pytest.mark.parametrize("argv, text", [
    (["demo-battle", "--help"], "player turns before the battle counts as a Loss"),
    (["protocol-check", "--help"], "seconds to wait for the game's hello"),
    (["protocol-check", "--help"], "seconds to wait for each later message"),
    (["run", "--help"], "game command as one shell-quoted string"),
])
def test_help_documents_flags(argv, text, capsys):
    with pytest.raises(SystemExit):
        main(argv)
    assert text in " ".join(capsys.readouterr().out.split())


# ============================================================
# Solver commands
# ============================================================

def test_bench_solver(words, tmp_path, capsys):
    allowed, answers = words
    out = tmp_path / "bench"
    assert main(["bench-solver", "--allowed", allowed, "--answers", answers, "--out-dir", str(out), "-q"]) == EXIT_OK
    line = capsys.readouterr().out
    assert f"n={len(SMALL_WORDS)}" in line
    assert "human average 3.97" in line
    frame = pd.read_csv(out / "benchmark.csv")
    assert sorted(frame["answer"]) == sorted(SMALL_WORDS)
    assert frame["solved"].all()


def test_solve_prints_trace(words, capsys):
    allowed, answers = words
    assert main(["solve", "--answer", "melon", "--allowed", allowed, "--answers", answers]) == EXIT_OK
    out = capsys.readouterr().out
    assert "[M, E, L, O, N] -> [Green, Green, Green, Green, Green]" in out
    assert "solved in" in out


def test_solve_unknown_answer_is_input_error(words, capsys):
    allowed, answers = words
    assert main(["solve", "--answer", "ZZZZZ", "--allowed", allowed, "--answers", answers]) == EXIT_INPUT
    assert "ZZZZZ" in capsys.readouterr().err


def test_bad_word_file_is_input_error(write_words):
    path = write_words("bad.txt", ["APPLE", "TOOLONG"])
    assert main(["bench-solver", "--allowed", str(path), "-q"]) == EXIT_INPUT


# ============================================================
# run and correlate
# ============================================================

def test_run_writes_trials_and_manifest(words, run_dir, capsys):
    allowed, answers = words
    argv = ["run", "--agent", "solver", "--allowed", allowed, "--answers", answers, "--limit", "3",
            "--trials", "2", "--out-dir", str(run_dir), "-q"]
    assert main(argv) == EXIT_OK
    assert "Win=6" in capsys.readouterr().out
    assert len(load_trials(run_dir)) == 6
    manifest = json.loads((run_dir / MANIFEST_FILE).read_text())
    assert manifest["effective_config"]["limit"] == 3

    # rerun resumes with nothing left to do
    assert main(argv) == EXIT_OK
    assert "nothing to do" in capsys.readouterr().out


def test_run_battle(run_dir, capsys):
    argv = ["run", "--game", "battle", "--agent", "scripted:expert", "--boss", "slime_boss",
            "--trials", "1", "--out-dir", str(run_dir), "-q"]
    assert main(argv) == EXIT_OK
    [record] = load_trials(run_dir)
    assert record.challenge_id == "slime_boss"


def test_run_external_needs_command(run_dir):
    assert main(["run", "--game", "external", "--agent", "random", "--out-dir", str(run_dir)]) == EXIT_INPUT


def test_game_command_splits_shell_quoting():
    assert game_command('python "my game.py" --level 3') == ["python", "my game.py", "--level", "3"]
    assert game_command(["./game", "a b"]) == ["./game", "a b"]
    assert game_command(None) == []


def test_run_external_bad_game_cmd(run_dir):
    argv = ["run", "--game", "external", "--agent", "random", "--challenge", "c1", "--out-dir", str(run_dir)]
    assert main(argv + ["--game-cmd", 'python "unclosed']) == EXIT_INPUT
    assert main(argv + ["--game-cmd", "python game.py", "--command", "python", "game.py"]) == EXIT_USAGE


def test_run_llm_without_endpoint_is_input_error(run_dir, monkeypatch):
    monkeypatch.delenv("DIFFPROBE_API_KEY", raising=False)
    assert main(["run", "--agent", "cot", "--model", "m", "--limit", "1", "--out-dir", str(run_dir), "-q"]) == EXIT_INPUT


def test_secret_in_config_file_is_rejected(tmp_path, run_dir):
    config = tmp_path / "config.json"
    config.write_text(json.dumps({"llm": {"api_key": "sk-live"}}))
    assert main(["run", "--config", str(config), "--agent", "solver", "--out-dir", str(run_dir)]) == EXIT_INPUT


def test_correlate_writes_reports(run_dir, human_csv, capsys):
    write_trials(run_dir, HUMAN_AVG)
    argv = ["correlate", "--trials-path", str(run_dir), "--human", human_csv(HUMAN_AVG), "--format", "md"]
    assert main(argv) == EXIT_OK
    out = capsys.readouterr().out
    assert "r=1.000" in out or "r= 1.000" in out
    assert "Strong" in out
    for name in ("correlations.csv", "report.csv", "report.json", "report.md"):
        assert (run_dir / name).exists()


def test_correlate_out_dir(run_dir, tmp_path, human_csv):
    write_trials(run_dir, {k: v + 1 for k, v in HUMAN_AVG.items()})
    out = tmp_path / "reports"
    assert main(["correlate", "--trials-path", str(run_dir), "--human", human_csv(HUMAN_AVG),
                 "--out-dir", str(out), "--per-trial"]) == EXIT_OK
    data = json.loads((out / "report.json").read_text())
    assert any(c["agent"] == "solver" for c in data["correlations"])
    assert (out / "correlations.csv").exists()
    assert not (run_dir / "report.csv").exists()


def test_correlate_constant_human_values_is_statistics_error(run_dir, human_csv, capsys):
    write_trials(run_dir, HUMAN_AVG)
    flat = {k: 4.0 for k in HUMAN_AVG}
    assert main(["correlate", "--trials-path", str(run_dir), "--human", human_csv(flat)]) == EXIT_STATISTICS
    assert "diffprobe:" in capsys.readouterr().err


def test_correlate_disjoint_ids_is_statistics_error(run_dir, human_csv):
    write_trials(run_dir, HUMAN_AVG)
    other = {"SLATE": 3.5, "TRACE": 3.9, "MAPLE": 4.1}
    assert main(["correlate", "--trials-path", str(run_dir), "--human", human_csv(other)]) == EXIT_STATISTICS


def test_correlate_missing_inputs_is_input_error(run_dir, tmp_path, human_csv):
    assert main(["correlate", "--trials-path", str(run_dir), "--human", str(tmp_path / "absent.csv")]) == EXIT_INPUT
    assert main(["correlate", "--trials-path", str(run_dir), "--human", human_csv(HUMAN_AVG)]) == EXIT_INPUT


# ============================================================
# Battle demo
# ============================================================

def test_demo_battle_in_process(capsys):
    assert main(["demo-battle", "--boss", "The Guardian"]) == EXIT_OK
    out = capsys.readouterr().out
    assert out.startswith("The Guardian: ")
    assert "hp_remaining=" in out


def test_demo_battle_unknown_boss(capsys):
    assert main(["demo-battle", "--boss", "Time Eater"]) == EXIT_INPUT
