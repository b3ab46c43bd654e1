"""run -> aggregate -> correlate -> report, end to end"""
import json
import math

import pandas as pd
import pytest

from diffprobe import Experiment
from diffprobe.agents import parse_agent_spec
from diffprobe.aggregates import aggregate
from diffprobe.catalog import HumanStatRecord, save_human_csv
from diffprobe.cli import main
from diffprobe.harness import RunConfig, load_trials, run_all, wordle_challenges
from diffprobe.stats import MetricPair, correlate_agents

from ..conftest import SMALL_WORDS

ANSWERS = ["ABBEY", "ALERT", "APPLE", "CRANE", "HELLO", "LEMON", "LLAMA", "SPEED"]


def reference_r(x, y):
    mx, my = math.fsum(x) / len(x), math.fsum(y) / len(y)
    sxy = math.fsum((a - mx) * (b - my) for a, b in zip(x, y))
    sxx = math.fsum((a - mx) ** 2 for a in x)
    syy = math.fsum((b - my) ** 2 for b in y)
    return sxy / math.sqrt(sxx * syy)


@pytest.fixture
def trials(run_dir, small_word_list):
    config = RunConfig(trials_per_challenge=3, agents=[parse_agent_spec("random")], out_dir=str(run_dir),
                       progress=False, base_seed=11)
    run_all(config, wordle_challenges(ANSWERS), word_list=small_word_list)
    return load_trials(run_dir)


def test_human_values_equal_to_aggregates_give_r_one(trials):
    aggregates = aggregate(trials)
    human = [HumanStatRecord(a.challenge_id, 100, avg_guesses=a.avg_guesses) for a in aggregates]
    if len({a.avg_guesses for a in aggregates}) < 2:
        pytest.skip("random agent produced constant averages for this seed")
    [result] = correlate_agents(aggregates, human, [MetricPair("avg_guesses", "avg_guesses")])
    assert result.r == pytest.approx(1.0, abs=1e-12)
    assert result.n == len(ANSWERS)


def test_cli_correlate_reproduces_r(trials, run_dir, tmp_path, capsys):
    human_values = {cid: 3.0 + (i * 7 % 5) / 4 for i, cid in enumerate(ANSWERS)}
    human_path = save_human_csv([HumanStatRecord(cid, 500, avg_guesses=v) for cid, v in human_values.items()],
                                tmp_path / "human.csv")
    aggregates = {a.challenge_id: a.avg_guesses for a in aggregate(trials)}
    if len(set(aggregates.values())) < 2:
        pytest.skip("random agent produced constant averages for this seed")
    expected = reference_r([aggregates[c] for c in ANSWERS], [human_values[c] for c in ANSWERS])

    assert main(["correlate", "--trials-path", str(run_dir), "--human", str(human_path), "--format", "md"]) == 0
    data = json.loads((run_dir / "report.json").read_text())
    primary = next(c for c in data["correlations"] if c["metric"] == "avg_guesses~avg_guesses")
    assert primary["r"] == pytest.approx(expected, abs=1e-12)
    assert primary["n"] == len(ANSWERS)

    frame = pd.read_csv(run_dir / "report.csv")
    assert sorted(frame["challenge_id"]) == sorted(ANSWERS)
    assert "| random |" in (run_dir / "report.md").read_text()


def test_experiment_facade(tmp_path, write_words):
    allowed = write_words("allowed.txt", SMALL_WORDS)
    human_path = save_human_csv([HumanStatRecord(cid, 500, avg_guesses=3.0 + i / 3) for i, cid in enumerate(ANSWERS)],
                                tmp_path / "human.csv")
    with Experiment(tmp_path / "run", trials_per_challenge=2, word_list_path=str(allowed)) as experiment:
        experiment.run_wordle(["solver"], answers=ANSWERS)
        assert len(experiment.records()) == 2 * len(ANSWERS)
        assert all(a.win_rate == 1.0 for a in experiment.aggregates())
        correlations = experiment.correlate(human_path)
        assert correlations[0].agent_id == "solver"
        written = experiment.report(human_path, formats=("csv", "json"))
    assert sorted(p.name for p in written) == ["correlations.csv", "report.csv", "report.json"]
