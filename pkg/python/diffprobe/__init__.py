"""
diffprobe - measure game-challenge difficulty with agent playtesters
"""

from pathlib import Path
from typing import List, Optional, Sequence, Union

from .aggregates import ChallengeAggregate, aggregate
from .agents import AgentConfig, AgentKind, create_agent, parse_agent_spec
from .battle import BattleSession, load_fixture, run_battle
from .catalog import HumanCatalog, HumanSchema, HumanStatRecord, load_human_csv
from .errors import DiffProbeError, InputError, ProtocolFailure, RunnerIOError, StatisticsError
from .harness import RunConfig, battle_challenges, load_trials, run, wordle_challenges
from .records import Challenge, ChallengeKind, Outcome, TrialRecord
from .report import build_report, rank_challenges, render_report
from .solver import Solver, benchmark, solve
from .stats import CorrelationResult, bucket, correlate_agents, default_pairs, p_value, pearson_r
from .wordle import WordleSession, default_word_list, load_word_list, score_guess

__version__ = "0.1.0"
__all__ = [
    "Experiment",
    "RunConfig",
    "AgentConfig",
    "AgentKind",
    "Challenge",
    "ChallengeKind",
    "Outcome",
    "TrialRecord",
    "ChallengeAggregate",
    "CorrelationResult",
    "HumanCatalog",
    "HumanSchema",
    "HumanStatRecord",
    "Solver",
    "WordleSession",
    "BattleSession",
    "DiffProbeError",
    "InputError",
    "ProtocolFailure",
    "RunnerIOError",
    "StatisticsError",
    "aggregate",
    "benchmark",
    "bucket",
    "correlate_agents",
    "create_agent",
    "default_word_list",
    "load_fixture",
    "load_human_csv",
    "load_trials",
    "load_word_list",
    "p_value",
    "parse_agent_spec",
    "pearson_r",
    "rank_challenges",
    "run",
    "run_battle",
    "score_guess",
    "solve",
]


class Experiment:
    """
    High-level experiment interface over one run directory

    Example:
        with Experiment("runs/wordle", trials_per_challenge=5) as exp:
            exp.run_wordle(["solver", "random"], limit=50)
            for corr in exp.correlate("wordle_stats.csv"):
                print(corr.agent_id, corr.r, corr.p)
    """

    def __init__(self, out_dir: Union[str, Path], config: Optional[RunConfig] = None, **settings):
        base = config.to_dict() if config else {}
        base.update(settings)
        base["out_dir"] = str(out_dir)
        base.setdefault("progress", False)
        self.config = RunConfig.from_dict(base)
        self.out_dir = Path(out_dir)

    def _agents(self, agents: Sequence[Union[str, AgentConfig]]) -> List[AgentConfig]:
        return [parse_agent_spec(a) if isinstance(a, str) else a for a in agents]

    def run_wordle(self, agents: Sequence[Union[str, AgentConfig]], answers: Optional[Sequence[str]] = None,
                   limit: Optional[int] = None) -> List[TrialRecord]:
        """Run Wordle trials; answers default to the word list's answers in sorted order"""
        word_list = self.config.load_word_list()
        chosen = list(answers) if answers is not None else list(word_list.sorted_answers)
        if limit is not None:
            chosen = chosen[:limit]
        return list(run(self.config, wordle_challenges(chosen), self._agents(agents), word_list=word_list))

    def run_battle(self, agents: Sequence[Union[str, AgentConfig]],
                   bosses: Optional[Sequence[str]] = None) -> List[TrialRecord]:
        fixture = self.config.load_fixture()
        challenges = battle_challenges(fixture, self.config.deck, bosses)
        return list(run(self.config, challenges, self._agents(agents), fixture=fixture))

    def records(self) -> List[TrialRecord]:
        """Every record in the run directory"""
        return load_trials(self.out_dir)

    def aggregates(self, exclude_protocol_failures: bool = False) -> List[ChallengeAggregate]:
        return aggregate(self.records(), exclude_protocol_failures)

    def correlate(self, human: Union[str, Path, HumanCatalog],
                  exclude_protocol_failures: bool = False) -> List[CorrelationResult]:
        """Correlate per-challenge aggregates with human statistics"""
        catalog = human if isinstance(human, HumanCatalog) else HumanCatalog.load(human)
        aggregates = self.aggregates(exclude_protocol_failures)
        pairs = default_pairs({a.kind for a in aggregates})
        return correlate_agents(aggregates, list(catalog), pairs[:1]) + \
            correlate_agents(aggregates, list(catalog), pairs[1:], strict=False)

    def report(self, human: Union[str, Path, HumanCatalog],
               formats: Sequence[str] = ("csv", "json", "md", "svg")) -> List[Path]:
        catalog = human if isinstance(human, HumanCatalog) else HumanCatalog.load(human)
        correlations = self.correlate(catalog)
        difficulty = build_report(self.aggregates(), list(catalog), correlations)
        return render_report(difficulty, self.out_dir, formats)

    def close(self):
        """Nothing is held open between calls; kept for the context-manager protocol"""
        pass

    def __enter__(self):
        return self

    def __exit__(self, exc_type, exc_val, exc_tb):
        self.close()
        return False
