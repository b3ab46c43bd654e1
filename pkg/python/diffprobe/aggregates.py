"""
Aggregation of trial records into per-challenge difficulty metrics

Failure accounting:
- a failed or aborted Wordle trial counts as guess_cap guesses
- a lost or aborted battle counts as 0 hp remaining
- ProtocolFailure is a loss, counted separately so it can be excluded
"""

import logging
import math
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

from .errors import MissingMetric
from .records import ChallengeKind, Outcome, TrialRecord

logger = logging.getLogger(__name__)

GUESSES = "guesses"
GUESS_CAP = "guess_cap"
HP_REMAINING = "hp_remaining"
TURNS = "turns"

# Metrics whose failure value is imputed rather than read from the record
_IMPUTED = (GUESSES, HP_REMAINING)
# Bookkeeping fields that are not averaged into the extra metrics
_NOT_AVERAGED = {GUESSES, HP_REMAINING, TURNS, GUESS_CAP, "solved"}


def group_records(
    records: Iterable[TrialRecord],
    keys: Sequence[str] = ("agent_id", "challenge_id"),
) -> Dict[Tuple, List[TrialRecord]]:
    """
    Group records by the given attributes

    Returns: Dict mapping group key -> records in that group
    """
    groups = defaultdict(list)
    for record in records:
        groups[tuple(getattr(record, k) for k in keys)].append(record)
    return dict(groups)


def metric_value(record: TrialRecord, metric: str) -> Optional[float]:
    """
    The value a record contributes to the mean of `metric`

    Wins report their own value. Non-wins contribute guess_cap for
    guesses and 0 for hp_remaining. Other metrics are read as recorded and
    None means the record does not contribute.

    Raises:
        MissingMetric: a record lacks what its kind needs
    """
    won = record.outcome is Outcome.WIN
    where = f"{record.challenge_id}/{record.agent_id}/{record.trial_index}"

    if metric == GUESSES:
        if won:
            if GUESSES not in record.metrics:
                raise MissingMetric(GUESSES, where)
            return float(record.metrics[GUESSES])
        if GUESS_CAP not in record.metrics:
            raise MissingMetric(GUESS_CAP, where)
        return float(record.metrics[GUESS_CAP])

    if metric == HP_REMAINING:
        if won:
            if HP_REMAINING not in record.metrics:
                raise MissingMetric(HP_REMAINING, where)
            return float(record.metrics[HP_REMAINING])
        return 0.0

    value = record.metrics.get(metric)
    return None if value is None else float(value)


def compute_mean(metric: str, records: Sequence[TrialRecord]) -> Optional[float]:
    """Mean of a metric over records under the failure-accounting rules; None if no record has it"""
    values = [v for v in (metric_value(r, metric) for r in records) if v is not None]
    if not values:
        return None
    return math.fsum(values) / len(values)


def _metric_for_kind(kind: ChallengeKind, records: Sequence[TrialRecord], metric: str) -> bool:
    if kind is ChallengeKind.WORDLE:
        return metric == GUESSES
    if kind is ChallengeKind.BATTLE:
        return metric == HP_REMAINING
    return any(metric in r.metrics for r in records)


@dataclass
class ChallengeAggregate:
    agent_id: str
    challenge_id: str
    kind: ChallengeKind
    n_trials: int
    wins: int
    win_rate: float
    protocol_failure_count: int = 0
    avg_guesses: Optional[float] = None
    avg_guesses_solved: Optional[float] = None
    avg_hp_remaining: Optional[float] = None
    avg_turns: Optional[float] = None
    metrics: Dict[str, float] = field(default_factory=dict)

    def get(self, metric: str) -> float:
        """
        A named aggregate value: a field (win_rate, avg_guesses, ...) or an
        extra metric mean

        Raises:
            MissingMetric: the aggregate has no such value
        """
        value = getattr(self, metric, None) if metric in _AGGREGATE_FIELDS else self.metrics.get(metric)
        if value is None:
            raise MissingMetric(metric, f"{self.agent_id}/{self.challenge_id}")
        return float(value)

    def to_dict(self) -> dict:
        return {
            "agent_id": self.agent_id,
            "challenge_id": self.challenge_id,
            "kind": self.kind.value,
            "n_trials": self.n_trials,
            "wins": self.wins,
            "win_rate": self.win_rate,
            "protocol_failure_count": self.protocol_failure_count,
            "avg_guesses": self.avg_guesses,
            "avg_guesses_solved": self.avg_guesses_solved,
            "avg_hp_remaining": self.avg_hp_remaining,
            "avg_turns": self.avg_turns,
            "metrics": dict(self.metrics),
        }


_AGGREGATE_FIELDS = {
    "n_trials", "wins", "win_rate", "protocol_failure_count",
    "avg_guesses", "avg_guesses_solved", "avg_hp_remaining", "avg_turns",
}


def compute_aggregate(agent_id: str, challenge_id: str, records: Sequence[TrialRecord],
                      protocol_failures: int) -> ChallengeAggregate:
    kind = records[0].kind
    wins = sum(1 for r in records if r.outcome is Outcome.WIN)

    avg_guesses = avg_solved = avg_hp = None
    if _metric_for_kind(kind, records, GUESSES):
        avg_guesses = compute_mean(GUESSES, records)
        avg_solved = compute_mean(GUESSES, [r for r in records if r.outcome is Outcome.WIN])
    if _metric_for_kind(kind, records, HP_REMAINING):
        avg_hp = compute_mean(HP_REMAINING, records)

    extras = sorted({k for r in records for k in r.metrics} - _NOT_AVERAGED)
    metrics = {}
    for name in extras:
        mean = compute_mean(name, records)
        if mean is not None:
            metrics[name] = mean

    return ChallengeAggregate(
        agent_id=agent_id,
        challenge_id=challenge_id,
        kind=kind,
        n_trials=len(records),
        wins=wins,
        win_rate=wins / len(records),
        protocol_failure_count=protocol_failures,
        avg_guesses=avg_guesses,
        avg_guesses_solved=avg_solved,
        avg_hp_remaining=avg_hp,
        avg_turns=compute_mean(TURNS, records),
        metrics=metrics,
    )


def aggregate(records: Iterable[TrialRecord], exclude_protocol_failures: bool = False) -> List[ChallengeAggregate]:
    """
    Per-(agent, challenge) aggregates, sorted by agent then challenge

    With exclude_protocol_failures the aborted trials are dropped before
    averaging (their count is still reported).

    Raises:
        MissingMetric: a record lacks the metric its kind needs
    """
    result = []
    for (agent_id, challenge_id), group in sorted(group_records(records).items()):
        failures = sum(1 for r in group if r.outcome is Outcome.PROTOCOL_FAILURE)
        if exclude_protocol_failures:
            group = [r for r in group if r.outcome is not Outcome.PROTOCOL_FAILURE]
            if not group:
                logger.warning("Every trial of %s on %s was a protocol failure; skipped", agent_id, challenge_id)
                continue
        result.append(compute_aggregate(agent_id, challenge_id, group, failures))
    return result


def agent_summary(aggregates: Iterable[ChallengeAggregate], metric: str) -> Dict[str, float]:
    """Per-agent mean of a per-challenge metric (the table's 'Avg.' row)"""
    by_agent: Dict[str, List[float]] = defaultdict(list)
    for agg in aggregates:
        by_agent[agg.agent_id].append(agg.get(metric))
    return {agent: math.fsum(values) / len(values) for agent, values in sorted(by_agent.items())}
