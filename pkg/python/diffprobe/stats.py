"""
Pearson correlation with exact two-tailed significance

Everything here is computed from scratch on floats: the two-pass centered
Pearson coefficient, Student's t significance through the regularized
incomplete beta function (modified Lentz continued fraction), and the
correlation-strength buckets used in reports.
"""

import logging
import math
from collections import defaultdict
from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, Iterable, List, Sequence, Tuple

from .aggregates import ChallengeAggregate, metric_value
from .errors import MissingMetric, StatisticsError
from .records import TrialRecord

logger = logging.getLogger(__name__)

MIN_SAMPLES = 3

_CF_EPS = 1e-15
_CF_TINY = 1e-300
_CF_MAX_ITER = 20000


class DegenerateInput(StatisticsError):
    """Fewer than three samples, mismatched lengths or a constant vector"""
    pass


class JoinTooSmall(StatisticsError):
    def __init__(self, agent_id: str, n: int, unmatched: Sequence[str] = ()):
        self.agent_id = agent_id
        self.n = n
        self.unmatched = list(unmatched)
        hint = f"; unmatched ids: {', '.join(self.unmatched[:10])}" if self.unmatched else ""
        super().__init__(f"Only {n} challenges of {agent_id} match human data (need {MIN_SAMPLES}){hint}")


# ============================================================
# Numerical core
# ============================================================

def pearson_r(x: Sequence[float], y: Sequence[float]) -> float:
    """
    Sample Pearson coefficient, centered two-pass

    Raises:
        DegenerateInput: n < 3, unequal lengths or zero variance
    """
    n = len(x)
    if n != len(y):
        raise DegenerateInput(f"Vectors differ in length: {n} vs {len(y)}")
    if n < MIN_SAMPLES:
        raise DegenerateInput(f"Need at least {MIN_SAMPLES} samples, got {n}")

    mean_x = math.fsum(x) / n
    mean_y = math.fsum(y) / n
    dx = [v - mean_x for v in x]
    dy = [v - mean_y for v in y]
    sxx = math.fsum(d * d for d in dx)
    syy = math.fsum(d * d for d in dy)
    if sxx == 0.0 or syy == 0.0:
        raise DegenerateInput("Correlation is undefined for a constant vector")
    sxy = math.fsum(a * b for a, b in zip(dx, dy))
    r = sxy / math.sqrt(sxx * syy)
    return max(-1.0, min(1.0, r))


def _beta_continued_fraction(a: float, b: float, x: float) -> float:
    # modified Lentz evaluation of the incomplete beta continued fraction
    qab = a + b
    qap = a + 1.0
    qam = a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    if abs(d) < _CF_TINY:
        d = _CF_TINY
    d = 1.0 / d
    h = d
    for m in range(1, _CF_MAX_ITER + 1):
        m2 = 2 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        if abs(d) < _CF_TINY:
            d = _CF_TINY
        c = 1.0 + aa / c
        if abs(c) < _CF_TINY:
            c = _CF_TINY
        d = 1.0 / d
        h *= d * c

        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        if abs(d) < _CF_TINY:
            d = _CF_TINY
        c = 1.0 + aa / c
        if abs(c) < _CF_TINY:
            c = _CF_TINY
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < _CF_EPS:
            return h
    raise StatisticsError(f"Incomplete beta did not converge for a={a}, b={b}, x={x}")


def regularized_incomplete_beta(x: float, a: float, b: float) -> float:
    """
    I_x(a, b) for a, b > 0 and 0 <= x <= 1

    The continued fraction converges fast for x < (a + 1) / (a + b + 2);
    above that the symmetry I_x(a, b) = 1 - I_{1-x}(b, a) is used.
    """
    if a <= 0 or b <= 0:
        raise ValueError(f"a and b must be positive, got a={a}, b={b}")
    if not 0.0 <= x <= 1.0:
        raise ValueError(f"x must lie in [0, 1], got {x}")
    if x == 0.0:
        return 0.0
    if x == 1.0:
        return 1.0

    log_front = (
        math.lgamma(a + b) - math.lgamma(a) - math.lgamma(b)
        + a * math.log(x) + b * math.log1p(-x)
    )
    front = math.exp(log_front)
    if x < (a + 1.0) / (a + b + 2.0):
        return front * _beta_continued_fraction(a, b, x) / a
    return 1.0 - front * _beta_continued_fraction(b, a, 1.0 - x) / b


def t_statistic(r: float, n: int) -> float:
    """t = r * sqrt((n - 2) / (1 - r^2)); infinite for |r| = 1"""
    if abs(r) >= 1.0:
        return math.copysign(math.inf, r)
    return r * math.sqrt((n - 2) / (1.0 - r * r))


def p_value(r: float, n: int) -> float:
    """
    Two-tailed p for H0: rho = 0, from Student's t with n - 2 degrees of freedom

    With df = n - 2 the two-tailed tail mass of t is I_{df/(df+t^2)}(df/2, 1/2),
    and df/(df+t^2) reduces to 1 - r^2, so t is never formed explicitly.

    Raises:
        DegenerateInput: n < 3 or |r| > 1
    """
    if n < MIN_SAMPLES:
        raise DegenerateInput(f"Need at least {MIN_SAMPLES} samples, got {n}")
    if math.isnan(r) or abs(r) > 1.0:
        raise DegenerateInput(f"r must lie in [-1, 1], got {r}")
    if abs(r) == 1.0:
        return 0.0
    df = n - 2
    p = regularized_incomplete_beta(1.0 - r * r, df / 2.0, 0.5)
    return max(0.0, min(1.0, p))


# ============================================================
# Buckets and formatting
# ============================================================

class CorrelationBucket(str, Enum):
    VERY_WEAK = "VeryWeak"
    WEAK = "Weak"
    MODERATE = "Moderate"
    STRONG = "Strong"


def bucket(r: float) -> CorrelationBucket:
    """Strength by |r|; intervals are closed on the left"""
    magnitude = abs(r)
    if magnitude < 0.2:
        return CorrelationBucket.VERY_WEAK
    if magnitude < 0.4:
        return CorrelationBucket.WEAK
    if magnitude < 0.6:
        return CorrelationBucket.MODERATE
    return CorrelationBucket.STRONG


def _strip_zero(text: str) -> str:
    if text.startswith("0."):
        return text[1:]
    if text.startswith("-0."):
        return "-" + text[2:]
    return text


def format_p(p: float) -> str:
    """'<.001' below one in a thousand, otherwise three decimals without the leading zero"""
    if p < 0.001:
        return "<.001"
    return _strip_zero(f"{p:.3f}")


def format_r(r: float) -> str:
    return _strip_zero(f"{r:.3f}")


# ============================================================
# Correlation tables
# ============================================================

@dataclass(frozen=True)
class MetricPair:
    """An agent-side metric correlated against a human-side metric"""
    agent_metric: str
    human_metric: str

    @property
    def label(self) -> str:
        return f"{self.agent_metric}~{self.human_metric}"


WORDLE_PAIRS = (
    MetricPair("avg_guesses", "avg_guesses"),
    MetricPair("avg_guesses_solved", "avg_guesses"),
)
BATTLE_PAIRS = (MetricPair("avg_hp_remaining", "win_rate"),)


@dataclass
class CorrelationResult:
    agent_id: str
    pair: MetricPair
    n: int
    r: float
    p: float
    bucket: CorrelationBucket
    matched_ids: List[str] = field(default_factory=list)
    unmatched_agent_ids: List[str] = field(default_factory=list)
    unmatched_human_ids: List[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "agent": self.agent_id,
            "metric": self.pair.label,
            "agent_metric": self.pair.agent_metric,
            "human_metric": self.pair.human_metric,
            "n": self.n,
            "r": self.r,
            "p": self.p,
            "p_display": format_p(self.p),
            "bucket": self.bucket.value,
            "unmatched_agent_ids": list(self.unmatched_agent_ids),
            "unmatched_human_ids": list(self.unmatched_human_ids),
        }


def correlation(agent_id: str, pair: MetricPair, xs: Sequence[float], ys: Sequence[float],
                matched: Sequence[str] = (), unmatched_agent: Sequence[str] = (),
                unmatched_human: Sequence[str] = ()) -> CorrelationResult:
    r = pearson_r(xs, ys)
    return CorrelationResult(
        agent_id=agent_id,
        pair=pair,
        n=len(xs),
        r=r,
        p=p_value(r, len(xs)),
        bucket=bucket(r),
        matched_ids=list(matched),
        unmatched_agent_ids=list(unmatched_agent),
        unmatched_human_ids=list(unmatched_human),
    )


def _human_values(human: Iterable, metric: str) -> Dict[str, float]:
    values = {}
    for record in human:
        value = record.value(metric)
        if value is not None:
            values[record.challenge_id] = value
    return values


def correlate_agents(
    aggregates: Iterable[ChallengeAggregate],
    human: Sequence,
    pairs: Sequence[MetricPair],
    strict: bool = True,
) -> List[CorrelationResult]:
    """
    One correlation per (agent, metric pair), joining per-challenge
    aggregates to human records on challenge id

    Challenges an agent lacks the metric for are reported as unmatched.
    With strict=False an (agent, pair) that cannot be correlated is logged
    and skipped instead of raising.

    Raises:
        JoinTooSmall: fewer than three challenges join for some agent
        DegenerateInput: a joined column is constant
    """
    by_agent: Dict[str, List[ChallengeAggregate]] = defaultdict(list)
    for agg in aggregates:
        by_agent[agg.agent_id].append(agg)

    results = []
    for pair in pairs:
        human_values = _human_values(human, pair.human_metric)
        for agent_id in sorted(by_agent):
            matched, xs, ys, unmatched_agent = [], [], [], []
            for agg in sorted(by_agent[agent_id], key=lambda a: a.challenge_id):
                if agg.challenge_id not in human_values:
                    unmatched_agent.append(agg.challenge_id)
                    continue
                try:
                    xs.append(agg.get(pair.agent_metric))
                except MissingMetric:
                    unmatched_agent.append(agg.challenge_id)
                    continue
                ys.append(human_values[agg.challenge_id])
                matched.append(agg.challenge_id)
            unmatched_human = sorted(set(human_values) - {a.challenge_id for a in by_agent[agent_id]})
            if unmatched_agent:
                logger.info("%s: %d challenges without a human %s", agent_id, len(unmatched_agent), pair.human_metric)
            try:
                if len(matched) < MIN_SAMPLES:
                    raise JoinTooSmall(agent_id, len(matched), unmatched_agent)
                results.append(correlation(agent_id, pair, xs, ys, matched, unmatched_agent, unmatched_human))
            except StatisticsError as e:
                if strict:
                    raise
                logger.warning("Skipping %s for %s: %s", pair.label, agent_id, e)
    return results


def correlate_trials(
    records: Iterable[TrialRecord],
    human: Sequence,
    pair: MetricPair,
) -> List[CorrelationResult]:
    """
    Per-trial pairing: every trial's metric against its challenge's human value

    agent_metric names a trial metric ("hp_remaining", "guesses"); failure
    accounting applies as in aggregation.

    Raises:
        JoinTooSmall: fewer than three trials join for some agent
    """
    human_values = _human_values(human, pair.human_metric)
    by_agent: Dict[str, List[TrialRecord]] = defaultdict(list)
    for record in records:
        by_agent[record.agent_id].append(record)

    results = []
    for agent_id in sorted(by_agent):
        xs: List[float] = []
        ys: List[float] = []
        matched: List[str] = []
        unmatched = set()
        for record in sorted(by_agent[agent_id], key=lambda r: (r.challenge_id, r.trial_index)):
            value = metric_value(record, pair.agent_metric)
            if record.challenge_id not in human_values or value is None:
                unmatched.add(record.challenge_id)
                continue
            xs.append(value)
            ys.append(human_values[record.challenge_id])
            matched.append(record.challenge_id)
        if len(xs) < MIN_SAMPLES:
            raise JoinTooSmall(agent_id, len(xs), sorted(unmatched))
        unmatched_human = sorted(set(human_values) - set(matched))
        results.append(correlation(agent_id, pair, xs, ys, sorted(set(matched)), sorted(unmatched), unmatched_human))
    return results


def default_pairs(kinds: Iterable) -> Tuple[MetricPair, ...]:
    """Metric pairs that make sense for the challenge kinds present"""
    pairs: List[MetricPair] = []
    values = {getattr(k, "value", k) for k in kinds}
    if "wordle" in values:
        pairs.extend(WORDLE_PAIRS)
    if "battle" in values:
        pairs.extend(BATTLE_PAIRS)
    return tuple(pairs)
