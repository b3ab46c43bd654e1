"""
Difficulty reports

Joins agent aggregates with human records, ranks challenges by
difficulty and writes the report files into a run directory:

    report.csv          one row per challenge (always)
    correlations.csv    agent, metric, n, r, p, bucket (when any were computed)
    report.json         rows, rankings, correlations, manifest hash (always)
    report.md           agents as rows with average metric, r, p and bucket
    scatter_<agent>.svg agent metric against human metric with a least-squares line

Files are rendered into a staging directory and moved into place only
when every requested file rendered.
"""

import json
import logging
import os
import re
import shutil
import tempfile
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Sequence, Tuple, Union

import matplotlib
import numpy as np
import pandas as pd
from matplotlib.figure import Figure

from .aggregates import ChallengeAggregate, agent_summary
from .catalog import HumanStatRecord
from .errors import MissingMetric, RunnerIOError, StatisticsError
from .records import ChallengeKind
from .stats import CorrelationResult, DegenerateInput, format_p, format_r

logger = logging.getLogger(__name__)

FORMATS = ("csv", "json", "md", "svg")
ALWAYS = ("csv", "json")

_PRIMARY_METRIC = {
    ChallengeKind.WORDLE: "avg_guesses",
    ChallengeKind.BATTLE: "avg_hp_remaining",
    ChallengeKind.EXTERNAL: "win_rate",
}
# metrics where a larger value means an easier challenge
_DESCENDING = {"avg_hp_remaining", "hp_remaining", "win_rate"}

_LABELS = {
    "avg_guesses": "Avg. Guesses",
    "avg_guesses_solved": "Avg. Guesses (solved)",
    "avg_hp_remaining": "Avg. HP",
    "win_rate": "Win Rate",
}


class EmptyReport(StatisticsError):
    pass


class Direction(str, Enum):
    ASCENDING = "ascending"
    DESCENDING = "descending"


def direction_for(metric: str) -> Direction:
    return Direction.DESCENDING if metric in _DESCENDING else Direction.ASCENDING


def _label(metric: str) -> str:
    return _LABELS.get(metric, metric)


def _safe(text: str) -> str:
    return re.sub(r"[^A-Za-z0-9._-]+", "-", text).strip("-") or "agent"


# ============================================================
# Ranking
# ============================================================

@dataclass(frozen=True)
class RankedChallenge:
    rank: int
    challenge_id: str
    value: float


def dense_rank(values: Dict[str, float], direction: Direction) -> List[RankedChallenge]:
    """Dense ranking (ties share a rank), ordered by rank then challenge id"""
    distinct = sorted(set(values.values()), reverse=direction is Direction.DESCENDING)
    rank_of = {v: i + 1 for i, v in enumerate(distinct)}
    ranked = [RankedChallenge(rank_of[v], cid, v) for cid, v in values.items()]
    return sorted(ranked, key=lambda r: (r.rank, r.challenge_id))


def rank_challenges(
    aggregates: Iterable[ChallengeAggregate],
    metric: str,
    direction: Optional[Direction] = None,
) -> List[RankedChallenge]:
    """
    Rank one agent's challenges from easiest (rank 1) to hardest

    direction defaults by metric: guesses ascend, hp and win rate descend.

    Raises:
        MissingMetric: some challenge lacks the metric
        ValueError: aggregates of more than one agent
    """
    aggregates = list(aggregates)
    agents = {a.agent_id for a in aggregates}
    if len(agents) > 1:
        raise ValueError(f"rank_challenges takes one agent's aggregates, got {sorted(agents)}")
    values = {a.challenge_id: a.get(metric) for a in aggregates}
    return dense_rank(values, direction or direction_for(metric))


# ============================================================
# Report model
# ============================================================

@dataclass
class DifficultyReport:
    rows: List[dict]
    columns: List[str]
    correlations: List[CorrelationResult]
    rankings: Dict[str, List[RankedChallenge]]
    summaries: Dict[str, Dict[str, float]]
    agent_metrics: Dict[str, List[str]]
    human_metrics: List[str]
    manifest_hash: Optional[str] = None
    points: Dict[Tuple[str, str, str], List[Tuple[str, float, float]]] = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "manifest_hash": self.manifest_hash,
            "rows": self.rows,
            "correlations": [c.to_dict() for c in self.correlations],
            "rankings": {
                column: [{"rank": r.rank, "challenge_id": r.challenge_id, "value": r.value} for r in ranked]
                for column, ranked in sorted(self.rankings.items())
            },
            "agent_summary": self.summaries,
        }


def _agent_metrics(aggregates: Sequence[ChallengeAggregate],
                   correlations: Sequence[CorrelationResult]) -> Dict[str, List[str]]:
    metrics: Dict[str, List[str]] = {}
    for agg in aggregates:
        metrics.setdefault(agg.agent_id, [_PRIMARY_METRIC[agg.kind]])
    for c in correlations:
        names = metrics.setdefault(c.agent_id, [])
        if c.pair.agent_metric not in names:
            names.append(c.pair.agent_metric)
    return metrics


def build_report(
    aggregates: Sequence[ChallengeAggregate],
    human: Sequence[HumanStatRecord],
    correlations: Sequence[CorrelationResult] = (),
    manifest_hash: Optional[str] = None,
) -> DifficultyReport:
    """
    Assemble per-challenge rows, rankings and per-agent summaries

    Raises:
        EmptyReport: no challenge has both agent and human data
    """
    human_by_id = {h.challenge_id: h for h in human}
    challenge_ids = sorted({a.challenge_id for a in aggregates})
    if not any(cid in human_by_id for cid in challenge_ids):
        raise EmptyReport("No challenge in the trials has human data; nothing to report")

    agent_metrics = _agent_metrics(aggregates, correlations)
    human_metrics = sorted(
        {c.pair.human_metric for c in correlations}
        or {m for m in ("avg_guesses", "win_rate") if any(h.value(m) is not None for h in human)}
    )

    by_key = {(a.agent_id, a.challenge_id): a for a in aggregates}
    columns = ["challenge_id"]
    values: Dict[str, Dict[str, float]] = {}
    for agent_id in sorted(agent_metrics):
        for metric in agent_metrics[agent_id]:
            column = f"{agent_id}:{metric}"
            columns.append(column)
            column_values = {}
            for cid in challenge_ids:
                agg = by_key.get((agent_id, cid))
                if agg is None:
                    continue
                try:
                    column_values[cid] = agg.get(metric)
                except MissingMetric:
                    continue
            values[column] = column_values
    for metric in human_metrics:
        column = f"human:{metric}"
        columns.append(column)
        values[column] = {
            cid: human_by_id[cid].value(metric)
            for cid in challenge_ids
            if cid in human_by_id and human_by_id[cid].value(metric) is not None
        }

    rankings = {}
    for column in columns[1:]:
        metric = column.rsplit(":", 1)[1]
        if values[column]:
            rankings[column] = dense_rank(values[column], direction_for(metric))
    rank_of = {column: {r.challenge_id: r.rank for r in ranked} for column, ranked in rankings.items()}

    rows = []
    for cid in challenge_ids:
        row = {"challenge_id": cid}
        for column in columns[1:]:
            row[column] = values[column].get(cid)
        for column in columns[1:]:
            row[f"rank:{column}"] = rank_of.get(column, {}).get(cid)
        rows.append(row)

    summaries = {}
    for agent_id, metrics in sorted(agent_metrics.items()):
        mine = [a for a in aggregates if a.agent_id == agent_id]
        summary = {}
        for metric in metrics:
            try:
                summary[metric] = agent_summary(mine, metric)[agent_id]
            except MissingMetric:
                logger.info("%s has no %s on some challenge; no summary value", agent_id, metric)
        summaries[agent_id] = summary

    points = {}
    for c in correlations:
        agent_column = values.get(f"{c.agent_id}:{c.pair.agent_metric}", {})
        human_column = values.get(f"human:{c.pair.human_metric}", {})
        points[(c.agent_id, c.pair.agent_metric, c.pair.human_metric)] = [
            (cid, human_column[cid], agent_column[cid])
            for cid in challenge_ids
            if cid in agent_column and cid in human_column
        ]

    return DifficultyReport(
        rows=rows,
        columns=columns,
        correlations=list(correlations),
        rankings=rankings,
        summaries=summaries,
        agent_metrics=agent_metrics,
        human_metrics=human_metrics,
        manifest_hash=manifest_hash,
        points=points,
    )


# ============================================================
# Rendering
# ============================================================

def scatter_fit(xs: Sequence[float], ys: Sequence[float]) -> Tuple[float, float]:
    """Least-squares line (slope, intercept) of ys on xs"""
    x = np.asarray(xs, dtype=float)
    y = np.asarray(ys, dtype=float)
    if len(x) < 2 or np.ptp(x) == 0:
        raise DegenerateInput("A fitted line needs at least two distinct x values")
    slope, intercept = np.polyfit(x, y, 1)
    return float(slope), float(intercept)


def _write_csv(report: DifficultyReport, path: Path) -> None:
    rank_columns = [f"rank:{c}" for c in report.columns[1:]]
    frame = pd.DataFrame(report.rows, columns=report.columns + rank_columns)
    frame.to_csv(path, index=False)


CORRELATION_COLUMNS = ["agent", "metric", "n", "r", "p", "bucket"]


def _write_correlations_csv(report: DifficultyReport, path: Path) -> None:
    rows = [
        {"agent": c.agent_id, "metric": c.pair.label, "n": c.n,
         "r": format_r(c.r), "p": format_p(c.p), "bucket": c.bucket.value}
        for c in report.correlations
    ]
    pd.DataFrame(rows, columns=CORRELATION_COLUMNS).to_csv(path, index=False)


def _write_json(report: DifficultyReport, path: Path) -> None:
    path.write_text(json.dumps(report.to_dict(), indent=2, sort_keys=True) + "\n", encoding="utf-8")


def render_markdown(report: DifficultyReport) -> str:
    lines = ["# Difficulty report", ""]
    if report.manifest_hash:
        lines += [f"Run manifest: `{report.manifest_hash}`", ""]

    lines += ["## Correlation with human difficulty", ""]
    if report.correlations:
        lines += [
            "| Agent | Metric | Avg. | n | r | p | Correlation |",
            "|---|---|---|---|---|---|---|",
        ]
        for c in report.correlations:
            avg = report.summaries.get(c.agent_id, {}).get(c.pair.agent_metric)
            avg_text = "" if avg is None else f"{avg:.2f}"
            lines.append(
                f"| {c.agent_id} | {_label(c.pair.agent_metric)} vs human {_label(c.pair.human_metric)} "
                f"| {avg_text} | {c.n} | {format_r(c.r)} | {format_p(c.p)} | {c.bucket.value} |"
            )
    else:
        lines.append("No correlations were computed.")
    lines.append("")

    lines += ["## Challenges", ""]
    value_columns = report.columns[1:]
    lines.append("| Challenge | " + " | ".join(value_columns) + " |")
    lines.append("|---|" + "---|" * len(value_columns))
    for row in report.rows:
        cells = []
        for column in value_columns:
            value, rank = row[column], row[f"rank:{column}"]
            cells.append("" if value is None else f"{value:.2f} (#{rank})")
        lines.append(f"| {row['challenge_id']} | " + " | ".join(cells) + " |")
    lines.append("")
    return "\n".join(lines)


def _write_svg(report: DifficultyReport, key: Tuple[str, str, str], path: Path) -> None:
    agent_id, agent_metric, human_metric = key
    points = report.points[key]
    xs = [p[1] for p in points]
    ys = [p[2] for p in points]

    matplotlib.rcParams["svg.hashsalt"] = "diffprobe"
    fig = Figure(figsize=(6, 4.5))
    ax = fig.add_subplot()
    ax.scatter(xs, ys, s=18, color="#1f77b4", zorder=3)
    try:
        slope, intercept = scatter_fit(xs, ys)
        line_x = np.array([min(xs), max(xs)])
        ax.plot(line_x, slope * line_x + intercept, color="#d62728", linewidth=1.2,
                label=f"y = {slope:.3f}x + {intercept:.3f}")
        ax.legend(loc="best", fontsize=8)
    except DegenerateInput:
        logger.info("No fitted line for %s: constant human values", agent_id)
    ax.set_xlabel(f"Human {_label(human_metric)}")
    ax.set_ylabel(f"{agent_id} {_label(agent_metric)}")
    ax.set_title(f"{agent_id}: one point per challenge")
    ax.grid(True, alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, format="svg", metadata={"Date": None})


def render_report(
    report: DifficultyReport,
    out_dir: Union[str, Path],
    formats: Sequence[str] = FORMATS,
) -> List[Path]:
    """
    Write the report files; either all of them land or none do

    Raises:
        ValueError: unknown format name
        RunnerIOError: a file cannot be written
    """
    unknown = sorted(set(formats) - set(FORMATS))
    if unknown:
        raise ValueError(f"Unknown report formats: {unknown}; expected some of {FORMATS}")
    wanted = list(ALWAYS) + [f for f in FORMATS if f in formats and f not in ALWAYS]

    out_dir = Path(out_dir)
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
        staging = Path(tempfile.mkdtemp(prefix=".report-", dir=out_dir))
    except OSError as e:
        raise RunnerIOError(f"Cannot create report directory {out_dir}: {e}") from e

    try:
        staged: List[Path] = []
        if "csv" in wanted:
            staged.append(staging / "report.csv")
            _write_csv(report, staged[-1])
            if report.correlations:
                staged.append(staging / "correlations.csv")
                _write_correlations_csv(report, staged[-1])
        if "json" in wanted:
            staged.append(staging / "report.json")
            _write_json(report, staged[-1])
        if "md" in wanted:
            staged.append(staging / "report.md")
            staged[-1].write_text(render_markdown(report), encoding="utf-8")
        if "svg" in wanted:
            plotted = set()
            for key in report.points:
                if key[0] in plotted or len(report.points[key]) == 0:
                    continue
                plotted.add(key[0])
                staged.append(staging / f"scatter_{_safe(key[0])}.svg")
                _write_svg(report, key, staged[-1])

        written = []
        for path in staged:
            target = out_dir / path.name
            os.replace(path, target)
            written.append(target)
        logger.info("Wrote %d report files to %s", len(written), out_dir)
        return written
    except OSError as e:
        raise RunnerIOError(f"Cannot write report files in {out_dir}: {e}") from e
    finally:
        shutil.rmtree(staging, ignore_errors=True)
