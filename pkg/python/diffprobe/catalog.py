"""
Human Catalog - per-challenge statistics of human players

The catalog holds one HumanStatRecord per challenge:
- average metric (average guesses for Wordle)
- win rate
- sample size

Records are loaded from a CSV with a header. Which column holds which
field is a HumanSchema, so exports with other headers load without
editing the file.
"""

import csv
import logging
from dataclasses import dataclass, field, fields
from importlib import resources
from pathlib import Path
from typing import Dict, Iterator, List, Optional, Union

import pandas as pd

from .errors import InputError, InputFileError

logger = logging.getLogger(__name__)


class SchemaError(InputError):
    """Missing column or malformed value; row is the 1-based CSV line"""

    def __init__(self, message: str, row: Optional[int] = None):
        self.row = row
        super().__init__(f"row {row}: {message}" if row is not None else message)


class RangeError(InputError):
    def __init__(self, message: str, row: int):
        self.row = row
        super().__init__(f"row {row}: {message}")


@dataclass(frozen=True)
class HumanSchema:
    """
    Column names for each field

    challenge_id may be absent from a file; the id is then the uppercased
    answer. avg_guesses and win_rate are each optional, but a file must
    carry at least one of them.
    """
    challenge_id: str = "challenge_id"
    date: str = "date"
    answer: str = "answer"
    avg_guesses: str = "avg_guesses"
    win_rate: str = "win_rate"
    sample_size: str = "sample_size"

    @classmethod
    def parse(cls, spec: Optional[str]) -> "HumanSchema":
        """
        Schema from "field=column,..." overrides

        Example: "avg_guesses=Average,answer=Word"
        """
        if not spec:
            return cls()
        known = {f.name for f in fields(cls)}
        mapping = {}
        for part in spec.split(","):
            key, sep, column = part.partition("=")
            key = key.strip()
            if not sep or key not in known or not column.strip():
                raise SchemaError(f"Bad schema entry '{part.strip()}'; expected field=column with field in {sorted(known)}")
            mapping[key] = column.strip()
        return cls(**mapping)


@dataclass(frozen=True)
class HumanStatRecord:
    challenge_id: str
    sample_size: int
    avg_guesses: Optional[float] = None
    win_rate: Optional[float] = None
    date: Optional[str] = None
    answer: Optional[str] = None
    extra: Dict[str, str] = field(default_factory=dict)

    def value(self, metric: str) -> Optional[float]:
        """Numeric value of a named field, None when the file did not carry it"""
        if metric in ("avg_guesses", "win_rate", "sample_size"):
            value = getattr(self, metric)
            return None if value is None else float(value)
        raw = self.extra.get(metric)
        try:
            return None if raw in (None, "") else float(raw)
        except ValueError:
            return None

    def to_dict(self) -> dict:
        return {
            "challenge_id": self.challenge_id,
            "date": self.date,
            "answer": self.answer,
            "avg_guesses": self.avg_guesses,
            "win_rate": self.win_rate,
            "sample_size": self.sample_size,
        }


def _cell(row: pd.Series, column: Optional[str]) -> Optional[str]:
    if column is None:
        return None
    text = str(row[column]).strip()
    return text or None


def _number(text: Optional[str], name: str, line: int) -> Optional[float]:
    if text is None:
        return None
    try:
        return float(text)
    except ValueError:
        raise SchemaError(f"{name} '{text}' is not a number", line) from None


def load_human_csv(path: Union[str, Path], schema: Optional[HumanSchema] = None) -> List["HumanStatRecord"]:
    """
    Validated human records, in file order

    Raises:
        InputFileError: the file cannot be read
        SchemaError: missing columns, malformed values or duplicate ids (with row)
        RangeError: win rate outside [0, 1], non-positive sample size or average
    """
    schema = schema or HumanSchema()
    try:
        df = pd.read_csv(path, dtype=str, keep_default_na=False, skipinitialspace=True)
    except (OSError, UnicodeDecodeError) as e:
        raise InputFileError(path, e) from e
    except (pd.errors.ParserError, pd.errors.EmptyDataError) as e:
        raise SchemaError(f"{path} is not a CSV file with a header: {e}") from e

    columns = set(df.columns)
    id_column = schema.challenge_id if schema.challenge_id in columns else None
    answer_column = schema.answer if schema.answer in columns else None
    if id_column is None and answer_column is None:
        raise SchemaError(f"{path} needs a '{schema.challenge_id}' or '{schema.answer}' column")
    if schema.sample_size not in columns:
        raise SchemaError(f"{path} has no '{schema.sample_size}' column")
    avg_column = schema.avg_guesses if schema.avg_guesses in columns else None
    rate_column = schema.win_rate if schema.win_rate in columns else None
    if avg_column is None and rate_column is None:
        raise SchemaError(f"{path} needs a '{schema.avg_guesses}' or '{schema.win_rate}' column")
    date_column = schema.date if schema.date in columns else None
    mapped = {id_column, answer_column, avg_column, rate_column, date_column, schema.sample_size}
    extra_columns = [c for c in df.columns if c not in mapped]

    records: List[HumanStatRecord] = []
    seen: Dict[str, int] = {}
    for index, row in df.iterrows():
        line = int(index) + 2
        answer = _cell(row, answer_column)
        challenge_id = _cell(row, id_column) or (answer.upper() if answer else None)
        if not challenge_id:
            raise SchemaError("empty challenge id", line)
        if challenge_id in seen:
            raise SchemaError(f"duplicate challenge id '{challenge_id}' (first at row {seen[challenge_id]})", line)
        seen[challenge_id] = line

        size_text = _cell(row, schema.sample_size)
        try:
            sample_size = int(size_text) if size_text is not None else None
        except ValueError:
            raise SchemaError(f"sample_size '{size_text}' is not an integer", line) from None
        if sample_size is None or sample_size <= 0:
            raise RangeError(f"sample_size must be > 0, got {size_text}", line)

        win_rate = _number(_cell(row, rate_column), "win_rate", line)
        if win_rate is not None and not 0.0 <= win_rate <= 1.0:
            raise RangeError(f"win_rate {win_rate} outside [0, 1]", line)
        avg = _number(_cell(row, avg_column), "avg_guesses", line)
        if avg is not None and avg <= 0:
            raise RangeError(f"avg_guesses must be > 0, got {avg}", line)

        records.append(HumanStatRecord(
            challenge_id=challenge_id,
            sample_size=sample_size,
            avg_guesses=avg,
            win_rate=win_rate,
            date=_cell(row, date_column),
            answer=answer.upper() if answer else None,
            extra={c: str(row[c]) for c in extra_columns},
        ))

    logger.info("Loaded %d human records from %s", len(records), path)
    return records


def save_human_csv(records: List[HumanStatRecord], path: Union[str, Path]) -> Path:
    """Write records with the default schema; floats keep full precision"""
    path = Path(path)
    with open(path, "w", encoding="utf-8", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(["challenge_id", "date", "answer", "avg_guesses", "win_rate", "sample_size"])
        for r in records:
            writer.writerow([
                r.challenge_id,
                r.date or "",
                r.answer or "",
                "" if r.avg_guesses is None else repr(r.avg_guesses),
                "" if r.win_rate is None else repr(r.win_rate),
                r.sample_size,
            ])
    return path


class HumanCatalog:
    """
    Human records keyed by challenge id

    Usage:
        catalog = HumanCatalog.load("wordle_stats.csv")
        catalog.get("CRANE").avg_guesses
    """

    def __init__(self, records: List[HumanStatRecord]):
        self.records = list(records)
        self._by_id = {r.challenge_id: r for r in self.records}

    @classmethod
    def load(cls, path: Union[str, Path], schema: Optional[HumanSchema] = None) -> "HumanCatalog":
        return cls(load_human_csv(path, schema))

    @classmethod
    def packaged(cls, name: str = "human_battle_winrates.csv") -> "HumanCatalog":
        """Catalog from a CSV shipped in the package data directory"""
        with resources.as_file(resources.files("diffprobe") / "data" / name) as path:
            return cls.load(path)

    def __len__(self) -> int:
        return len(self.records)

    def __iter__(self) -> Iterator[HumanStatRecord]:
        return iter(self.records)

    def __contains__(self, challenge_id: str) -> bool:
        return challenge_id in self._by_id

    def get(self, challenge_id: str) -> Optional[HumanStatRecord]:
        return self._by_id.get(challenge_id)

    def ids(self) -> List[str]:
        return sorted(self._by_id)
