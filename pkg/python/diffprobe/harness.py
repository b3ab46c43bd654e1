"""
Trial runner

Executes every (challenge, agent, trial) tuple once, appending each
TrialRecord to <out_dir>/trials.jsonl before moving on. Rerunning with the
same out_dir skips tuples already recorded, so an interrupted run resumes
where it stopped. Seeds derive from tuple identity, so neither resuming nor
the worker count changes results for deterministic agents.
"""

import hashlib
import json
import logging
import os
import re
import threading
import time
from concurrent.futures import ThreadPoolExecutor, as_completed
from dataclasses import dataclass, field, replace
from datetime import datetime, timezone
from importlib import metadata, resources
from pathlib import Path
from typing import Dict, Iterable, Iterator, List, Optional, Sequence, Set, Tuple, Union

from tqdm import tqdm

from .agents import AgentConfig, AgentKind, create_agent, parse_agent_spec
from .battle import BattleFixture, BattleSession, load_fixture
from .config import LLMSettings
from .errors import DiffProbeError, InputError, InputFileError, ProtocolFailure, RunnerIOError
from .external import ExternalLimits, run_external_challenge
from .prompts import ConfigError
from .records import Challenge, ChallengeKind, GameResult, Outcome, TrialRecord
from .transport import API_KEY_ENV, ChatTransport
from .wordle import DEFAULT_GUESS_CAP, WordList, WordleSession, default_word_list, load_word_list

logger = logging.getLogger(__name__)

TRIALS_FILE = "trials.jsonl"
MANIFEST_FILE = "run_manifest.json"


class RunMismatch(InputError):
    """Raised when resuming into a run directory that holds a different run"""
    pass


# ============================================================
# Configuration
# ============================================================

@dataclass
class RunConfig:
    """
    Everything that determines a run's results

    guess_cap, deck and turn_cap are the compensation knobs: they relax a
    game's rules so a weaker agent still shows informative variation.
    """
    trials_per_challenge: int = 20
    guess_cap: int = DEFAULT_GUESS_CAP
    turn_cap: int = 50
    parallelism: int = 1
    base_seed: int = 0
    agents: List[AgentConfig] = field(default_factory=list)
    out_dir: str = "runs/latest"
    strict: bool = False
    max_rejections: int = 5
    deck: Optional[str] = None
    fixture_path: Optional[str] = None
    word_list_path: Optional[str] = None
    answers_path: Optional[str] = None
    external: ExternalLimits = field(default_factory=ExternalLimits)
    llm: LLMSettings = field(default_factory=LLMSettings)
    progress: bool = True

    def __post_init__(self):
        if self.trials_per_challenge < 1:
            raise ConfigError("trials_per_challenge must be >= 1")
        if self.guess_cap < 1 or self.turn_cap < 1:
            raise ConfigError("guess_cap and turn_cap must be >= 1")
        if self.parallelism < 1:
            raise ConfigError("parallelism must be >= 1")

    def to_dict(self) -> dict:
        return {
            "trials_per_challenge": self.trials_per_challenge,
            "guess_cap": self.guess_cap,
            "turn_cap": self.turn_cap,
            "parallelism": self.parallelism,
            "base_seed": self.base_seed,
            "agents": [a.to_dict() for a in self.agents],
            "out_dir": self.out_dir,
            "strict": self.strict,
            "max_rejections": self.max_rejections,
            "deck": self.deck,
            "fixture_path": self.fixture_path,
            "word_list_path": self.word_list_path,
            "answers_path": self.answers_path,
            "external": {
                "max_turns": self.external.max_turns,
                "wall_clock_s": self.external.wall_clock_s,
                "handshake_timeout_s": self.external.handshake_timeout_s,
                "read_timeout_s": self.external.read_timeout_s,
            },
            "llm": self.llm.to_dict(),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "RunConfig":
        agents = []
        for entry in data.get("agents", []):
            agents.append(parse_agent_spec(entry) if isinstance(entry, str) else AgentConfig.from_dict(entry))
        known = {
            k: data[k] for k in (
                "trials_per_challenge", "guess_cap", "turn_cap", "parallelism", "base_seed", "out_dir",
                "strict", "max_rejections", "deck", "fixture_path", "word_list_path", "answers_path", "progress",
            ) if k in data
        }
        return cls(
            agents=agents,
            external=ExternalLimits(**data.get("external", {})),
            llm=LLMSettings.from_dict(data.get("llm")),
            **known,
        )

    def load_word_list(self) -> WordList:
        if self.word_list_path:
            return load_word_list(self.word_list_path, self.answers_path)
        if self.answers_path:
            with resources.as_file(resources.files("diffprobe") / "data" / "allowed.txt") as allowed:
                return load_word_list(allowed, self.answers_path)
        return default_word_list()

    def load_fixture(self) -> BattleFixture:
        return load_fixture(self.fixture_path)


def derive_seed(base_seed: int, challenge_id: str, agent_id: str, trial_index: int) -> int:
    """Deterministic 63-bit seed from tuple identity"""
    digest = hashlib.sha256(f"{base_seed}:{challenge_id}:{agent_id}:{trial_index}".encode("utf-8")).hexdigest()
    return int(digest[:16], 16) & ((1 << 63) - 1)


# ============================================================
# Challenge sets
# ============================================================

def wordle_challenges(answers: Iterable[str]) -> List[Challenge]:
    """One challenge per answer; the id is the upper-cased answer"""
    return [Challenge(a.upper(), ChallengeKind.WORDLE, {"answer": a.upper()}) for a in answers]


def battle_challenges(fixture: BattleFixture, deck: Optional[str] = None,
                      bosses: Optional[Sequence[str]] = None) -> List[Challenge]:
    deck_name = deck or fixture.default_deck
    fixture.deck(deck_name)
    chosen = [fixture.boss(b) for b in bosses] if bosses else list(fixture.bosses)
    return [Challenge(b.challenge_id, ChallengeKind.BATTLE, {"boss": b.name, "deck": deck_name}) for b in chosen]


def external_challenges(command: Sequence[str], challenge_ids: Sequence[str],
                        params: Optional[Dict[str, dict]] = None) -> List[Challenge]:
    params = params or {}
    return [
        Challenge(cid, ChallengeKind.EXTERNAL, {"command": list(command), "params": dict(params.get(cid, {}))})
        for cid in challenge_ids
    ]


# ============================================================
# Trial log
# ============================================================

class TrialLog:
    """
    Append-only trials.jsonl with a single writer

    Every append is flushed and fsynced. load() truncates a torn final line
    left by a killed process.
    """

    def __init__(self, path: Union[str, Path]):
        self.path = Path(path)
        self._lock = threading.Lock()

    def load(self) -> List[TrialRecord]:
        if not self.path.exists():
            return []
        try:
            raw = self.path.read_bytes()
        except OSError as e:
            raise RunnerIOError(f"Cannot read {self.path}: {e}") from e

        records = []
        offset = 0
        for line in raw.splitlines(keepends=True):
            complete = line.endswith(b"\n")
            try:
                if not line.strip():
                    offset += len(line)
                    continue
                record = TrialRecord.from_dict(json.loads(line))
            except (ValueError, KeyError) as e:
                if offset + len(line) == len(raw):
                    self._truncate(offset)
                    break
                raise RunnerIOError(f"Corrupt record in {self.path} at byte {offset}: {e}") from e
            if not complete:
                self._truncate(offset)
                break
            records.append(record)
            offset += len(line)
        return records

    def _truncate(self, offset: int) -> None:
        logger.warning("Truncating torn final record in %s at byte %d", self.path, offset)
        try:
            with open(self.path, "r+b") as f:
                f.truncate(offset)
        except OSError as e:
            raise RunnerIOError(f"Cannot repair {self.path}: {e}") from e

    def completed_keys(self) -> Set[Tuple[str, str, int]]:
        return {r.key for r in self.load()}

    def append(self, record: TrialRecord) -> None:
        line = json.dumps(record.to_dict(), separators=(",", ":"), sort_keys=True) + "\n"
        with self._lock:
            try:
                self.path.parent.mkdir(parents=True, exist_ok=True)
                with open(self.path, "a", encoding="utf-8") as f:
                    f.write(line)
                    f.flush()
                    os.fsync(f.fileno())
            except OSError as e:
                raise RunnerIOError(f"Cannot append to {self.path}: {e}") from e


def load_trials(path: Union[str, Path]) -> List[TrialRecord]:
    """Records from a trials.jsonl file or a run directory containing one"""
    path = Path(path)
    if path.is_dir():
        path = path / TRIALS_FILE
    if not path.exists():
        raise InputFileError(path, FileNotFoundError("no such file"))
    return TrialLog(path).load()


# ============================================================
# Running trials
# ============================================================

def _safe_name(text: str) -> str:
    return re.sub(r"[^A-Za-z0-9._-]+", "-", text).strip("-") or "x"


def play_session(session, agent) -> GameResult:
    """Observation/action loop until the session finishes"""
    while not session.finished:
        session.apply(agent.act(session.observe()).parsed)
    return session.result()


@dataclass
class RunContext:
    """Shared, read-only inputs of one run"""
    config: RunConfig
    out_dir: Path
    word_list: WordList
    fixture: Optional[BattleFixture] = None
    transport: Optional[ChatTransport] = None


def _failure_metrics(challenge: Challenge, config: RunConfig) -> Dict[str, float]:
    if challenge.kind is ChallengeKind.WORDLE:
        return {"guesses": config.guess_cap, "guess_cap": config.guess_cap, "solved": 0}
    if challenge.kind is ChallengeKind.BATTLE:
        return {"hp_remaining": 0}
    return {}


def run_trial(challenge: Challenge, agent_config: AgentConfig, trial_index: int, ctx: RunContext) -> TrialRecord:
    """
    Play one trial; per-trial errors become ProtocolFailure records

    RunnerIOError is not caught.
    """
    config = ctx.config
    agent_id = agent_config.label
    seed = derive_seed(config.base_seed, challenge.id, agent_id, trial_index)
    started = time.perf_counter()

    record = TrialRecord(challenge.id, agent_id, trial_index, seed, challenge.kind, Outcome.LOSS)
    agent = None
    try:
        agent = create_agent(replace(agent_config, seed=seed), ctx.transport, ctx.word_list)
        result = _play(challenge, agent, seed, trial_index, ctx)
        record.outcome = result.outcome
        record.metrics = dict(result.metrics)
        record.flags = list(result.flags)
    except ProtocolFailure as e:
        record.outcome = Outcome.PROTOCOL_FAILURE
        # imputed failure values win over what the game reported so far
        record.metrics = {**e.metrics, **_failure_metrics(challenge, config)}
        record.failure_reason = e.reason
        logger.info("%s/%s/%d: protocol failure: %s", challenge.id, agent_id, trial_index, e.reason)
    except RunnerIOError:
        raise
    except DiffProbeError as e:
        record.outcome = Outcome.PROTOCOL_FAILURE
        record.metrics = _failure_metrics(challenge, config)
        record.failure_reason = f"{type(e).__name__}: {e}"
        logger.warning("%s/%s/%d failed: %s", challenge.id, agent_id, trial_index, e)
    finally:
        record.wall_ms = round((time.perf_counter() - started) * 1000.0, 3)

    if agent is not None and agent.transcript is not None and len(agent.transcript):
        name = f"{_safe_name(challenge.id)}__{_safe_name(agent_id)}__{trial_index}.jsonl"
        try:
            path = agent.transcript.save(ctx.out_dir / "transcripts" / name)
        except OSError as e:
            raise RunnerIOError(f"Cannot write transcript {name}: {e}") from e
        record.transcript_path = str(path.relative_to(ctx.out_dir))
    return record


def _play(challenge: Challenge, agent, seed: int, trial_index: int, ctx: RunContext) -> GameResult:
    config = ctx.config
    params = challenge.params
    if challenge.kind is ChallengeKind.WORDLE:
        session = WordleSession(
            params["answer"],
            word_list=ctx.word_list,
            guess_cap=config.guess_cap,
            strict=config.strict,
            max_rejections=config.max_rejections,
        )
        return play_session(session, agent)

    if challenge.kind is ChallengeKind.BATTLE:
        fixture = ctx.fixture or config.load_fixture()
        session = BattleSession(
            fixture.boss(params["boss"]),
            fixture.deck(params.get("deck")),
            seed,
            turn_cap=config.turn_cap,
            player_hp=fixture.player_hp,
            player_name=fixture.player_name,
        )
        return play_session(session, agent)

    logs = ctx.out_dir / "logs"
    logs.mkdir(parents=True, exist_ok=True)
    stderr_path = logs / f"{_safe_name(challenge.id)}__{_safe_name(agent.agent_id)}__{trial_index}.stderr.log"
    return run_external_challenge(
        params["command"], agent, challenge.id, seed, params.get("params", {}), config.external, stderr_path,
    )


def _check_agent(agent_config: AgentConfig, challenges: Sequence[Challenge]) -> None:
    kinds = {c.kind for c in challenges}
    if agent_config.kind is AgentKind.SOLVER and ChallengeKind.BATTLE in kinds:
        raise ConfigError("the solver agent only plays Wordle")
    if agent_config.policy == "expert" and ChallengeKind.WORDLE in kinds:
        raise ConfigError("scripted:expert only plays battles")


def _resolve_llm(agent_config: AgentConfig, llm: LLMSettings) -> AgentConfig:
    if not agent_config.kind.is_llm:
        return agent_config
    model = agent_config.model_name or llm.model_name
    if not model:
        raise ConfigError(f"{agent_config.label} needs a model name (llm.model_name)")
    # a per-agent temperature wins over the llm section when it differs from the default
    temperature = llm.temperature if agent_config.temperature == 1.0 else agent_config.temperature
    return replace(agent_config, model_name=model, temperature=temperature,
                   agent_id=agent_config.agent_id or agent_config.label)


# ============================================================
# Manifest
# ============================================================

def _package_version() -> str:
    try:
        return metadata.version("diffprobe")
    except metadata.PackageNotFoundError:
        return "unknown"


def build_manifest(config: RunConfig, challenges: Sequence[Challenge], ctx: RunContext,
                   effective_config: Optional[dict] = None) -> dict:
    """
    Provenance record of a run

    manifest_hash covers everything that determines results; parallelism,
    output location and progress display are excluded.
    """
    determining = config.to_dict()
    for key in ("parallelism", "out_dir"):
        determining.pop(key, None)
    digests = {
        "word_list": ctx.word_list.digest,
        "battle_fixture": ctx.fixture.digest if ctx.fixture else None,
    }
    body = {
        "config": determining,
        "digests": digests,
        "challenges": [c.to_dict() for c in challenges],
    }
    canonical = json.dumps(body, sort_keys=True, separators=(",", ":"))
    return {
        "manifest_hash": hashlib.sha256(canonical.encode("utf-8")).hexdigest(),
        "package_version": _package_version(),
        "created_at": datetime.now(timezone.utc).isoformat(),
        "config": config.to_dict(),
        "effective_config": effective_config,
        "digests": digests,
        "challenges": [c.to_dict() for c in challenges],
    }


def write_manifest(out_dir: Path, manifest: dict) -> Path:
    """
    Write run_manifest.json, refusing to mix two different runs

    Raises:
        RunMismatch: the directory already holds a run with another hash
    """
    path = out_dir / MANIFEST_FILE
    if path.exists():
        try:
            previous = json.loads(path.read_text(encoding="utf-8"))
        except (OSError, ValueError) as e:
            raise RunnerIOError(f"Cannot read {path}: {e}") from e
        if previous.get("manifest_hash") != manifest["manifest_hash"]:
            raise RunMismatch(f"{out_dir} holds a different run (manifest hash differs); use another --out-dir")
        return path
    try:
        tmp = path.with_suffix(".json.tmp")
        tmp.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8")
        os.replace(tmp, path)
    except OSError as e:
        raise RunnerIOError(f"Cannot write {path}: {e}") from e
    return path


# ============================================================
# Run
# ============================================================

def run(
    config: RunConfig,
    challenges: Sequence[Challenge],
    agents: Optional[Sequence[AgentConfig]] = None,
    word_list: Optional[WordList] = None,
    fixture: Optional[BattleFixture] = None,
    transport: Optional[ChatTransport] = None,
    effective_config: Optional[dict] = None,
) -> Iterator[TrialRecord]:
    """
    Run every missing (challenge, agent, trial) tuple, yielding records as they are appended

    Records arrive in completion order. A single appender (this generator)
    writes trials.jsonl, so workers never touch the file.

    Raises:
        ConfigError: invalid agent/challenge combination or missing LLM settings
        RunMismatch: out_dir holds a different run
        RunnerIOError: the run directory cannot be read or written
    """
    agent_configs = [_resolve_llm(a, config.llm) for a in (agents if agents is not None else config.agents)]
    if not agent_configs:
        raise ConfigError("no agents configured")
    labels = [a.label for a in agent_configs]
    if len(set(labels)) != len(labels):
        raise ConfigError(f"agent ids must be unique: {labels}")
    ids = [c.id for c in challenges]
    if len(set(ids)) != len(ids):
        raise ConfigError("challenge ids must be unique within a run")
    for a in agent_configs:
        _check_agent(a, challenges)

    owned_transport = None
    if any(a.kind.is_llm for a in agent_configs) and transport is None:
        if not config.llm.endpoint_url:
            raise ConfigError("LLM agents need llm.endpoint_url")
        if not os.environ.get(API_KEY_ENV):
            raise ConfigError(f"LLM agents need the {API_KEY_ENV} environment variable")
        transport = owned_transport = config.llm.make_transport()

    out_dir = Path(config.out_dir)
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
    except OSError as e:
        raise RunnerIOError(f"Cannot create {out_dir}: {e}") from e

    if fixture is None and any(c.kind is ChallengeKind.BATTLE for c in challenges):
        fixture = config.load_fixture()
    ctx = RunContext(config, out_dir, word_list or config.load_word_list(), fixture, transport)
    write_manifest(out_dir, build_manifest(replace(config, agents=agent_configs), challenges, ctx, effective_config))

    log = TrialLog(out_dir / TRIALS_FILE)
    done = log.completed_keys()
    pending = [
        (challenge, agent, i)
        for challenge in challenges
        for agent in agent_configs
        for i in range(config.trials_per_challenge)
        if (challenge.id, agent.label, i) not in done
    ]
    if done:
        logger.info("Resuming %s: %d recorded, %d to go", out_dir, len(done), len(pending))

    bar = tqdm(total=len(pending), desc="trials", unit="trial", disable=not config.progress)
    try:
        if config.parallelism == 1:
            for challenge, agent, i in pending:
                record = run_trial(challenge, agent, i, ctx)
                log.append(record)
                bar.update(1)
                yield record
        else:
            with ThreadPoolExecutor(max_workers=config.parallelism, thread_name_prefix="trial") as pool:
                futures = [pool.submit(run_trial, c, a, i, ctx) for c, a, i in pending]
                try:
                    for future in as_completed(futures):
                        record = future.result()
                        log.append(record)
                        bar.update(1)
                        yield record
                finally:
                    for future in futures:
                        future.cancel()
    finally:
        bar.close()
        if owned_transport is not None:
            owned_transport.close()


def run_all(config: RunConfig, challenges: Sequence[Challenge], **kwargs) -> List[TrialRecord]:
    """Drive run() to completion and return the newly written records"""
    return list(run(config, challenges, **kwargs))
