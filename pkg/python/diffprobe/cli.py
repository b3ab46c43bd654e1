"""
Command-line interface

    diffprobe bench-solver [--allowed FILE] [--answers FILE] [--cap N] [--out FILE]
    diffprobe solve --answer WORD
    diffprobe run --game wordle|battle|external --agent SPEC [--agent SPEC ...] [--game-cmd "COMMAND"]
    diffprobe correlate --human FILE [--trials-path PATH] [--format md --format svg]
    diffprobe demo-battle [--boss NAME] [--agent SPEC] [--subprocess]
    diffprobe protocol-check [--agent SPEC] -- COMMAND [ARG ...]

Exit codes: 0 ok, 2 input error, 3 runtime IO, 4 statistics, 64 usage.
"""

import argparse
import csv
import json
import logging
import shlex
import sys
from dataclasses import replace
from pathlib import Path
from typing import Dict, List, Optional, Sequence

from . import aggregates as agg_mod
from . import harness, report, stats
from .agents import create_agent, parse_agent_spec
from .battle import BattleSession
from .catalog import HumanSchema, load_human_csv
from .config import CliConfig, configure_logging, load_config_file, merge_overrides
from .errors import DiffProbeError, InputError, ProtocolFailure, RunnerIOError, StatisticsError
from .external import ExternalLimits, run_external_challenge
from .records import ChallengeKind
from .solver import benchmark, solver_for
from .wordle import ORIGINAL_GUESS_CAP, bracket, bracket_pattern, normalize_word, score_guess

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_RUNTIME = 3
EXIT_STATISTICS = 4
EXIT_USAGE = 64
EXIT_INTERRUPTED = 130

BATTLE_SERVER = [sys.executable, "-m", "diffprobe.battle_server"]


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    """argparse with usage errors raised instead of exiting 2"""

    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(f"{self.prog}: error: {message}")


def exit_code_for(error: BaseException) -> int:
    if isinstance(error, InputError):
        return EXIT_INPUT
    if isinstance(error, StatisticsError):
        return EXIT_STATISTICS
    return EXIT_RUNTIME


# ============================================================
# Argument parsing
# ============================================================

def _common_flags() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--config", help="JSON config file; flags override its values")
    common.add_argument("--out-dir", help="run directory (default runs/latest)")
    common.add_argument("--seed", type=int, help="base seed for per-trial seeds")
    common.add_argument("--parallelism", type=int, help="worker threads for trials")
    common.add_argument("--trials", type=int, help="trials per challenge per agent")
    common.add_argument("--guess-cap", type=int, help="Wordle guess cap (default 12)")
    common.add_argument("-v", "--verbose", action="count", default=0, help="-v info, -vv debug")
    common.add_argument("-q", "--quiet", action="store_true", help="no progress bars")
    return common


def build_parser() -> argparse.ArgumentParser:
    common = _common_flags()
    parser = _Parser(prog="diffprobe", description="Measure game-challenge difficulty with agent playtesters")
    sub = parser.add_subparsers(dest="subcommand", required=True, parser_class=_Parser)

    bench = sub.add_parser("bench-solver", aliases=["bench"], parents=[common],
                           help="benchmark the entropy solver on every answer")
    bench.add_argument("--allowed", help="allowed-guess list (default: packaged list)")
    bench.add_argument("--answers", help="answer list (default: packaged list)")
    bench.add_argument("--cap", type=int, help="guess cap (default: --guess-cap or 12)")
    bench.add_argument("--out", help="per-answer CSV (default <out-dir>/benchmark.csv)")

    solve = sub.add_parser("solve", parents=[common], help="show the solver's guesses for one answer")
    solve.add_argument("--answer", required=True, help="five-letter answer word")
    solve.add_argument("--allowed", help="allowed-guess list")
    solve.add_argument("--answers", help="answer list")

    run = sub.add_parser("run", parents=[common], help="run trials and append them to trials.jsonl")
    run.add_argument("--game", choices=[k.value for k in ChallengeKind], help="challenge set (default wordle)")
    run.add_argument("--agent", action="append", dest="agents", metavar="SPEC",
                     help="solver | random | scripted:expert | scripted:A,B | zeroshot | cot | cotplus (repeatable)")
    run.add_argument("--limit", type=int, help="Wordle: only the first N answers in sorted order")
    run.add_argument("--allowed", help="Wordle allowed-guess list")
    run.add_argument("--answers", help="Wordle answer list (the challenge set)")
    run.add_argument("--strict", action="store_true", default=None, help="Wordle: reject non-dictionary guesses")
    run.add_argument("--deck", help="battle deck (compensation knob)")
    run.add_argument("--turn-cap", type=int, help="battle turn cap")
    run.add_argument("--boss", action="append", dest="bosses", help="battle: only these bosses (repeatable)")
    run.add_argument("--fixture", help="battle fixture JSON")
    game_cmd = run.add_mutually_exclusive_group()
    game_cmd.add_argument("--game-cmd", metavar="COMMAND",
                          help='external: game command as one shell-quoted string, e.g. "python my_game.py"')
    game_cmd.add_argument("--command", nargs="+", metavar="ARG", help="external: game command as separate arguments")
    run.add_argument("--challenge", action="append", dest="challenge_ids", help="external: challenge id (repeatable)")
    run.add_argument("--model", help="LLM model name")
    run.add_argument("--endpoint", help="LLM chat-completions URL")

    corr = sub.add_parser("correlate", parents=[common], help="correlate trial aggregates with human statistics")
    corr.add_argument("--trials-path", help="trials.jsonl or run directory (default <out-dir>)")
    corr.add_argument("--human", required=True, help="human statistics CSV")
    corr.add_argument("--schema", help="column mapping overrides, e.g. avg_guesses=Average,answer=Word")
    corr.add_argument("--exclude-protocol-failures", action="store_true",
                      help="drop ProtocolFailure trials before averaging")
    corr.add_argument("--per-trial", action="store_true",
                      help="also correlate every trial against its challenge's human value")
    corr.add_argument("--format", action="append", dest="formats", choices=["md", "svg"],
                      help="optional report formats besides csv and json (repeatable)")

    demo = sub.add_parser("demo-battle", parents=[common], help="play one battle and print the outcome")
    demo.add_argument("--boss", help="boss name or id (default: first in the roster)")
    demo.add_argument("--agent", default="scripted:expert", help="agent spec (default scripted:expert)")
    demo.add_argument("--deck", help="deck name")
    demo.add_argument("--turn-cap", type=int, default=50,
                      help="player turns before the battle counts as a Loss (default 50)")
    demo.add_argument("--fixture", help="battle fixture JSON")
    demo.add_argument("--subprocess", action="store_true", help="play through the stdio protocol server")

    check = sub.add_parser("protocol-check", parents=[common], help="play one episode against a game command")
    check.add_argument("--agent", default="random", help="mock agent spec (default random)")
    check.add_argument("--challenge-id", default="check", help="challenge id sent in hello")
    check.add_argument("--handshake-timeout", type=float, default=10.0,
                       help="seconds to wait for the game's hello (default 10)")
    check.add_argument("--read-timeout", type=float, default=60.0,
                       help="seconds to wait for each later message (default 60)")
    check.add_argument("game_command", nargs=argparse.REMAINDER, help="game command line after --")

    return parser


def _effective_config(args: argparse.Namespace) -> CliConfig:
    overrides = {
        "out_dir": args.out_dir,
        "base_seed": args.seed,
        "parallelism": args.parallelism,
        "trials_per_challenge": args.trials,
        "guess_cap": args.guess_cap,
    }
    if args.subcommand == "run":
        overrides.update({
            "game": args.game,
            "agents": args.agents,
            "limit": args.limit,
            "word_list_path": args.allowed,
            "answers_path": args.answers,
            "strict": args.strict,
            "deck": args.deck,
            "turn_cap": args.turn_cap,
            "bosses": args.bosses,
            "fixture_path": args.fixture,
            "command": args.game_cmd or args.command,
            "challenge_ids": args.challenge_ids,
            "llm.model_name": args.model,
            "llm.endpoint_url": args.endpoint,
        })
    base = load_config_file(args.config)
    effective = merge_overrides(base, overrides)
    return CliConfig(
        subcommand=args.subcommand,
        run_dir=effective.get("out_dir", "runs/latest"),
        config_path=args.config,
        overrides={k: v for k, v in overrides.items() if v is not None},
        effective=effective,
    )


# ============================================================
# Subcommands
# ============================================================

def _word_list(allowed: Optional[str], answers: Optional[str]):
    config = harness.RunConfig(word_list_path=allowed, answers_path=answers)
    return config.load_word_list()


def cmd_bench_solver(args: argparse.Namespace, cli: CliConfig) -> int:
    word_list = _word_list(args.allowed, args.answers)
    cap = args.cap or cli.effective.get("guess_cap") or harness.RunConfig().guess_cap
    results, summary = benchmark(word_list, cap, progress=not args.quiet and sys.stderr.isatty())

    out = Path(args.out) if args.out else Path(cli.run_dir) / "benchmark.csv"
    try:
        out.parent.mkdir(parents=True, exist_ok=True)
        with open(out, "w", encoding="utf-8", newline="") as f:
            writer = csv.writer(f)
            writer.writerow(["answer", "guesses", "solved", "trace"])
            for r in results:
                writer.writerow([r.answer, r.guesses_used if r.solved else cap, int(r.solved), " ".join(r.guesses)])
    except OSError as e:
        raise RunnerIOError(f"Cannot write {out}: {e}") from e

    print(summary.summary_line())
    logger.info("Per-answer results in %s", out)
    return EXIT_OK


def cmd_solve(args: argparse.Namespace, cli: CliConfig) -> int:
    word_list = _word_list(args.allowed, args.answers)
    answer = normalize_word(args.answer)
    cap = cli.effective.get("guess_cap") or harness.RunConfig().guess_cap
    result = solver_for(word_list).solve(answer, cap)
    for i, guess in enumerate(result.guesses, start=1):
        print(f"{i:2d}. {bracket(guess)} -> {bracket_pattern(score_guess(answer, guess))}")
    status = "solved" if result.solved else "not solved"
    within = " (within the original 6)" if result.solved and result.guesses_used <= ORIGINAL_GUESS_CAP else ""
    print(f"{status} in {result.guesses_used} guesses{within}")
    return EXIT_OK


def game_command(command) -> List[str]:
    """
    External game command as an argument list

    A string is split with shell quoting rules; a list is taken as is.
    """
    if not command:
        return []
    if isinstance(command, str):
        try:
            return shlex.split(command)
        except ValueError as e:
            raise InputError(f"Cannot parse game command {command!r}: {e}") from e
    return [str(part) for part in command]


def _challenges(effective: Dict, config: "harness.RunConfig") -> List:
    game = effective.get("game", "wordle")
    if game == ChallengeKind.WORDLE.value:
        answers = list(config.load_word_list().sorted_answers)
        limit = effective.get("limit")
        if limit is not None:
            if int(limit) < 1:
                raise InputError("--limit must be >= 1")
            answers = answers[: int(limit)]
        return harness.wordle_challenges(answers)
    if game == ChallengeKind.BATTLE.value:
        return harness.battle_challenges(config.load_fixture(), config.deck, effective.get("bosses"))
    command = game_command(effective.get("command"))
    ids = effective.get("challenge_ids")
    if not command or not ids:
        raise InputError("--game external needs --game-cmd and at least one --challenge")
    return harness.external_challenges(command, ids, effective.get("challenge_params"))


def cmd_run(args: argparse.Namespace, cli: CliConfig) -> int:
    effective = dict(cli.effective)
    effective["progress"] = not args.quiet and sys.stderr.isatty()
    config = harness.RunConfig.from_dict(effective)
    challenges = _challenges(effective, config)

    outcomes: Dict[str, int] = {}
    for record in harness.run(config, challenges, effective_config=cli.effective):
        outcomes[record.outcome.value] = outcomes.get(record.outcome.value, 0) + 1
    summary = ", ".join(f"{k}={v}" for k, v in sorted(outcomes.items())) or "nothing to do"
    print(f"{len(challenges)} challenges, {len(config.agents)} agents: {summary}")
    print(f"trials in {Path(config.out_dir) / harness.TRIALS_FILE}")
    return EXIT_OK


def _manifest_hash(trials_path: Path) -> Optional[str]:
    run_dir = trials_path if trials_path.is_dir() else trials_path.parent
    manifest = run_dir / harness.MANIFEST_FILE
    if not manifest.exists():
        return None
    try:
        return json.loads(manifest.read_text(encoding="utf-8")).get("manifest_hash")
    except (OSError, ValueError):
        logger.warning("Unreadable manifest %s", manifest)
        return None


def cmd_correlate(args: argparse.Namespace, cli: CliConfig) -> int:
    trials_path = Path(args.trials_path or cli.run_dir)
    human = load_human_csv(args.human, HumanSchema.parse(args.schema))
    records = harness.load_trials(trials_path)
    if not records:
        raise InputError(f"No trial records in {trials_path}")

    aggregates = agg_mod.aggregate(records, exclude_protocol_failures=args.exclude_protocol_failures)
    pairs = stats.default_pairs({a.kind for a in aggregates})
    if not pairs:
        pairs = (stats.MetricPair("win_rate", "win_rate"),)
    correlations = stats.correlate_agents(aggregates, human, pairs[:1])
    correlations += stats.correlate_agents(aggregates, human, pairs[1:], strict=False)
    if args.per_trial:
        trial_metric = {"avg_guesses": "guesses", "avg_hp_remaining": "hp_remaining"}
        primary = pairs[0]
        pair = stats.MetricPair(trial_metric.get(primary.agent_metric, primary.agent_metric), primary.human_metric)
        correlations += stats.correlate_trials(records, human, pair)

    difficulty = report.build_report(aggregates, human, correlations, _manifest_hash(trials_path))
    out_dir = Path(args.out_dir) if args.out_dir else (trials_path if trials_path.is_dir() else trials_path.parent)
    written = report.render_report(difficulty, out_dir, ["csv", "json"] + (args.formats or []))

    for c in correlations:
        print(f"{c.agent_id:24s} {c.pair.label:36s} n={c.n:<5d} r={stats.format_r(c.r):>6s} "
              f"p={stats.format_p(c.p):>6s} {c.bucket.value}")
    for path in written:
        logger.info("Wrote %s", path)
    return EXIT_OK


def cmd_demo_battle(args: argparse.Namespace, cli: CliConfig) -> int:
    config = harness.RunConfig(fixture_path=args.fixture)
    fixture = config.load_fixture()
    boss = fixture.boss(args.boss) if args.boss else fixture.bosses[0]
    seed = cli.effective.get("base_seed") or 0
    agent = create_agent(replace(parse_agent_spec(args.agent), seed=seed))

    if args.subprocess:
        params = {"boss": boss.name, "deck": args.deck or fixture.default_deck, "turn_cap": args.turn_cap}
        if args.fixture:
            params["fixture"] = args.fixture
        result = run_external_challenge(BATTLE_SERVER, agent, boss.challenge_id, seed, params)
    else:
        session = BattleSession(boss, fixture.deck(args.deck), seed, turn_cap=args.turn_cap,
                                player_hp=fixture.player_hp, player_name=fixture.player_name)
        while not session.finished:
            obs = session.observe()
            action = agent.act(obs)
            logger.info("turn %d: %s", obs.structured_state.get("turn", 0), action.parsed)
            session.apply(action.parsed)
        result = session.result()

    metrics = " ".join(f"{k}={v}" for k, v in sorted(result.metrics.items()))
    flags = f" flags={','.join(result.flags)}" if result.flags else ""
    print(f"{boss.name}: {result.outcome.value} {metrics}{flags}")
    return EXIT_OK


def cmd_protocol_check(args: argparse.Namespace, cli: CliConfig) -> int:
    command = list(args.game_command or [])
    if command and command[0] == "--":
        command = command[1:]
    if not command:
        raise UsageError("usage: diffprobe protocol-check [--agent SPEC] -- COMMAND [ARG ...]")
    agent_config = parse_agent_spec(args.agent)
    if agent_config.kind.is_llm:
        raise InputError("protocol-check takes a mock agent (random, scripted:...)")
    agent = create_agent(agent_config)
    limits = ExternalLimits(handshake_timeout_s=args.handshake_timeout, read_timeout_s=args.read_timeout)
    seed = cli.effective.get("base_seed") or 0
    try:
        result = run_external_challenge(command, agent, args.challenge_id, seed, {}, limits)
    except ProtocolFailure as e:
        print(f"NOT CONFORMANT: {e.reason}")
        return EXIT_RUNTIME
    metrics = " ".join(f"{k}={v}" for k, v in sorted(result.metrics.items()))
    print(f"conformant: {result.outcome.value} {metrics}".rstrip())
    return EXIT_OK


COMMANDS = {
    "bench-solver": cmd_bench_solver,
    "bench": cmd_bench_solver,
    "solve": cmd_solve,
    "run": cmd_run,
    "correlate": cmd_correlate,
    "demo-battle": cmd_demo_battle,
    "protocol-check": cmd_protocol_check,
}


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as e:
        print(e, file=sys.stderr)
        return EXIT_USAGE

    configure_logging(args.verbose)
    try:
        cli = _effective_config(args)
        return COMMANDS[args.subcommand](args, cli)
    except UsageError as e:
        print(f"diffprobe: {e}", file=sys.stderr)
        return EXIT_USAGE
    except DiffProbeError as e:
        logger.debug("Command failed", exc_info=True)
        print(f"diffprobe: {e}", file=sys.stderr)
        return exit_code_for(e)
    except KeyboardInterrupt:
        print("diffprobe: interrupted; rerun the same command to resume", file=sys.stderr)
        return EXIT_INTERRUPTED
