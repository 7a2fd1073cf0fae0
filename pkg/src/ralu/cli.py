"""Command-line entry point: ``ralu solve | units | bench | analyze``.

Exit codes: 0 success, 1 runtime failure, 2 usage or configuration error.
Settings resolve as flag > JSON config file > built-in default.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import sys
from dataclasses import dataclass, field
from pathlib import Path

from ralu import analysis
from ralu.alignment import AlignmentAborted, AlignmentConfig, ChatSettings
from ralu.errors import RaluError
from ralu.harness.bench import EmptyTaskSet, run_benchmark, safe_name
from ralu.harness.datasets import LOADERS, DatasetError, assert_entry_point, load_dataset
from ralu.harness.evaluate import evaluate_code
from ralu.harness.strategies import STRATEGIES, PipelineConfig, normalize_strategy, solve_task
from ralu.llm import (
    BackendConfig,
    ChatClient,
    HttpBackend,
    LLMError,
    ReplayBackend,
    SessionClient,
    Timeout,
    write_fixture,
)
from ralu.sandbox import SandboxPolicy
from ralu.synthesis import CODEGEN, MATHQA
from ralu.units import ASCII_QUOTES, CFG, LINE_BY_LINE, DEFAULT_QUOTES, extract_units

EXIT_OK, EXIT_RUNTIME, EXIT_USAGE = 0, 1, 2

STRATEGY_CHOICES = ("ralu", "ralu-line", "ralu-nlsteps", "direct", "cot")

log = logging.getLogger("ralu")


class ConfigError(RaluError):
    pass


class UsageError(RaluError):
    pass


@dataclass
class AppConfig:
    backend: BackendConfig = field(default_factory=BackendConfig)
    model: str = "default"
    strategy: str = "ralu"
    alignment: AlignmentConfig = field(default_factory=AlignmentConfig)
    sandbox: SandboxPolicy = field(default_factory=SandboxPolicy)
    workers: int = 1
    out_dir: str = "ralu_out"
    replay: str | None = None

    def __post_init__(self):
        if self.workers < 1:
            raise ValueError("workers must be >= 1")

    def pipeline(self) -> PipelineConfig:
        return PipelineConfig(alignment=self.alignment, sandbox=self.sandbox)


# config-file keys per section, with the flag that overrides each
_CHAT_KEYS = ("temperature", "frequency_penalty", "max_tokens")
_ALIGN_KEYS = ("max_repair_rounds", "confidence_threshold", "fallback", "malformed_retry")


def _section(doc: dict, name: str, allowed) -> dict:
    sec = doc.get(name, {})
    if not isinstance(sec, dict):
        raise ConfigError(f"config section {name!r} must be an object")
    unknown = set(sec) - set(allowed)
    if unknown:
        raise ConfigError(f"unknown key(s) in {name!r}: {', '.join(sorted(unknown))}")
    return dict(sec)


def read_config_file(path: str | Path) -> dict:
    try:
        with open(path, encoding="utf-8") as fh:
            doc = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc.msg} (line {exc.lineno})") from None
    if not isinstance(doc, dict):
        raise ConfigError("config file must hold one JSON object")
    top = {"backend", "model", "strategy", "alignment", "sandbox", "workers", "out_dir", "replay"}
    unknown = set(doc) - top
    if unknown:
        raise ConfigError(f"unknown config key(s): {', '.join(sorted(unknown))}")
    return doc


def resolve_config(args: argparse.Namespace) -> AppConfig:
    """Merge defaults, the optional config file and the command-line flags."""
    doc = read_config_file(args.config) if getattr(args, "config", None) else {}
    backend = _section(doc, "backend", [f.name for f in dataclasses.fields(BackendConfig)])
    align = _section(doc, "alignment", _ALIGN_KEYS + _CHAT_KEYS)
    sandbox = _section(doc, "sandbox", [f.name for f in dataclasses.fields(SandboxPolicy)])
    top = {k: doc[k] for k in ("model", "strategy", "workers", "out_dir", "replay") if k in doc}

    def flag(name):
        return getattr(args, name, None)

    overrides = [
        (backend, "endpoint_url", "backend_url"),
        (top, "model", "model"),
        (top, "strategy", "strategy"),
        (align, "max_repair_rounds", "max_repairs"),
        (align, "temperature", "temperature"),
        (align, "frequency_penalty", "freq_penalty"),
        (top, "workers", "workers"),
        (top, "out_dir", "out"),
        (top, "replay", "replay"),
        (sandbox, "interpreter_path", "interpreter"),
        (sandbox, "timeout_s", "timeout_s"),
    ]
    for target, key, attr in overrides:
        if flag(attr) is not None:
            target[key] = flag(attr)

    try:
        model = str(top.get("model", "default"))
        chat = ChatSettings(model=model, **{k: align.pop(k) for k in _CHAT_KEYS if k in align})
        return AppConfig(
            backend=BackendConfig(**backend),
            model=model,
            strategy=normalize_strategy(str(top.get("strategy", "ralu"))),
            alignment=AlignmentConfig(chat=chat, **align),
            sandbox=SandboxPolicy(**sandbox),
            workers=int(top.get("workers", 1)),
            out_dir=str(top.get("out_dir", "ralu_out")),
            replay=top.get("replay"),
        )
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid configuration: {exc}") from None


def make_client(cfg: AppConfig) -> ChatClient:
    if cfg.replay:
        try:
            return ReplayBackend.from_file(cfg.replay)
        except OSError as exc:
            raise ConfigError(f"cannot read replay fixture {cfg.replay}: {exc.strerror}") from None
    return HttpBackend(cfg.backend)


@dataclass
class InlineTask:
    """A task given on the command line; tests are optional here."""

    id: str
    kind: str
    spec: str
    entry_point: str | None = None
    tests: str | None = None
    gold_answer: str | None = None


def _inline_task(args) -> InlineTask:
    kind = MATHQA if args.kind == "math" else CODEGEN
    spec = args.spec
    entry, tests = args.entry_point, None
    if kind == CODEGEN:
        asserts = [ln.strip() for ln in spec.splitlines() if ln.strip().startswith("assert")]
        if asserts:
            tests = "\n".join(asserts) + "\n"
            if entry is None:
                entry = assert_entry_point(asserts[0])
    return InlineTask("inline", kind, spec, entry, tests, args.gold)


def _file_task(args):
    if not args.dataset_kind:
        raise UsageError("--task-file needs --dataset-kind")
    tasks = load_dataset(args.task_file, args.dataset_kind)
    if not tasks:
        raise EmptyTaskSet(f"{args.task_file} holds no tasks")
    if args.task_id is None:
        return tasks[0]
    for t in tasks:
        if t.id == args.task_id:
            return t
    raise DatasetError(f"task {args.task_id!r} not found in {args.task_file}")


def cmd_solve(args) -> int:
    if not args.spec and not args.task_file:
        raise UsageError("give a specification with --spec or a dataset file with --task-file")
    cfg = resolve_config(args)
    task = _file_task(args) if args.task_file else _inline_task(args)
    client = make_client(cfg)
    session = SessionClient(client)
    out = Path(cfg.out_dir)
    try:
        outcome = solve_task(task, cfg.strategy, session, cfg.pipeline())
    finally:
        out.mkdir(parents=True, exist_ok=True)
        session.write_trace(out / "trace.jsonl")
        if args.record:
            write_fixture(args.record, session.fixture_entries())
        client.close()
    print(outcome.final_output)
    _, _, calls = session.usage.report()
    note = f"llm_calls={calls} trace={out / 'trace.jsonl'}"
    if outcome.path is not None:
        note += f" converged={outcome.path.converged}"
    for flag_ in outcome.degraded:
        print(f"warning: {flag_}", file=sys.stderr)
    if task.kind == CODEGEN and task.tests:
        verdict = evaluate_code(outcome.final_output, task, cfg.sandbox)
        note += f" tests={'passed' if verdict.passed else 'failed'}"
    print(note, file=sys.stderr)
    return EXIT_OK


def cmd_units(args) -> int:
    try:
        program = Path(args.program).read_text(encoding="utf-8")
    except OSError as exc:
        print(f"error: cannot read {args.program}: {exc.strerror}", file=sys.stderr)
        return EXIT_RUNTIME
    strategy = CFG if args.strategy == "cfg" else LINE_BY_LINE
    quotes = ASCII_QUOTES if args.ascii_quotes else DEFAULT_QUOTES
    seq = extract_units(program, strategy, entry_point=args.entry_point, quotes=quotes)
    for flag_ in seq.degraded:
        print(f"warning: {flag_}", file=sys.stderr)
    for i, text in enumerate(seq.texts):
        print(f"Unit {i + 1}: {text}")
    return EXIT_OK


def _bench_client_factory(cfg: AppConfig):
    if cfg.replay:
        root = Path(cfg.replay)
        if not root.is_dir():
            raise ConfigError(f"--replay for bench must be a directory of per-task fixtures: {root}")
        return lambda task: ReplayBackend.from_file(root / f"{safe_name(task.id)}.jsonl")
    shared = HttpBackend(cfg.backend)
    return lambda task: shared


def cmd_bench(args) -> int:
    cfg = resolve_config(args)
    if not args.dataset_kind:
        raise UsageError("bench needs --dataset-kind")
    tasks = load_dataset(args.dataset, args.dataset_kind)
    report = run_benchmark(
        tasks,
        cfg.strategy,
        _bench_client_factory(cfg),
        cfg.pipeline(),
        workers=cfg.workers,
        out_dir=cfg.out_dir,
    )
    s = report.summary
    print(f"{'strategy':<16}{s['strategy']}")
    print(f"{'tasks':<16}{s['tasks']}")
    print(f"{s['metric']:<16}{s['score']:.3f}")
    print(f"{'mean calls':<16}{s['mean_llm_calls']:.2f}")
    print(f"{'mean tokens':<16}{s['mean_prompt_tokens'] + s['mean_completion_tokens']:.1f}")
    for reason, count in s["failures"].items():
        print(f"{'  ' + reason:<16}{count}")
    print(f"results in {Path(cfg.out_dir) / 'results.jsonl'}")
    return EXIT_OK


def _judge(args) -> analysis.JudgeModel:
    return analysis.JudgeModel(args.alpha, args.beta, args.p, args.gamma)


def cmd_analyze(args) -> int:
    try:
        if args.quantity == "posterior":
            inp = analysis.PosteriorInputs(args.prior, args.ratio)
            result = {"posterior": analysis.posterior_correctness(inp)}
        else:
            m = _judge(args)
            if args.quantity == "pprime":
                result = {"pprime": analysis.repaired_correctness(m)}
            elif args.quantity == "threshold":
                result = {"threshold": analysis.repair_benefit_threshold(m)}
            elif args.quantity == "beneficial":
                result = {
                    "beneficial": analysis.is_repair_beneficial(m),
                    "threshold": analysis.repair_benefit_threshold(m),
                    "pprime": analysis.repaired_correctness(m),
                }
            else:
                emp = analysis.simulate_judge_repair(m, args.trials, args.seed)
                closed = analysis.repaired_correctness(m)
                result = {
                    "simulated_pprime": emp,
                    "pprime": closed,
                    "trials": args.trials,
                    "seed": args.seed,
                    "tolerance": analysis.binomial_tolerance(closed, args.trials),
                }
    except (ValueError, analysis.DegenerateJudge) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    print(json.dumps(result, sort_keys=True))
    return EXIT_OK


def _backend_flags() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False)
    p.add_argument("--config", help="JSON config file")
    p.add_argument("--backend-url", help="OpenAI-compatible base URL")
    p.add_argument("--model")
    p.add_argument("--strategy", choices=STRATEGY_CHOICES + tuple(s for s in STRATEGIES if "_" in s))
    p.add_argument("--max-repairs", type=int)
    p.add_argument("--temperature", type=float)
    p.add_argument("--freq-penalty", type=float)
    p.add_argument("--workers", type=int)
    p.add_argument("--out", help="output directory for traces and reports")
    p.add_argument("--replay", help="replay fixture (solve: file, bench: directory)")
    p.add_argument("--dataset-kind", choices=sorted(LOADERS))
    p.add_argument("--interpreter", help="interpreter used by the sandbox")
    p.add_argument("--timeout-s", type=float, help="sandbox timeout in seconds")
    return p


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ralu", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    common = _backend_flags()

    solve = sub.add_parser("solve", parents=[common], help="run the pipeline on one task")
    solve.add_argument("--spec", help="inline task specification")
    solve.add_argument("--kind", choices=("code", "math"), default="code")
    solve.add_argument("--entry-point")
    solve.add_argument("--gold", help="gold answer for an inline math task")
    solve.add_argument("--task-file", help="dataset file; the first task (or --task-id) is solved")
    solve.add_argument("--task-id")
    solve.add_argument("--record", help="write the session as a replay fixture")
    solve.set_defaults(func=cmd_solve)

    units = sub.add_parser("units", help="print the logic units of a program")
    units.add_argument("program")
    units.add_argument("--strategy", choices=("cfg", "line"), default="cfg")
    units.add_argument("--entry-point")
    units.add_argument("--ascii-quotes", action="store_true", help='quote code with "..." instead of `...\'')
    units.set_defaults(func=cmd_units)

    bench = sub.add_parser("bench", parents=[common], help="run a strategy over a dataset")
    bench.add_argument("dataset")
    bench.set_defaults(func=cmd_bench)

    analyze = sub.add_parser("analyze", help="repair-benefit and posterior calculators")
    asub = analyze.add_subparsers(dest="quantity", required=True)
    judge = argparse.ArgumentParser(add_help=False)
    judge.add_argument("--alpha", type=float, required=True)
    judge.add_argument("--beta", type=float, required=True)
    judge.add_argument("--p", type=float, required=True)
    for name in ("pprime", "threshold", "beneficial"):
        q = asub.add_parser(name, parents=[judge])
        q.add_argument("--gamma", type=float, default=0.0 if name == "threshold" else None, required=name != "threshold")
    sim = asub.add_parser("simulate", parents=[judge])
    sim.add_argument("--gamma", type=float, required=True)
    sim.add_argument("--trials", type=int, default=1_000_000)
    sim.add_argument("--seed", type=int, default=0)
    post = asub.add_parser("posterior")
    post.add_argument("--prior", type=float, required=True)
    post.add_argument("--ratio", type=float, required=True)
    analyze.set_defaults(func=cmd_analyze)
    return parser


def _diagnostic(exc: BaseException) -> str:
    cause = exc.__cause__ if isinstance(exc, AlignmentAborted) and exc.__cause__ else exc
    kind = "Timeout" if isinstance(cause, Timeout) else type(cause).__name__
    return f"error: {kind}: {cause}"


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (UsageError, ConfigError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except KeyboardInterrupt:
        print("interrupted; completed records were flushed", file=sys.stderr)
        return 130
    except (LLMError, AlignmentAborted) as exc:
        print(_diagnostic(exc), file=sys.stderr)
        return EXIT_RUNTIME
    except (RaluError, OSError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
