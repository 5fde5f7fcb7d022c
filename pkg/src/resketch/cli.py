"""Command-line interface: run experiments, render reports, convert data.

Configuration lives in one structured file (YAML or JSON); no flag overrides
science-relevant parameters, so the resolved-config snapshot written next to
the traces fully determines a run.  Exit codes separate harness failures
(nonzero) from experiment outcomes: sessions that end Errored still exit 0.
"""
from __future__ import annotations

import argparse
import json
import os
import sys
import tempfile
from dataclasses import dataclass, replace
from pathlib import Path

import yaml

from . import corpus
from .judge import Judge, ShimUnavailableError, RunLimits
from .llm import (LiveClient, LLMClient, LLMError, LLMParams,
                  MockScriptClient, RecordingClient, ReplayClient)
from .loop import (LoopConfig, SamplingConfig, load_traces, parse_trace_line,
                   run_experiment)
from .metrics import aggregate, growth_split, render_report, report_records
from .strategy import StrategyConfig

_MODES = ("mock", "replay", "record", "live")


class ConfigError(ValueError):
    def __init__(self, errors: list[str]) -> None:
        super().__init__("; ".join(errors))
        self.errors = errors


@dataclass
class ExperimentConfig:
    dataset: Path
    output_dir: Path | None
    workers: int
    seed: int
    llm_mode: str
    params: LLMParams
    cassette: Path | None
    script: dict | list | None
    base_url: str
    api_key_env: str
    requests_per_minute: float | None
    loop: LoopConfig
    judge_workers: int
    shim_cmd: list[str] | None
    buckets: list[str] | None
    resolved: dict


def _section(data: dict, key: str, errors: list[str]) -> dict:
    value = data.get(key, {})
    if value is None:
        return {}
    if not isinstance(value, dict):
        errors.append(f"{key}: expected a mapping, got {type(value).__name__}")
        return {}
    return value


def load_config(path: str | Path) -> ExperimentConfig:
    path = Path(path)
    if not path.exists():
        raise ConfigError([f"config file not found: {path}"])
    try:
        data = yaml.safe_load(path.read_text(encoding="utf-8"))
    except yaml.YAMLError as exc:
        raise ConfigError([f"config parse failure: {exc}"])
    if not isinstance(data, dict):
        raise ConfigError(["config root must be a mapping"])

    errors: list[str] = []
    dataset = data.get("dataset")
    if not dataset:
        errors.append("dataset: required")
    output_dir = data.get("output_dir")
    workers = data.get("workers", 1)
    if not isinstance(workers, int) or workers < 1:
        errors.append(f"workers: must be a positive integer, got {workers!r}")
        workers = 1
    seed = data.get("seed", 0)

    llm = _section(data, "llm", errors)
    mode = llm.get("mode", "mock")
    if mode not in _MODES:
        errors.append(f"llm.mode: unknown mode {mode!r} (choose from "
                      f"{', '.join(_MODES)})")
    params = LLMParams(model="invalid")
    try:
        params = LLMParams(
            model=str(llm.get("model", "mock-model")),
            temperature=float(llm.get("temperature", 0.0)),
            max_tokens=int(llm.get("max_tokens", 4096)),
            sample_count=int(llm.get("sample_count", 1)),
        )
    except (TypeError, ValueError) as exc:
        errors.append(f"llm: {exc}")
    cassette = llm.get("cassette")
    cassette_path = Path(cassette) if cassette else None
    script = llm.get("script")
    base_url = str(llm.get("base_url", ""))
    api_key_env = str(llm.get("api_key_env", ""))
    rpm = llm.get("requests_per_minute")
    if rpm is not None:
        rpm = float(rpm)

    if mode in ("replay", "record") and cassette_path is None:
        errors.append(f"llm.cassette: required for mode {mode}")
    if mode == "replay" and cassette_path is not None \
            and not cassette_path.exists():
        errors.append(f"llm.cassette: cassette file not found: "
                      f"{cassette_path}")
    if mode == "mock" and script is None:
        errors.append("llm.script: required for mode mock")
    if mode in ("record", "live") and not base_url:
        errors.append(f"llm.base_url: required for mode {mode}")
    if mode in ("record", "live"):
        if not api_key_env:
            errors.append(f"llm.api_key_env: required for mode {mode}")
        elif api_key_env not in os.environ:
            errors.append(f"llm.api_key_env: environment variable "
                          f"{api_key_env!r} is not set")

    strategy_data = _section(data, "strategy", errors)
    strategy = None
    try:
        strategy = StrategyConfig(
            kind=strategy_data.get("kind", "NLDebug"),
            nl_format=strategy_data.get("nl_format"),
            feedback_mode=strategy_data.get("feedback_mode", "Raw"),
            rebacktranslate=bool(strategy_data.get("rebacktranslate", False)),
        )
    except ValueError as exc:
        errors.append(f"strategy: {exc}")

    loop_data = _section(data, "loop", errors)
    limits_data = _section(loop_data, "limits", errors)
    sampling_data = _section(loop_data, "sampling", errors)
    loop_cfg = None
    if strategy is not None:
        try:
            limits = RunLimits(
                wall_clock_limit=float(
                    limits_data.get("wall_clock_limit", 10.0)),
                memory_limit=int(limits_data.get("memory_limit", 512 * 2**20)),
                max_output=int(limits_data.get("max_output", 2**20)),
            )
            sampling = SamplingConfig(
                mode=sampling_data.get("mode", "None"),
                k=int(sampling_data.get("k", 1)),
            )
            loop_cfg = LoopConfig(
                strategy=strategy,
                max_iterations=int(loop_data.get("max_iterations", 5)),
                sampling=sampling,
                limits=limits,
                final_selection=str(loop_data.get("final_selection", "best")),
            )
        except ValueError as exc:
            errors.append(f"loop: {exc}")

    judge_data = _section(data, "judge", errors)
    judge_workers = judge_data.get("workers", 1)
    if not isinstance(judge_workers, int) or judge_workers < 1:
        errors.append(f"judge.workers: must be a positive integer, got "
                      f"{judge_workers!r}")
        judge_workers = 1
    shim_cmd = judge_data.get("shim_cmd")
    if shim_cmd is not None and (not isinstance(shim_cmd, list)
                                 or not all(isinstance(s, str)
                                            for s in shim_cmd)):
        errors.append("judge.shim_cmd: must be a list of strings")
        shim_cmd = None

    buckets = data.get("buckets")
    if buckets is not None and (not isinstance(buckets, list)
                                or not all(isinstance(b, str)
                                           for b in buckets)):
        errors.append("buckets: must be a list of strings")
        buckets = None

    if errors:
        raise ConfigError(errors)
    assert loop_cfg is not None

    resolved = {
        "dataset": str(dataset),
        "output_dir": str(output_dir) if output_dir else None,
        "workers": workers,
        "seed": seed,
        "llm": {
            "mode": mode,
            "model": params.model,
            "temperature": params.temperature,
            "max_tokens": params.max_tokens,
            "sample_count": params.sample_count,
            "cassette": str(cassette_path) if cassette_path else None,
            "base_url": base_url or None,
            "api_key_env": api_key_env or None,
            "requests_per_minute": rpm,
        },
        "strategy": {
            "kind": str(loop_cfg.strategy.kind),
            "nl_format": (str(loop_cfg.strategy.nl_format)
                          if loop_cfg.strategy.nl_format else None),
            "feedback_mode": str(loop_cfg.strategy.feedback_mode),
            "rebacktranslate": loop_cfg.strategy.rebacktranslate,
        },
        "loop": {
            "max_iterations": loop_cfg.max_iterations,
            "final_selection": loop_cfg.final_selection,
            "sampling": {"mode": str(loop_cfg.sampling.mode),
                         "k": loop_cfg.sampling.k},
            "limits": {
                "wall_clock_limit": loop_cfg.limits.wall_clock_limit,
                "memory_limit": loop_cfg.limits.memory_limit,
                "max_output": loop_cfg.limits.max_output,
            },
        },
        "judge": {"workers": judge_workers, "shim_cmd": shim_cmd},
        "buckets": buckets,
    }
    return ExperimentConfig(
        dataset=Path(dataset), output_dir=Path(output_dir) if output_dir
        else None, workers=workers, seed=seed, llm_mode=mode, params=params,
        cassette=cassette_path, script=script, base_url=base_url,
        api_key_env=api_key_env, requests_per_minute=rpm, loop=loop_cfg,
        judge_workers=judge_workers, shim_cmd=shim_cmd, buckets=buckets,
        resolved=resolved)


def build_client(cfg: ExperimentConfig) -> LLMClient:
    if cfg.llm_mode == "mock":
        assert cfg.script is not None
        return MockScriptClient(cfg.script)
    if cfg.llm_mode == "replay":
        assert cfg.cassette is not None
        return ReplayClient(cfg.cassette)
    live = LiveClient(cfg.base_url, api_key_env=cfg.api_key_env,
                      requests_per_minute=cfg.requests_per_minute)
    if cfg.llm_mode == "record":
        assert cfg.cassette is not None
        return RecordingClient(live, cfg.cassette)
    return live


def _execute(cfg: ExperimentConfig, out_dir: Path) -> tuple[int, int]:
    """Run (or resume) the experiment into *out_dir*.

    Returns (sessions run now, sessions total in the trace file).
    """
    problems = corpus.load_problems(cfg.dataset)
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "config.json").write_text(
        json.dumps(cfg.resolved, ensure_ascii=False, separators=(",", ":"),
                   sort_keys=True) + "\n", encoding="utf-8")

    trace_path = out_dir / "traces.jsonl"
    done_ids: set[str] = set()
    if trace_path.exists():
        for trace in load_traces(trace_path):
            done_ids.add(trace.problem_id)
    to_run = [p for p in problems if p.id not in done_ids]

    judge = Judge(limits=cfg.loop.limits, shim_cmd=cfg.shim_cmd,
                  workers=cfg.judge_workers)
    client = build_client(cfg)
    with trace_path.open("a", encoding="utf-8") as sink:
        run_experiment(to_run, cfg.loop, client, cfg.params, judge,
                       workers=cfg.workers, trace_sink=sink)

    all_traces = load_traces(trace_path)
    bucket_rows = aggregate(all_traces, cfg.buckets)
    growth_rows = growth_split(all_traces)
    (out_dir / "report.txt").write_text(
        render_report(bucket_rows, growth_rows), encoding="utf-8")
    (out_dir / "report.json").write_text(
        report_records(bucket_rows, growth_rows) + "\n", encoding="utf-8")
    return len(to_run), len(all_traces)


def cmd_run(args: argparse.Namespace) -> int:
    try:
        cfg = load_config(args.config)
    except ConfigError as exc:
        for message in exc.errors:
            print(f"config error: {message}", file=sys.stderr)
        return 2
    if cfg.output_dir is None:
        print("config error: output_dir: required for run", file=sys.stderr)
        return 2
    try:
        ran, total = _execute(cfg, cfg.output_dir)
    except (corpus.CorpusError, ShimUnavailableError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    print(f"{ran} session(s) run, {total} total; "
          f"artifacts in {cfg.output_dir}")
    return 0


def cmd_report(args: argparse.Namespace) -> int:
    path = Path(args.traces)
    if not path.exists():
        print(f"error: trace file not found: {path}", file=sys.stderr)
        return 1
    traces = []
    skipped = 0
    with path.open(encoding="utf-8") as handle:
        for lineno, line in enumerate(handle, start=1):
            if not line.strip():
                continue
            try:
                traces.append(parse_trace_line(line))
            except (json.JSONDecodeError, KeyError, ValueError):
                skipped += 1
                print(f"warning: skipping corrupt trace line {lineno}",
                      file=sys.stderr)
    if skipped:
        print(f"warning: {skipped} corrupt line(s) skipped", file=sys.stderr)
    if not traces:
        print("warning: no traces found", file=sys.stderr)
    buckets = args.buckets.split(",") if args.buckets else None
    print(render_report(aggregate(traces, buckets), growth_split(traces)),
          end="")
    return 0


def cmd_convert(args: argparse.Namespace) -> int:
    mapping = corpus.MAPPINGS.get(args.mapping)
    if mapping is None:
        known = ", ".join(sorted(corpus.MAPPINGS))
        print(f"error: unknown mapping {args.mapping!r} (known: {known})",
              file=sys.stderr)
        return 2
    if args.visible_count is not None:
        mapping = replace(mapping, visible_count=args.visible_count)
    in_path, out_path = Path(args.input), Path(args.output)
    if not in_path.exists():
        print(f"error: input file not found: {in_path}", file=sys.stderr)
        return 1
    converted: list[str] = []
    failed = 0
    with in_path.open(encoding="utf-8") as handle:
        for lineno, line in enumerate(handle, start=1):
            if not line.strip():
                continue
            try:
                record = json.loads(line)
                problem = corpus.convert_external(
                    record, mapping, fallback_id=f"r{lineno}")
                converted.append(corpus.serialize_problem(problem))
            except (json.JSONDecodeError, corpus.CorpusError) as exc:
                failed += 1
                print(f"line {lineno}: {exc}", file=sys.stderr)
    out_path.write_text("".join(f"{line}\n" for line in converted),
                        encoding="utf-8")
    print(f"{len(converted)} problem(s) converted, {failed} failed")
    return 0


def cmd_replay_verify(args: argparse.Namespace) -> int:
    try:
        cfg = load_config(args.config)
    except ConfigError as exc:
        for message in exc.errors:
            print(f"config error: {message}", file=sys.stderr)
        return 2
    if cfg.llm_mode != "replay":
        print("error: replay-verify requires llm.mode=replay",
              file=sys.stderr)
        return 2
    artifacts: list[tuple[bytes, bytes]] = []
    try:
        for _ in range(2):
            with tempfile.TemporaryDirectory(prefix="replay-verify-") as tmp:
                out = Path(tmp)
                _execute(cfg, out)
                artifacts.append(((out / "traces.jsonl").read_bytes(),
                                  (out / "report.json").read_bytes()))
    except (corpus.CorpusError, ShimUnavailableError, LLMError,
            OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    if artifacts[0] == artifacts[1]:
        print("replay-verify: OK (byte-identical traces and reports)")
        return 0
    print("replay-verify: MISMATCH between runs", file=sys.stderr)
    return 1


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(
        prog="resketch",
        description="Debug buggy programs by refining natural-language "
                    "representations against execution feedback.")
    sub = parser.add_subparsers(dest="command", required=True)

    run_p = sub.add_parser("run", help="run an experiment from a config file")
    run_p.add_argument("config", help="YAML or JSON experiment config")
    run_p.set_defaults(func=cmd_run)

    report_p = sub.add_parser("report", help="render tables from a trace file")
    report_p.add_argument("traces", help="line-delimited trace file")
    report_p.add_argument("--buckets", default=None,
                          help="comma-separated difficulty labels")
    report_p.set_defaults(func=cmd_report)

    convert_p = sub.add_parser(
        "convert", help="convert an external benchmark to canonical problems")
    convert_p.add_argument("input", help="line-delimited external records")
    convert_p.add_argument("output", help="canonical problem file to write")
    convert_p.add_argument("--mapping", default="generic",
                           help="field mapping name (default: generic)")
    convert_p.add_argument("--visible-count", type=int, default=None,
                           help="override the visible/hidden test split")
    convert_p.set_defaults(func=cmd_convert)

    verify_p = sub.add_parser(
        "replay-verify",
        help="run a replay config twice and compare artifacts byte-for-byte")
    verify_p.add_argument("config", help="experiment config with llm.mode=replay")
    verify_p.set_defaults(func=cmd_replay_verify)

    args = parser.parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    raise SystemExit(main())
