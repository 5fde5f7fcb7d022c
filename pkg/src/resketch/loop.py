"""Session orchestration: seed, iterate-until-pass, sampling, hidden scoring.

A session debugs one problem: judge the seed on visible tests, then loop
(feedback -> strategy step -> judge) until the candidate passes every visible
test or the iteration budget runs out.  Hidden tests are consulted exactly
once, at the very end, and never reach any prompt.
"""
from __future__ import annotations

import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Sequence, TextIO

from .corpus import Problem, ProblemSet
from .judge import (Judge, Outcome, RunLimits, Verdict, pass_fraction,
                    render_feedback)
from .llm import LLMClient, LLMError, LLMParams, extract_code
from .prompts import TemplateId, render_prompt
from .strategy import (FeedbackMode, NLRepr, SessionState, StrategyConfig,
                       StrategyError, StrategyKind, analyze, backtranslate,
                       bug_analysis_slot, refine, regenerate, render_chain,
                       step)


class FinalStatus(str, Enum):
    SOLVED_VISIBLE = "SolvedVisible"
    EXHAUSTED = "Exhausted"
    ERRORED = "Errored"

    def __str__(self) -> str:
        return self.value


class SamplingMode(str, Enum):
    NONE = "None"
    NL2NL = "NL2NL"
    NL2C = "NL2C"

    def __str__(self) -> str:
        return self.value


@dataclass(frozen=True)
class SamplingConfig:
    mode: SamplingMode = SamplingMode.NONE
    k: int = 1

    def __post_init__(self) -> None:
        object.__setattr__(self, "mode", SamplingMode(self.mode))
        if self.mode is not SamplingMode.NONE and self.k < 2:
            raise ValueError(f"sampling k must be >= 2, got {self.k}")


@dataclass(frozen=True)
class LoopConfig:
    strategy: StrategyConfig
    max_iterations: int = 5
    sampling: SamplingConfig = field(default_factory=SamplingConfig)
    limits: RunLimits = field(default_factory=RunLimits)
    final_selection: str = "best"

    def __post_init__(self) -> None:
        if self.max_iterations < 1:
            raise ValueError(
                f"max_iterations must be >= 1, got {self.max_iterations}")
        if self.final_selection not in ("best", "last"):
            raise ValueError(
                f"final_selection must be 'best' or 'last', got "
                f"{self.final_selection!r}")
        if (self.sampling.mode is not SamplingMode.NONE
                and self.strategy.kind is not StrategyKind.NL_DEBUG):
            raise ValueError(
                f"sampling requires the NLDebug strategy, got "
                f"{self.strategy.kind}")


@dataclass(frozen=True)
class SeedRecord:
    code: str
    generated: bool
    visible_verdicts: tuple[Verdict, ...]
    visible_pass_fraction: float


@dataclass(frozen=True)
class IterationRecord:
    iteration: int
    nl_text: str | None
    analysis: str | None
    code: str
    visible_verdicts: tuple[Verdict, ...]
    visible_pass_fraction: float


@dataclass(frozen=True)
class SessionTrace:
    problem_id: str
    difficulty: str
    seed: SeedRecord | None
    iterations: tuple[IterationRecord, ...]
    final_code: str
    final_status: FinalStatus
    hidden_verdicts: tuple[Verdict, ...]
    hidden_pass_fraction: float
    error: str | None = None


# --- trace (de)serialization ---------------------------------------------
# Verdict.elapsed is wall-clock noise, so it is deliberately dropped here:
# replaying the same cassette must produce byte-identical trace files.

def _verdict_record(verdict: Verdict) -> dict:
    return {
        "test_index": verdict.test_index,
        "outcome": verdict.outcome.value,
        "actual_output": verdict.actual_output,
        "error_text": verdict.error_text,
    }


def _verdict_from_record(record: dict) -> Verdict:
    return Verdict(
        test_index=record["test_index"],
        outcome=Outcome(record["outcome"]),
        actual_output=record["actual_output"],
        error_text=record["error_text"],
        elapsed=0.0,
    )


def trace_record(trace: SessionTrace) -> dict:
    seed = None
    if trace.seed is not None:
        seed = {
            "code": trace.seed.code,
            "generated": trace.seed.generated,
            "visible_verdicts": [_verdict_record(v)
                                 for v in trace.seed.visible_verdicts],
            "visible_pass_fraction": trace.seed.visible_pass_fraction,
        }
    return {
        "problem_id": trace.problem_id,
        "difficulty": trace.difficulty,
        "seed": seed,
        "iterations": [
            {
                "iteration": it.iteration,
                "nl_text": it.nl_text,
                "analysis": it.analysis,
                "code": it.code,
                "visible_verdicts": [_verdict_record(v)
                                     for v in it.visible_verdicts],
                "visible_pass_fraction": it.visible_pass_fraction,
            }
            for it in trace.iterations
        ],
        "final_code": trace.final_code,
        "final_status": trace.final_status.value,
        "hidden_verdicts": [_verdict_record(v)
                            for v in trace.hidden_verdicts],
        "hidden_pass_fraction": trace.hidden_pass_fraction,
        "error": trace.error,
    }


def serialize_trace(trace: SessionTrace) -> str:
    return json.dumps(trace_record(trace), ensure_ascii=False,
                      separators=(",", ":"))


def trace_from_record(record: dict) -> SessionTrace:
    seed = None
    if record.get("seed") is not None:
        raw = record["seed"]
        seed = SeedRecord(
            code=raw["code"],
            generated=raw["generated"],
            visible_verdicts=tuple(_verdict_from_record(v)
                                   for v in raw["visible_verdicts"]),
            visible_pass_fraction=raw["visible_pass_fraction"],
        )
    iterations = tuple(
        IterationRecord(
            iteration=it["iteration"],
            nl_text=it["nl_text"],
            analysis=it["analysis"],
            code=it["code"],
            visible_verdicts=tuple(_verdict_from_record(v)
                                   for v in it["visible_verdicts"]),
            visible_pass_fraction=it["visible_pass_fraction"],
        )
        for it in record["iterations"]
    )
    return SessionTrace(
        problem_id=record["problem_id"],
        difficulty=record["difficulty"],
        seed=seed,
        iterations=iterations,
        final_code=record["final_code"],
        final_status=FinalStatus(record["final_status"]),
        hidden_verdicts=tuple(_verdict_from_record(v)
                              for v in record["hidden_verdicts"]),
        hidden_pass_fraction=record["hidden_pass_fraction"],
        error=record.get("error"),
    )


def parse_trace_line(line: str) -> SessionTrace:
    return trace_from_record(json.loads(line))


def load_traces(path: str | Path) -> list[SessionTrace]:
    traces = []
    with Path(path).open(encoding="utf-8") as handle:
        for line in handle:
            line = line.strip()
            if line:
                traces.append(parse_trace_line(line))
    return traces


# --- session orchestration ------------------------------------------------

def generate_seed(problem: Problem, client: LLMClient,
                  params: LLMParams) -> str:
    """One seed-generation call; the result is used as-is even if failing."""
    if problem.seed_program is not None:
        raise StrategyError(
            f"problem {problem.id} already carries a seed program")
    prompt = render_prompt(TemplateId.SEED_GENERATE,
                           {"description": problem.description})
    response = client.complete(TemplateId.SEED_GENERATE, prompt, params)[0]
    return extract_code(response)


def _nl_text_for_record(state: SessionState) -> str | None:
    if state.current_nl is not None:
        return state.current_nl.text
    if state.cot_chain:
        return render_chain(state.cot_chain)
    return None


def sampled_step(state: SessionState, cfg: LoopConfig, client: LLMClient,
                 params: LLMParams, judge: Judge
                 ) -> tuple[str, list[Verdict]]:
    """One NLDebug step with k-way sampling; judges candidates itself.

    NL2NL(k): k independent refinements, each regenerated once.  NL2C(k): one
    refinement, k regenerations.  The candidate with the highest visible pass
    fraction wins; ties go to the lowest index.  Returns the chosen code and
    its verdicts so the caller never re-judges.
    """
    scfg = cfg.strategy
    assert scfg.nl_format is not None
    problem = state.problem
    if state.current_nl is None or scfg.rebacktranslate:
        nl = backtranslate(problem, state.current_code, scfg.nl_format,
                           client, params)
    else:
        nl = state.current_nl
    analysis = None
    if scfg.feedback_mode is FeedbackMode.RAW_PLUS_ANALYSIS:
        analysis = analyze(problem, state.current_code, nl, state.feedback,
                           client, params)
    slot = bug_analysis_slot(scfg.feedback_mode, state.feedback, analysis)

    k = cfg.sampling.k
    candidates: list[tuple[NLRepr, str] | None] = []
    errors: list[Exception] = []
    if cfg.sampling.mode is SamplingMode.NL2NL:
        for _ in range(k):
            try:
                cand_nl = refine(problem, nl, state.current_code, slot,
                                 client, params)
                candidates.append(
                    (cand_nl, regenerate(problem, cand_nl, client, params)))
            except (LLMError, StrategyError) as exc:
                errors.append(exc)
                candidates.append(None)
    else:
        refined = refine(problem, nl, state.current_code, slot, client,
                         params)
        for _ in range(k):
            try:
                candidates.append(
                    (refined, regenerate(problem, refined, client, params)))
            except (LLMError, StrategyError) as exc:
                errors.append(exc)
                candidates.append(None)
    if all(c is None for c in candidates):
        raise StrategyError(
            f"all {k} sampled candidates failed; last error: {errors[-1]}")

    best_index = -1
    best_fraction = -1.0
    judged: list[list[Verdict] | None] = []
    for index, candidate in enumerate(candidates):
        if candidate is None:
            judged.append(None)
            continue
        verdicts = judge.run_tests(candidate[1], problem.visible_tests)
        judged.append(verdicts)
        fraction = pass_fraction(verdicts)
        if fraction > best_fraction:
            best_fraction = fraction
            best_index = index

    chosen_nl, chosen_code = candidates[best_index]  # type: ignore[misc]
    chosen_verdicts = judged[best_index]
    assert chosen_verdicts is not None
    state.current_nl = chosen_nl
    state.analysis = analysis
    state.current_code = chosen_code
    return chosen_code, chosen_verdicts


def run_session(problem: Problem, cfg: LoopConfig, client: LLMClient,
                params: LLMParams, judge: Judge) -> SessionTrace:
    try:
        if problem.seed_program is not None:
            seed_code, generated = problem.seed_program, False
        else:
            seed_code, generated = generate_seed(problem, client,
                                                 params), True
    except (LLMError, StrategyError) as exc:
        return SessionTrace(
            problem_id=problem.id, difficulty=problem.difficulty, seed=None,
            iterations=(), final_code="",
            final_status=FinalStatus.ERRORED, hidden_verdicts=(),
            hidden_pass_fraction=0.0, error=f"seed generation failed: {exc}")

    visible = problem.visible_tests
    seed_verdicts = judge.run_tests(seed_code, visible)
    seed_fraction = pass_fraction(seed_verdicts)
    seed_record = SeedRecord(code=seed_code, generated=generated,
                             visible_verdicts=tuple(seed_verdicts),
                             visible_pass_fraction=seed_fraction)

    state = SessionState(problem=problem, current_code=seed_code)
    iterations: list[IterationRecord] = []
    error_text: str | None = None
    last_verdicts = seed_verdicts
    solved = seed_fraction == 1.0
    while not solved and len(iterations) < cfg.max_iterations:
        state.feedback = render_feedback(last_verdicts, visible)
        state.iteration = len(iterations)
        try:
            if cfg.sampling.mode is not SamplingMode.NONE:
                new_code, verdicts = sampled_step(state, cfg, client, params,
                                                  judge)
            else:
                new_code, state = step(state, cfg.strategy, client, params)
                verdicts = judge.run_tests(new_code, visible)
        except (LLMError, StrategyError) as exc:
            error_text = str(exc)
            break
        fraction = pass_fraction(verdicts)
        iterations.append(IterationRecord(
            iteration=len(iterations) + 1,
            nl_text=_nl_text_for_record(state),
            analysis=state.analysis,
            code=new_code,
            visible_verdicts=tuple(verdicts),
            visible_pass_fraction=fraction,
        ))
        last_verdicts = verdicts
        solved = fraction == 1.0

    final_code = _select_final_code(cfg, seed_record, iterations)
    if error_text is not None:
        final_status = FinalStatus.ERRORED
    elif solved:
        final_status = FinalStatus.SOLVED_VISIBLE
    else:
        final_status = FinalStatus.EXHAUSTED

    hidden_verdicts = judge.run_tests(final_code, problem.hidden_tests)
    hidden_fraction = pass_fraction(hidden_verdicts)
    return SessionTrace(
        problem_id=problem.id, difficulty=problem.difficulty,
        seed=seed_record, iterations=tuple(iterations),
        final_code=final_code, final_status=final_status,
        hidden_verdicts=tuple(hidden_verdicts),
        hidden_pass_fraction=hidden_fraction, error=error_text)


def _select_final_code(cfg: LoopConfig, seed: SeedRecord,
                       iterations: Sequence[IterationRecord]) -> str:
    if cfg.final_selection == "last":
        return iterations[-1].code if iterations else seed.code
    best_code = seed.code
    best_fraction = seed.visible_pass_fraction
    for record in iterations:  # ties go to the latest candidate
        if record.visible_pass_fraction >= best_fraction:
            best_fraction = record.visible_pass_fraction
            best_code = record.code
    return best_code


def run_experiment(problems: ProblemSet | Sequence[Problem], cfg: LoopConfig,
                   client: LLMClient, params: LLMParams, judge: Judge,
                   workers: int = 1,
                   trace_sink: TextIO | None = None) -> list[SessionTrace]:
    """One trace per problem, in problem order; sessions are independent.

    When *trace_sink* is given, each trace line is written as soon as it and
    all earlier traces are available, so the file is safe to tail and stays
    in problem order even under parallelism.
    """
    if workers < 1:
        raise ValueError("workers must be >= 1")
    problem_list = list(problems)
    results: list[SessionTrace] = []

    def emit(trace: SessionTrace) -> None:
        results.append(trace)
        if trace_sink is not None:
            trace_sink.write(serialize_trace(trace) + "\n")
            trace_sink.flush()

    if workers == 1 or len(problem_list) <= 1:
        for problem in problem_list:
            emit(run_session(problem, cfg, client, params, judge))
        return results

    with ThreadPoolExecutor(max_workers=workers) as pool:
        futures = [pool.submit(run_session, problem, cfg, client, params,
                               judge)
                   for problem in problem_list]
        for future in futures:
            emit(future.result())
    return results
