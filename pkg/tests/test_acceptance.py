"""End-to-end checks for the properties the package promises.

Each test here covers one guarantee: mock experiment shape, replay
determinism, prompt fidelity, judge classification, metric-oracle agreement,
frozen score values, per-step call budgets, hidden-test hygiene, and the
patch-vs-rewrite structural direction.  One pass/fail line per guarantee is
printed in the terminal summary.
"""
from __future__ import annotations

import json
import random
import time
from pathlib import Path

import pytest
import yaml

from oracles.ted_oracle import oracle_distance
from promptdata import GOLDEN_SLOTS
from test_metrics import FROZEN_BLEU_PAIRS, random_tree

from resketch import corpus
from resketch.cli import load_config, main
from resketch.judge import FeedbackText, Judge, Outcome, RunLimits
from resketch.llm import (
    LLMParams,
    MockScriptClient,
    RecordingClient,
    count_calls,
)
from resketch.loop import (
    FinalStatus,
    LoopConfig,
    SamplingConfig,
    SamplingMode,
    run_experiment,
    sampled_step,
)
from resketch.metrics import (
    ProblemScore,
    ast_edit_distance,
    code_bleu,
    pass_at_1,
    pass_rate,
    tree_distance,
)
from resketch.prompts import all_template_ids, render_prompt
from resketch.strategy import (
    FeedbackMode,
    NLFormat,
    NLRepr,
    SessionState,
    StrategyConfig,
    StrategyKind,
    step,
)

FIXTURES = Path(__file__).parent / "fixtures"
GOLDEN_PROMPTS = Path(__file__).parent / "golden" / "prompts"
PARAMS = LLMParams(model="mock-model")
LIMITS = RunLimits(wall_clock_limit=4.0)


def fenced(code: str) -> str:
    return f"```python\n{code}```"


# Scripted replies for the three-problem corpus, in strict session order:
# acc-sum is fixed at iteration 1, acc-max at iteration 3, acc-product never.
MOCK_SCRIPT = [
    # acc-sum: seed, backtranslation, one refine/regenerate round
    fenced("a, b = map(int, input().split())\nprint(a - b)\n"),
    "The program reads two integers and prints their difference.",
    "The program reads two integers and prints their sum.",
    fenced("a, b = map(int, input().split())\nprint(a + b)\n"),
    # acc-max: seed, backtranslation, three rounds
    fenced("x, y = map(int, input().split())\nprint(x if x < y else y)\n"),
    "The program reads two integers and prints the smaller one.",
    "The program should print the first number.",
    fenced("x, y = map(int, input().split())\nprint(x)\n"),
    "The program should print the second number.",
    fenced("x, y = map(int, input().split())\nprint(y)\n"),
    "The program reads two integers and prints the larger one.",
    fenced("x, y = map(int, input().split())\nprint(x if x > y else y)\n"),
    # acc-product: seed, backtranslation, five rounds that never converge
    fenced("a, b = map(int, input().split())\nprint(a + b)\n"),
    "The program reads two integers and prints their total.",
    "Try subtracting the numbers instead.",
    fenced("a, b = map(int, input().split())\nprint(a - b)\n"),
    "Try printing the first number.",
    fenced("a, b = map(int, input().split())\nprint(a)\n"),
    "Try printing the second number.",
    fenced("a, b = map(int, input().split())\nprint(b)\n"),
    "Try printing zero.",
    fenced("a, b = map(int, input().split())\nprint(0)\n"),
    "Try printing one.",
    fenced("a, b = map(int, input().split())\nprint(1)\n"),
]

MOCK_LOOP = LoopConfig(
    strategy=StrategyConfig(kind=StrategyKind.NL_DEBUG,
                            nl_format=NLFormat.SKETCH,
                            feedback_mode=FeedbackMode.RAW),
    max_iterations=5, limits=LIMITS)


@pytest.fixture(scope="module")
def mock_run():
    problems = corpus.load_problems(FIXTURES / "acceptance_corpus.jsonl")
    client = MockScriptClient(list(MOCK_SCRIPT))
    judge = Judge(limits=LIMITS)
    start = time.monotonic()
    traces = run_experiment(list(problems), MOCK_LOOP, client, PARAMS, judge)
    elapsed = time.monotonic() - start
    return problems, traces, client, elapsed


def test_mock_experiment_statuses_iterations_and_scores(mock_run):
    problems, traces, client, elapsed = mock_run
    assert [t.final_status for t in traces] == [
        FinalStatus.SOLVED_VISIBLE, FinalStatus.SOLVED_VISIBLE,
        FinalStatus.EXHAUSTED]
    assert [len(t.iterations) for t in traces] == [1, 3, 5]
    scores = [ProblemScore(t.problem_id, t.hidden_pass_fraction)
              for t in traces]
    assert pass_at_1(scores) == 2 / 3
    assert pass_rate(scores) == (1.0 + 1.0 + 0.0) / 3
    assert client.remaining() == 0
    assert elapsed < 30.0


def test_replay_runs_are_byte_identical(tmp_path):
    dataset = FIXTURES / "acceptance_corpus.jsonl"
    cassette = tmp_path / "cassette.jsonl"
    cassette.write_text("", encoding="utf-8")

    def write_config(name: str, out_name: str) -> Path:
        path = tmp_path / name
        path.write_text(yaml.safe_dump({
            "dataset": str(dataset),
            "output_dir": str(tmp_path / out_name),
            "llm": {"mode": "replay", "cassette": str(cassette)},
            "strategy": {"kind": "NLDebug", "nl_format": "Sketch",
                         "feedback_mode": "Raw"},
            "loop": {"max_iterations": 5,
                     "limits": {"wall_clock_limit": 4.0}},
        }), encoding="utf-8")
        return path

    config_a = write_config("replay_a.yaml", "out_a")
    config_b = write_config("replay_b.yaml", "out_b")
    cfg = load_config(config_a)
    recorder = RecordingClient(MockScriptClient(list(MOCK_SCRIPT)), cassette)
    run_experiment(list(corpus.load_problems(dataset)), cfg.loop, recorder,
                   cfg.params, Judge(limits=cfg.loop.limits))

    assert main(["run", str(config_a)]) == 0
    assert main(["run", str(config_b)]) == 0
    for artifact in ("traces.jsonl", "report.json", "report.txt"):
        assert (tmp_path / "out_a" / artifact).read_bytes() == \
            (tmp_path / "out_b" / artifact).read_bytes(), artifact


def test_prompt_renders_match_golden_files():
    for template_id in sorted(all_template_ids()):
        rendered = render_prompt(template_id, GOLDEN_SLOTS[template_id])
        golden = (GOLDEN_PROMPTS / f"{template_id.value}.txt").read_text(
            encoding="utf-8")
        assert rendered.split() == golden.split(), template_id


def test_judge_outcome_classification():
    limits = RunLimits(wall_clock_limit=1.5, max_output=1000)
    judge = Judge(limits=limits)
    test = corpus.TestCase("1 2\n", "3\n")
    programs = [
        ("a, b = map(int, input().split())\nprint(a + b)\n", Outcome.PASS),
        ("a, b = map(int, input().split())\nprint(a - b)\n",
         Outcome.WRONG_ANSWER),
        ("raise ValueError('boom')\n", Outcome.RUNTIME_ERROR),
        ("while True:\n    pass\n", Outcome.TIMEOUT),
        ("print('x' * 5000)\n", Outcome.OUTPUT_OVERFLOW),
    ]
    for program, expected in programs:
        start = time.monotonic()
        verdicts = judge.run_tests(program, [test])
        elapsed = time.monotonic() - start
        assert verdicts[0].outcome is expected, program
        if expected is Outcome.TIMEOUT:
            assert elapsed < limits.wall_clock_limit + 1.0


def test_tree_distance_matches_oracle_within_budget():
    start = time.monotonic()
    rng = random.Random(424242)
    pairs = [(random_tree(rng), random_tree(rng)) for _ in range(200)]
    for a, b in pairs:
        assert tree_distance(a, b) == oracle_distance(a, b)
    for a, b in pairs[:40]:
        assert tree_distance(a, a) == 0
        assert tree_distance(a, b) == tree_distance(b, a)
    for (a, b), (_, c) in zip(pairs[:40], pairs[40:80]):
        assert tree_distance(a, c) <= tree_distance(a, b) + \
            tree_distance(b, c)
    assert time.monotonic() - start < 60.0


def test_bleu_matches_frozen_goldens():
    for ref, cand, expected in FROZEN_BLEU_PAIRS:
        assert abs(code_bleu(ref, cand) - expected) < 1e-9
        assert code_bleu(ref, ref) == pytest.approx(1.0)
        assert code_bleu(cand, cand) == pytest.approx(1.0)


def test_score_definitions_exact():
    scores = [ProblemScore("a", 0.75), ProblemScore("b", 0.5)]
    assert pass_rate(scores) == 0.625
    assert pass_at_1(scores) == 0.0


def test_strategy_call_counts():
    problem = corpus.Problem(
        id="cc", description="Read two integers and print their sum.",
        difficulty="introductory",
        visible_tests=(corpus.TestCase("1 2\n", "3\n"),
                       corpus.TestCase("5 7\n", "12\n")),
        hidden_tests=(corpus.TestCase("4 4\n", "8\n"),))
    feedback = FeedbackText(rendered="Test 1 failed (Wrong Answer)",
                            included_failures=1)

    def state(**kwargs):
        kwargs.setdefault("current_code", "print(0)")
        kwargs.setdefault("feedback", feedback)
        return SessionState(problem=problem, **kwargs)

    reply = fenced("print(1)\n")

    client = MockScriptClient(["sketch", "refined", reply])
    step(state(), StrategyConfig(kind=StrategyKind.NL_DEBUG,
                                 nl_format=NLFormat.SKETCH,
                                 feedback_mode=FeedbackMode.RAW),
         client, PARAMS)
    assert count_calls(client.call_log) == 3

    client = MockScriptClient(["sketch", "analysis", "refined", reply])
    step(state(), StrategyConfig(kind=StrategyKind.NL_DEBUG,
                                 nl_format=NLFormat.SKETCH,
                                 feedback_mode=FeedbackMode.RAW_PLUS_ANALYSIS),
         client, PARAMS)
    assert count_calls(client.call_log) == 4

    client = MockScriptClient([reply])
    step(state(), StrategyConfig(kind=StrategyKind.SELF_EDIT), client,
         PARAMS)
    assert count_calls(client.call_log) == 1

    client = MockScriptClient(["explanation", reply])
    step(state(), StrategyConfig(kind=StrategyKind.SELF_DEBUG_EXPLAIN),
         client, PARAMS)
    assert count_calls(client.call_log) == 2

    client = MockScriptClient({
        "RefineSketch": ["refined"],
        "Regenerate": [reply, reply, reply],
    })
    cfg = LoopConfig(
        strategy=StrategyConfig(kind=StrategyKind.NL_DEBUG,
                                nl_format=NLFormat.SKETCH,
                                feedback_mode=FeedbackMode.RAW),
        sampling=SamplingConfig(mode=SamplingMode.NL2C, k=3), limits=LIMITS)
    sampled_step(
        state(current_nl=NLRepr.from_text(NLFormat.SKETCH, "a sketch")),
        cfg, client, PARAMS, Judge(limits=LIMITS))
    assert count_calls(client.call_log, "RefineSketch") == 1
    assert count_calls(client.call_log, "Regenerate") == 3


def test_prompts_never_leak_hidden_tests(mock_run):
    problems, _traces, client, _elapsed = mock_run
    prompts = [record.prompt for record in client.call_log]
    assert prompts
    for problem in problems:
        for case in problem.hidden_tests:
            for prompt in prompts:
                assert case.input.strip() not in prompt
                assert case.expected_output.strip() not in prompt


def test_rewrites_change_structure_more_than_patches():
    records = [json.loads(line) for line in
               (FIXTURES / "diversity_pairs.jsonl").read_text(
                   encoding="utf-8").splitlines()]
    assert len(records) >= 5
    patch_ted = [ast_edit_distance(r["base"], r["patch"]) for r in records]
    rewrite_ted = [ast_edit_distance(r["base"], r["rewrite"])
                   for r in records]
    patch_bleu = [code_bleu(r["base"], r["patch"]) for r in records]
    rewrite_bleu = [code_bleu(r["base"], r["rewrite"]) for r in records]

    def mean(values):
        return sum(values) / len(values)

    assert mean(rewrite_ted) > mean(patch_ted)
    assert mean(rewrite_bleu) < mean(patch_bleu)
