"""Judge: run candidate programs against test cases and classify verdicts.

Each test case executes in a fresh pair of processes: the judge spawns one
shim per test, the shim spawns the candidate, so a crash or hang in one test
can never leak state into another.  The shim speaks a one-line JSON protocol
on its stdin/stdout: request {source, stdin_data, wall_clock_limit}, response
{status, stdout, stderr, exit_code, elapsed}.
"""

from __future__ import annotations

import json
import os
import shlex
import subprocess
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from enum import Enum
from typing import Sequence

from resketch.corpus import TestCase

SHIM_ENV_VAR = "RESKETCH_SHIM"

# How long past the candidate's wall-clock limit the judge will wait for the
# shim before declaring it wedged.  Covers interpreter startup and kill/drain.
_SHIM_OVERHEAD = 5.0

_STDERR_TAIL = 4000


class ShimUnavailableError(RuntimeError):
    """The execution shim could not be started or spoke no protocol record.

    Deliberately not a Verdict: this is an environment failure, not a
    property of the candidate program.
    """


class Outcome(str, Enum):
    PASS = "pass"
    WRONG_ANSWER = "wrong_answer"
    RUNTIME_ERROR = "runtime_error"
    TIMEOUT = "timeout"
    OUTPUT_OVERFLOW = "output_overflow"

    def label(self) -> str:
        return {
            Outcome.PASS: "Pass",
            Outcome.WRONG_ANSWER: "Wrong Answer",
            Outcome.RUNTIME_ERROR: "Runtime Error",
            Outcome.TIMEOUT: "Timeout",
            Outcome.OUTPUT_OVERFLOW: "Output Overflow",
        }[self]


@dataclass(frozen=True)
class RunLimits:
    wall_clock_limit: float = 10.0
    memory_limit: int = 512 * 2**20
    max_output: int = 2**20

    def __post_init__(self) -> None:
        if self.wall_clock_limit <= 0 or self.memory_limit <= 0 or self.max_output <= 0:
            raise ValueError("all limits must be strictly positive")


@dataclass(frozen=True)
class Verdict:
    test_index: int
    outcome: Outcome
    actual_output: str
    error_text: str
    elapsed: float

    @property
    def passed(self) -> bool:
        return self.outcome is Outcome.PASS


@dataclass(frozen=True)
class FeedbackText:
    rendered: str
    included_failures: int


def normalize_output(raw: str) -> str:
    """Unify line endings, strip per-line trailing whitespace, drop trailing
    blank lines.  Idempotent."""
    text = raw.replace("\r\n", "\n").replace("\r", "\n")
    lines = [line.rstrip() for line in text.split("\n")]
    while lines and lines[-1] == "":
        lines.pop()
    return "\n".join(lines)


def default_shim_cmd() -> list[str]:
    override = os.environ.get(SHIM_ENV_VAR)
    if override:
        return shlex.split(override)
    return [sys.executable, "-m", "codeshim"]


class Judge:
    """Runs programs through the shim; safe for concurrent use across problems."""

    def __init__(
        self,
        limits: RunLimits | None = None,
        shim_cmd: Sequence[str] | None = None,
        workers: int = 1,
    ) -> None:
        self.limits = limits or RunLimits()
        self.shim_cmd = list(shim_cmd) if shim_cmd else default_shim_cmd()
        if workers < 1:
            raise ValueError("workers must be >= 1")
        self.workers = workers

    def run_tests(self, program: str, tests: Sequence[TestCase]) -> list[Verdict]:
        """One Verdict per test, in test order regardless of completion order."""
        if not tests:
            raise ValueError("tests must be non-empty")
        if self.workers == 1 or len(tests) == 1:
            return [self._run_one(program, i, tc) for i, tc in enumerate(tests)]
        with ThreadPoolExecutor(max_workers=self.workers) as pool:
            futures = [pool.submit(self._run_one, program, i, tc) for i, tc in enumerate(tests)]
            return [f.result() for f in futures]

    def _run_one(self, program: str, index: int, test: TestCase) -> Verdict:
        response = self._call_shim(program, test.input)
        return self._classify(index, test, response)

    def _call_shim(self, source: str, stdin_data: str) -> dict:
        request = json.dumps(
            {
                "source": source,
                "stdin_data": stdin_data,
                "wall_clock_limit": self.limits.wall_clock_limit,
            }
        )
        cmd = self.shim_cmd + ["--memory-limit", str(self.limits.memory_limit)]
        try:
            proc = subprocess.Popen(
                cmd,
                stdin=subprocess.PIPE,
                stdout=subprocess.PIPE,
                stderr=subprocess.PIPE,
                text=True,
                encoding="utf-8",
                errors="replace",
            )
        except OSError as exc:
            raise ShimUnavailableError(f"cannot start shim {cmd!r}: {exc}") from exc
        try:
            stdout, stderr = proc.communicate(
                input=request + "\n",
                timeout=self.limits.wall_clock_limit + 1.0 + _SHIM_OVERHEAD,
            )
        except subprocess.TimeoutExpired:
            proc.kill()
            proc.communicate()
            # The shim itself wedged; report as a timeout at the limit.
            return {
                "status": "timeout",
                "stdout": "",
                "stderr": "shim did not respond within grace period",
                "exit_code": -1,
                "elapsed": self.limits.wall_clock_limit,
            }
        line = stdout.strip().splitlines()
        if not line:
            raise ShimUnavailableError(
                f"shim {self.shim_cmd!r} produced no protocol record: {stderr.strip()[:500]}"
            )
        try:
            response = json.loads(line[-1])
        except json.JSONDecodeError as exc:
            raise ShimUnavailableError(f"shim spoke malformed protocol: {exc}") from exc
        if "status" not in response:
            raise ShimUnavailableError(f"shim rejected request: {response.get('error', response)}")
        return response

    def _classify(self, index: int, test: TestCase, response: dict) -> Verdict:
        stdout = response.get("stdout", "")
        stderr = response.get("stderr", "")
        elapsed = float(response.get("elapsed", 0.0))
        status = response["status"]

        overflow = len(stdout) > self.limits.max_output
        if overflow:
            stdout = stdout[: self.limits.max_output]

        if status == "timeout":
            outcome = Outcome.TIMEOUT
            error = f"wall clock limit of {self.limits.wall_clock_limit:g}s exceeded"
        elif overflow:
            outcome = Outcome.OUTPUT_OVERFLOW
            error = f"output exceeded {self.limits.max_output} bytes"
        elif status != "ok":
            outcome = Outcome.RUNTIME_ERROR
            error = stderr[-_STDERR_TAIL:]
        elif normalize_output(stdout) == normalize_output(test.expected_output):
            outcome = Outcome.PASS
            error = ""
        else:
            outcome = Outcome.WRONG_ANSWER
            error = ""
        return Verdict(
            test_index=index,
            outcome=outcome,
            actual_output=stdout,
            error_text=error,
            elapsed=elapsed,
        )


def pass_fraction(verdicts: Sequence[Verdict]) -> float:
    if not verdicts:
        return 0.0
    return sum(1 for v in verdicts if v.passed) / len(verdicts)


def _clip(text: str, max_field: int) -> str:
    if len(text) <= max_field:
        return text
    return text[:max_field] + "\n[truncated]"


def render_feedback(
    verdicts: Sequence[Verdict],
    tests: Sequence[TestCase],
    max_failures: int = 3,
    max_field: int = 1000,
) -> FeedbackText:
    """Render the execution feedback block fed to the refinement prompts.

    Per failing test (first failures in test order, capped at max_failures)
    the block lists input, expected output, and actual output, each clipped
    to max_field characters.
    """
    if len(verdicts) != len(tests):
        raise ValueError("verdicts and tests must align by index")
    failures = [v for v in verdicts if not v.passed]
    if not failures:
        return FeedbackText(rendered="All visible tests passed.", included_failures=0)

    shown = failures[:max_failures]
    parts = [f"{len(failures)} of {len(tests)} visible tests failed."]
    for v in shown:
        test = tests[v.test_index]
        block = [
            f"Test {v.test_index + 1} failed ({v.outcome.label()}):",
            "Input:",
            _clip(test.input, max_field),
            "Expected output:",
            _clip(test.expected_output, max_field),
            "Actual output:",
            _clip(v.actual_output, max_field),
        ]
        if v.error_text:
            block.append("Error:")
            block.append(_clip(v.error_text, max_field))
        parts.append("\n".join(block))
    omitted = len(failures) - len(shown)
    if omitted:
        plural = "failure" if omitted == 1 else "failures"
        parts.append(f"{omitted} further {plural} omitted")
    return FeedbackText(rendered="\n\n".join(parts), included_failures=len(shown))
