"""Problem data model and the canonical on-disk corpus format.

A corpus file holds one JSON record per line with keys ``id``,
``description``, ``difficulty``, ``visible_tests``, ``hidden_tests`` and
optionally ``seed_program``.  Test entries are ``{"input": ...,
"expected_output": ...}`` with an optional ``"allow_empty": true`` escape
hatch for tests whose expected stdout is genuinely empty.  Files stream one
problem at a time, so arbitrarily large corpora load in constant memory.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Iterator


class CorpusError(ValueError):
    """Malformed corpus file, record, or conversion input."""


@dataclass(frozen=True)
class TestCase:
    __test__ = False  # not a pytest test class despite the name

    input: str
    expected_output: str
    allow_empty: bool = False

    def pair(self) -> tuple[str, str]:
        return (self.input, self.expected_output)


@dataclass(frozen=True)
class Problem:
    id: str
    description: str
    difficulty: str
    visible_tests: tuple[TestCase, ...]
    hidden_tests: tuple[TestCase, ...]
    seed_program: str | None = None


@dataclass(frozen=True)
class ProblemSet:
    """Ordered, immutable collection of problems; order is experiment order."""

    problems: tuple[Problem, ...]
    source_label: str = ""

    def __iter__(self) -> Iterator[Problem]:
        return iter(self.problems)

    def __len__(self) -> int:
        return len(self.problems)


@dataclass(frozen=True)
class FieldMapping:
    """Where to find problem fields inside an external benchmark record.

    Paths are dot-separated keys into nested dicts.  ``visible_count``
    overrides the default first-half/second-half test split.
    """

    description: str
    inputs: str
    outputs: str
    id: str | None = None
    difficulty: str | None = None
    difficulty_default: str = "unknown"
    seed: str | None = None
    visible_count: int | None = None


# External shapes known to the converter.  APPS-style records keep their test
# pairs under input_output and have no buggy seed (the loop generates one).
MAPPINGS: dict[str, FieldMapping] = {
    "apps": FieldMapping(
        description="question",
        inputs="input_output.inputs",
        outputs="input_output.outputs",
        id="id",
        difficulty="difficulty",
    ),
    "generic": FieldMapping(
        description="description",
        inputs="inputs",
        outputs="outputs",
        id="id",
        difficulty="difficulty",
        seed="seed_program",
    ),
}


def _check_test_case(tc: TestCase, where: str) -> None:
    if not tc.expected_output.strip() and not tc.allow_empty:
        raise CorpusError(f"{where}: expected_output empty (set allow_empty to permit)")


def validate_problem(problem: Problem, where: str = "") -> None:
    prefix = f"{where}: " if where else ""
    if not problem.id:
        raise CorpusError(f"{prefix}id empty")
    if not problem.visible_tests:
        raise CorpusError(f"{prefix}visible_tests empty")
    if not problem.hidden_tests:
        raise CorpusError(f"{prefix}hidden_tests empty")
    for kind, tests in (("visible_tests", problem.visible_tests), ("hidden_tests", problem.hidden_tests)):
        for i, tc in enumerate(tests):
            _check_test_case(tc, f"{prefix}{kind}[{i}]")
    overlap = {tc.pair() for tc in problem.visible_tests} & {tc.pair() for tc in problem.hidden_tests}
    if overlap:
        raise CorpusError(f"{prefix}visible and hidden tests share {len(overlap)} (input, expected_output) pair(s)")


def _parse_test(entry: Any, where: str) -> TestCase:
    if not isinstance(entry, dict):
        raise CorpusError(f"{where}: test entry must be an object")
    try:
        tc = TestCase(
            input=str(entry["input"]),
            expected_output=str(entry["expected_output"]),
            allow_empty=bool(entry.get("allow_empty", False)),
        )
    except KeyError as exc:
        raise CorpusError(f"{where}: test entry missing key {exc}") from None
    return tc


def _parse_record(record: Any, where: str) -> Problem:
    if not isinstance(record, dict):
        raise CorpusError(f"{where}: record must be an object")
    for key in ("id", "description", "difficulty"):
        if key not in record:
            raise CorpusError(f"{where}: missing field '{key}'")
    visible = tuple(
        _parse_test(t, f"{where}: visible_tests[{i}]") for i, t in enumerate(record.get("visible_tests") or [])
    )
    hidden = tuple(
        _parse_test(t, f"{where}: hidden_tests[{i}]") for i, t in enumerate(record.get("hidden_tests") or [])
    )
    seed = record.get("seed_program")
    problem = Problem(
        id=str(record["id"]),
        description=str(record["description"]),
        difficulty=str(record["difficulty"]),
        visible_tests=visible,
        hidden_tests=hidden,
        seed_program=str(seed) if seed is not None else None,
    )
    validate_problem(problem, where)
    return problem


def load_problems(path: str | Path, source_label: str | None = None) -> ProblemSet:
    """Load and validate a canonical corpus file, preserving file order.

    Raises CorpusError naming the offending line and field; a duplicate id
    names both lines involved.
    """
    path = Path(path)
    problems: list[Problem] = []
    seen: dict[str, int] = {}
    with path.open("r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as exc:
                raise CorpusError(f"line {lineno}: invalid JSON: {exc.msg}") from None
            where = f"line {lineno}"
            if isinstance(record, dict):
                if not (record.get("hidden_tests") or []):
                    raise CorpusError(f"{where}: hidden_tests empty")
                if not (record.get("visible_tests") or []):
                    raise CorpusError(f"{where}: visible_tests empty")
            problem = _parse_record(record, where)
            if problem.id in seen:
                raise CorpusError(
                    f"duplicate problem id '{problem.id}' on lines {seen[problem.id]} and {lineno}"
                )
            seen[problem.id] = lineno
            problems.append(problem)
    return ProblemSet(problems=tuple(problems), source_label=source_label or path.name)


def _test_record(tc: TestCase) -> dict:
    record: dict[str, Any] = {"input": tc.input, "expected_output": tc.expected_output}
    if tc.allow_empty:
        record["allow_empty"] = True
    return record


def problem_record(problem: Problem) -> dict:
    record: dict[str, Any] = {
        "id": problem.id,
        "description": problem.description,
        "difficulty": problem.difficulty,
        "visible_tests": [_test_record(t) for t in problem.visible_tests],
        "hidden_tests": [_test_record(t) for t in problem.hidden_tests],
    }
    if problem.seed_program is not None:
        record["seed_program"] = problem.seed_program
    return record


def serialize_problem(problem: Problem) -> str:
    """Canonical single-line form; fixed key order and separators so that
    serialize(load(file)) is byte-identical for already-canonical files."""
    return json.dumps(problem_record(problem), ensure_ascii=False, separators=(",", ":"))


def serialize_problems(problems: ProblemSet) -> str:
    return "".join(serialize_problem(p) + "\n" for p in problems)


def save_problems(problems: ProblemSet, path: str | Path) -> None:
    Path(path).write_text(serialize_problems(problems), encoding="utf-8")


def _dig(record: Any, path: str) -> Any:
    value = record
    for key in path.split("."):
        if not isinstance(value, dict) or key not in value:
            raise CorpusError(f"missing key '{path}' in external record")
        value = value[key]
    return value


def convert_external(
    record: dict,
    mapping: FieldMapping,
    fallback_id: str | None = None,
) -> Problem:
    """Convert one external benchmark record to a validated Problem.

    The first ceil(n/2) test pairs become visible and the rest hidden unless
    the mapping pins an explicit visible_count.
    """
    inputs = _dig(record, mapping.inputs)
    outputs = _dig(record, mapping.outputs)
    if not isinstance(inputs, list) or not isinstance(outputs, list):
        raise CorpusError("inputs and outputs must be arrays")
    if len(inputs) != len(outputs):
        raise CorpusError(f"inputs/outputs length mismatch: {len(inputs)} vs {len(outputs)}")

    tests = tuple(TestCase(input=str(i), expected_output=str(o)) for i, o in zip(inputs, outputs))
    n = len(tests)
    visible_count = mapping.visible_count if mapping.visible_count is not None else (n + 1) // 2
    if not 0 <= visible_count <= n:
        raise CorpusError(f"visible_count {visible_count} out of range for {n} tests")

    if mapping.id is not None and _has_path(record, mapping.id):
        problem_id = str(_dig(record, mapping.id))
    elif fallback_id is not None:
        problem_id = fallback_id
    else:
        raise CorpusError("record has no id and no fallback_id given")

    difficulty = mapping.difficulty_default
    if mapping.difficulty is not None and _has_path(record, mapping.difficulty):
        difficulty = str(_dig(record, mapping.difficulty))

    seed = None
    if mapping.seed is not None and _has_path(record, mapping.seed):
        raw = _dig(record, mapping.seed)
        if raw is not None:
            seed = str(raw)

    problem = Problem(
        id=problem_id,
        description=str(_dig(record, mapping.description)),
        difficulty=difficulty,
        visible_tests=tests[:visible_count],
        hidden_tests=tests[visible_count:],
        seed_program=seed,
    )
    validate_problem(problem)
    return problem


def _has_path(record: Any, path: str) -> bool:
    value = record
    for key in path.split("."):
        if not isinstance(value, dict) or key not in value:
            return False
        value = value[key]
    return True
