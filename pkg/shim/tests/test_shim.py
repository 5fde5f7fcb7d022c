"""Protocol tests: the shim is driven as a subprocess only, never imported."""
from __future__ import annotations

import json
import subprocess
import sys
import time

SHIM_CMD = [sys.executable, "-m", "codeshim"]

SUM_OK = "a, b = map(int, input().split())\nprint(a + b)\n"
SUM_WRONG = "a, b = map(int, input().split())\nprint(a - b)\n"
CRASH = "raise ValueError('boom')\n"
SPIN = "while True:\n    pass\n"
FLOOD = "print('x' * 5000)\n"
ECHO = "import sys\nsys.stdout.write(sys.stdin.read())\n"


def run_shim(request=None, *, raw: str | None = None, args=(), timeout=30.0):
    payload = raw if raw is not None else json.dumps(request)
    return subprocess.run(SHIM_CMD + list(args), input=payload + "\n",
                          capture_output=True, text=True, timeout=timeout)


def shim_record(request, **kwargs) -> dict:
    proc = run_shim(request, **kwargs)
    assert proc.returncode == 0, proc.stderr
    lines = proc.stdout.splitlines()
    assert len(lines) == 1, "response must be exactly one line"
    return json.loads(lines[0])


def test_ok_program_record_shape():
    record = shim_record({"source": SUM_OK, "stdin_data": "1 2\n",
                          "wall_clock_limit": 5.0})
    assert set(record) == {"status", "stdout", "stderr", "exit_code",
                           "elapsed"}
    assert record["status"] == "ok"
    assert record["stdout"] == "3\n"
    assert record["stderr"] == ""
    assert record["exit_code"] == 0
    assert 0.0 <= record["elapsed"] < 5.0


def test_wrong_output_is_still_protocol_ok():
    # Comparing against expected output is the caller's business.
    record = shim_record({"source": SUM_WRONG, "stdin_data": "1 2\n",
                          "wall_clock_limit": 5.0})
    assert record["status"] == "ok"
    assert record["stdout"] == "-1\n"


def test_exception_is_runtime_error():
    record = shim_record({"source": CRASH, "stdin_data": "",
                          "wall_clock_limit": 5.0})
    assert record["status"] == "runtime_error"
    assert record["exit_code"] != 0
    assert "ValueError" in record["stderr"]
    assert "boom" in record["stderr"]


def test_infinite_loop_times_out_within_grace():
    start = time.monotonic()
    record = shim_record({"source": SPIN, "stdin_data": "",
                          "wall_clock_limit": 1.5})
    wall = time.monotonic() - start
    assert record["status"] == "timeout"
    assert record["elapsed"] >= 1.5
    assert wall < 1.5 + 1.0


def test_oversized_output_is_captured_verbatim():
    # The shim only caps at its own hard limit; downstream applies policy.
    record = shim_record({"source": FLOOD, "stdin_data": "",
                          "wall_clock_limit": 5.0})
    assert record["status"] == "ok"
    assert record["stdout"] == "x" * 5000 + "\n"


def test_stdin_is_piped_through():
    record = shim_record({"source": ECHO, "stdin_data": "hello\nworld\n",
                          "wall_clock_limit": 5.0})
    assert record["stdout"] == "hello\nworld\n"


def test_memory_limit_flag_is_enforced():
    source = "data = bytearray(600 * 1024 * 1024)\nprint(len(data))\n"
    record = shim_record({"source": source, "stdin_data": "",
                          "wall_clock_limit": 10.0},
                         args=["--memory-limit", str(256 * 1024 * 1024)])
    assert record["status"] == "runtime_error"
    assert "MemoryError" in record["stderr"]


def test_malformed_json_request():
    proc = run_shim(raw="this is not json")
    assert proc.returncode == 2
    record = json.loads(proc.stdout.splitlines()[0])
    assert "error" in record
    assert "malformed request" in record["error"]


def test_missing_required_field():
    proc = run_shim({"source": "print(1)"})  # no wall_clock_limit
    assert proc.returncode == 2
    assert "error" in json.loads(proc.stdout.splitlines()[0])


def test_empty_request_line():
    proc = run_shim(raw="")
    assert proc.returncode == 2
    record = json.loads(proc.stdout.splitlines()[0])
    assert record["error"] == "empty request"
