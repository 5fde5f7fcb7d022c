"""Run one candidate program in a child interpreter under a wall-clock limit."""

from __future__ import annotations

import os
import subprocess
import sys
import tempfile
import threading
import time
from dataclasses import asdict, dataclass

# Hard per-stream capture bound.  A candidate that prints faster than the
# wall-clock limit can drain would otherwise buffer without bound; once a
# stream hits the cap the child is killed and the capped bytes are returned.
CAPTURE_CAP = 16 * 1024 * 1024

_KILL_GRACE = 1.0


@dataclass
class ShimResult:
    status: str  # "ok" | "runtime_error" | "timeout"
    stdout: str
    stderr: str
    exit_code: int
    elapsed: float

    def to_record(self) -> dict:
        return asdict(self)


class _StreamReader(threading.Thread):
    """Drains one pipe into memory, killing the child once the cap is hit."""

    def __init__(self, pipe, cap: int, on_overflow):
        super().__init__(daemon=True)
        self.pipe = pipe
        self.cap = cap
        self.on_overflow = on_overflow
        self.chunks: list[bytes] = []
        self.size = 0
        self.overflowed = False

    def run(self) -> None:
        try:
            while True:
                chunk = self.pipe.read(65536)
                if not chunk:
                    break
                if self.size < self.cap:
                    take = chunk[: self.cap - self.size]
                    self.chunks.append(take)
                    self.size += len(take)
                    if self.size >= self.cap and not self.overflowed:
                        self.overflowed = True
                        self.on_overflow()
                # past the cap: keep draining so the child never blocks on a
                # full pipe, but discard the bytes
        except (OSError, ValueError):
            pass
        finally:
            try:
                self.pipe.close()
            except OSError:
                pass

    def text(self) -> str:
        return b"".join(self.chunks).decode("utf-8", errors="replace")


def _feed_stdin(proc: subprocess.Popen, data: bytes) -> threading.Thread:
    def writer() -> None:
        try:
            proc.stdin.write(data)
            proc.stdin.close()
        except (BrokenPipeError, OSError):
            pass

    t = threading.Thread(target=writer, daemon=True)
    t.start()
    return t


def _kill(proc: subprocess.Popen) -> None:
    try:
        os.killpg(proc.pid, 9)
    except (ProcessLookupError, PermissionError, OSError):
        try:
            proc.kill()
        except OSError:
            pass


def _limit_child_memory(memory_limit: int | None):
    if memory_limit is None:
        return None
    import resource

    def preexec() -> None:
        try:
            resource.setrlimit(resource.RLIMIT_AS, (memory_limit, memory_limit))
        except (ValueError, OSError):
            pass

    return preexec


def execute(
    source: str,
    stdin_data: str,
    wall_clock_limit: float,
    memory_limit: int | None = None,
) -> ShimResult:
    """Execute ``source`` with ``stdin_data`` piped to its stdin.

    The child is killed once ``wall_clock_limit`` seconds of wall time pass;
    the reported ``elapsed`` is then >= the limit and status is "timeout".
    A child that cannot even be spawned yields status "runtime_error" with the
    diagnostic in the stderr field.
    """
    if wall_clock_limit <= 0:
        raise ValueError("wall_clock_limit must be positive")

    start = time.monotonic()
    with tempfile.TemporaryDirectory(prefix="codeshim-") as workdir:
        script = os.path.join(workdir, "candidate.py")
        with open(script, "w", encoding="utf-8") as fh:
            fh.write(source)

        try:
            proc = subprocess.Popen(
                [sys.executable, "-I", script],
                stdin=subprocess.PIPE,
                stdout=subprocess.PIPE,
                stderr=subprocess.PIPE,
                cwd=workdir,
                start_new_session=True,
                preexec_fn=_limit_child_memory(memory_limit),
            )
        except OSError as exc:
            return ShimResult(
                status="runtime_error",
                stdout="",
                stderr=f"failed to spawn candidate: {exc}",
                exit_code=-1,
                elapsed=time.monotonic() - start,
            )

        out_reader = _StreamReader(proc.stdout, CAPTURE_CAP, lambda: _kill(proc))
        err_reader = _StreamReader(proc.stderr, CAPTURE_CAP, lambda: _kill(proc))
        out_reader.start()
        err_reader.start()
        _feed_stdin(proc, stdin_data.encode("utf-8"))

        timed_out = False
        try:
            proc.wait(timeout=wall_clock_limit)
        except subprocess.TimeoutExpired:
            timed_out = True
            _kill(proc)
            proc.wait()

        out_reader.join(timeout=_KILL_GRACE)
        err_reader.join(timeout=_KILL_GRACE)
        elapsed = time.monotonic() - start

    if timed_out:
        status = "timeout"
    elif proc.returncode == 0:
        status = "ok"
    else:
        status = "runtime_error"

    return ShimResult(
        status=status,
        stdout=out_reader.text(),
        stderr=err_reader.text(),
        exit_code=proc.returncode if proc.returncode is not None else -1,
        elapsed=elapsed,
    )
