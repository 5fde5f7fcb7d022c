"""Chat-completion clients: live transport, record/replay cassettes, mocks.

Every backend funnels through :meth:`LLMClient.complete`, which appends to an
in-memory call log so tests can assert call-count contracts and scan prompts.
Request digests are SHA-256 over a canonical JSON encoding of the request
tuple, making cassette lookups stable across runs and platforms.
"""
from __future__ import annotations

import hashlib
import json
import os
import re
import threading
import time
from collections import deque
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Iterable, Mapping, Sequence

import requests

from .prompts import TemplateId


class LLMError(RuntimeError):
    pass


class CassetteMissError(LLMError):
    """Replay-mode lookup failed; carries the digest that missed."""

    def __init__(self, digest: str, template_id: str) -> None:
        super().__init__(
            f"cassette miss: no recorded responses for digest {digest} "
            f"(template {template_id})")
        self.digest = digest


@dataclass(frozen=True)
class LLMParams:
    model: str
    temperature: float = 0.0
    max_tokens: int = 4096
    sample_count: int = 1

    def __post_init__(self) -> None:
        if not self.model:
            raise ValueError("model must be a non-empty string")
        if self.temperature < 0:
            raise ValueError(f"temperature must be >= 0, got {self.temperature}")
        if self.max_tokens < 1:
            raise ValueError(f"max_tokens must be >= 1, got {self.max_tokens}")
        if self.sample_count < 1:
            raise ValueError(
                f"sample_count must be >= 1, got {self.sample_count}")


def request_digest(prompt: str, params: LLMParams) -> str:
    payload = {
        "model": params.model,
        "prompt": prompt,
        "temperature": params.temperature,
        "max_tokens": params.max_tokens,
        "sample_count": params.sample_count,
    }
    canonical = json.dumps(payload, ensure_ascii=True, sort_keys=True,
                           separators=(",", ":"))
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


@dataclass(frozen=True)
class CallRecord:
    template_id: str
    prompt: str
    params: LLMParams
    responses: tuple[str, ...]


@dataclass(frozen=True)
class CassetteEntry:
    digest: str
    template_id: str
    prompt: str
    responses: tuple[str, ...]

    def to_line(self) -> str:
        record = {
            "digest": self.digest,
            "template_id": self.template_id,
            "prompt": self.prompt,
            "responses": list(self.responses),
        }
        return json.dumps(record, ensure_ascii=False, separators=(",", ":"))


def load_cassette(path: str | Path) -> dict[str, CassetteEntry]:
    """Read a line-delimited cassette file into a digest-keyed map.

    A digest recorded twice keeps the later entry, so re-recording a run
    simply overwrites.
    """
    entries: dict[str, CassetteEntry] = {}
    path = Path(path)
    if not path.exists():
        return entries
    with path.open(encoding="utf-8") as handle:
        for lineno, line in enumerate(handle, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                record = json.loads(line)
                entry = CassetteEntry(
                    digest=record["digest"],
                    template_id=record["template_id"],
                    prompt=record["prompt"],
                    responses=tuple(record["responses"]),
                )
            except (json.JSONDecodeError, KeyError, TypeError) as exc:
                raise LLMError(
                    f"{path}: line {lineno}: malformed cassette entry: {exc}"
                ) from exc
            entries[entry.digest] = entry
    return entries


def append_cassette_entry(path: str | Path, entry: CassetteEntry) -> None:
    with Path(path).open("a", encoding="utf-8") as handle:
        handle.write(entry.to_line() + "\n")


def extract_code(response: str) -> str:
    """Pull source out of the first fenced block, else trim the whole reply."""
    match = _FENCE_RE.search(response)
    code = match.group(1).strip() if match else response.strip()
    if not code:
        raise LLMError("no code produced")
    return code


_FENCE_RE = re.compile(r"```[^\n]*\n(.*?)```", re.DOTALL)


class LLMClient:
    """Base class: validates requests and keeps the shared call log."""

    def __init__(self) -> None:
        self.call_log: list[CallRecord] = []
        self._log_lock = threading.Lock()

    def complete(self, template_id: TemplateId | str, prompt: str,
                 params: LLMParams) -> list[str]:
        if not prompt:
            raise LLMError("empty prompt")
        tid = str(TemplateId(template_id))
        responses = self._complete(tid, prompt, params)
        if len(responses) != params.sample_count:
            raise LLMError(
                f"backend returned {len(responses)} response(s), expected "
                f"{params.sample_count}")
        with self._log_lock:
            self.call_log.append(CallRecord(
                template_id=tid, prompt=prompt, params=params,
                responses=tuple(responses)))
        return list(responses)

    def _complete(self, template_id: str, prompt: str,
                  params: LLMParams) -> Sequence[str]:
        raise NotImplementedError


class MockScriptClient(LLMClient):
    """Deterministic scripted backend for tests and dry runs.

    ``script`` is either a flat sequence consumed in order by every call, or a
    mapping from template-id value to its own queue; the key ``"*"`` serves as
    a fallback for template ids without a dedicated queue.  sample_count > 1
    consumes that many scripted entries.
    """

    def __init__(self, script: Sequence[str] | Mapping[str, Sequence[str]]) -> None:
        super().__init__()
        self._script_lock = threading.Lock()
        self._flat: deque[str] | None = None
        self._queues: dict[str, deque[str]] | None = None
        if isinstance(script, Mapping):
            self._queues = {str(key): deque(values)
                            for key, values in script.items()}
        else:
            self._flat = deque(script)

    def remaining(self) -> int:
        with self._script_lock:
            if self._flat is not None:
                return len(self._flat)
            assert self._queues is not None
            return sum(len(q) for q in self._queues.values())

    def _pop(self, template_id: str) -> str:
        if self._flat is not None:
            if not self._flat:
                raise LLMError(
                    f"mock script exhausted (next request: {template_id})")
            return self._flat.popleft()
        assert self._queues is not None
        if template_id in self._queues:
            queue = self._queues[template_id]
        elif "*" in self._queues:
            queue = self._queues["*"]
        else:
            raise LLMError(
                f"mock script has no entries for template {template_id}")
        if not queue:
            raise LLMError(
                f"mock script exhausted for template {template_id}")
        return queue.popleft()

    def _complete(self, template_id: str, prompt: str,
                  params: LLMParams) -> Sequence[str]:
        with self._script_lock:
            return [self._pop(template_id)
                    for _ in range(params.sample_count)]


class ReplayClient(LLMClient):
    """Serves recorded responses only; a missing digest is a hard error."""

    def __init__(self, cassette_path: str | Path) -> None:
        super().__init__()
        self.cassette_path = Path(cassette_path)
        self._entries = load_cassette(self.cassette_path)

    def _complete(self, template_id: str, prompt: str,
                  params: LLMParams) -> Sequence[str]:
        digest = request_digest(prompt, params)
        entry = self._entries.get(digest)
        if entry is None:
            raise CassetteMissError(digest, template_id)
        if len(entry.responses) != params.sample_count:
            raise LLMError(
                f"cassette entry {digest} holds {len(entry.responses)} "
                f"response(s) but the request asked for {params.sample_count}")
        return list(entry.responses)


class RecordingClient(LLMClient):
    """Delegates to an inner backend and appends each new digest to disk.

    Requests whose digest is already on the cassette are answered from it
    without touching the inner backend, so interrupted recording runs can be
    resumed cheaply.
    """

    def __init__(self, inner: LLMClient, cassette_path: str | Path) -> None:
        super().__init__()
        self._inner = inner
        self.cassette_path = Path(cassette_path)
        self._entries = load_cassette(self.cassette_path)
        self._write_lock = threading.Lock()

    def _complete(self, template_id: str, prompt: str,
                  params: LLMParams) -> Sequence[str]:
        digest = request_digest(prompt, params)
        with self._write_lock:
            cached = self._entries.get(digest)
        if cached is not None:
            return list(cached.responses)
        responses = self._inner.complete(template_id, prompt, params)
        entry = CassetteEntry(digest=digest, template_id=template_id,
                              prompt=prompt, responses=tuple(responses))
        with self._write_lock:
            if digest not in self._entries:
                self._entries[digest] = entry
                append_cassette_entry(self.cassette_path, entry)
        return responses


class TokenBucket:
    """Blocking token-bucket limiter shared by live-mode workers."""

    def __init__(self, requests_per_minute: float, *, capacity: float = 1.0,
                 clock: Callable[[], float] = time.monotonic,
                 sleep: Callable[[float], None] = time.sleep) -> None:
        if requests_per_minute <= 0:
            raise ValueError("requests_per_minute must be positive")
        self._rate = requests_per_minute / 60.0
        self._capacity = capacity
        self._tokens = capacity
        self._clock = clock
        self._sleep = sleep
        self._last = clock()
        self._lock = threading.Lock()

    def acquire(self) -> float:
        """Take one token, sleeping if none is available; returns the wait."""
        with self._lock:
            now = self._clock()
            self._tokens = min(self._capacity,
                               self._tokens + (now - self._last) * self._rate)
            self._last = now
            if self._tokens >= 1.0:
                self._tokens -= 1.0
                wait = 0.0
            else:
                wait = (1.0 - self._tokens) / self._rate
                self._tokens = 0.0
                # Push the refill origin forward so a queued caller behind us
                # waits its own full share instead of double-counting ours.
                self._last = now + wait
        if wait > 0.0:
            self._sleep(wait)
        return wait


class LiveClient(LLMClient):
    """HTTP chat-completion transport with retries and rate limiting.

    Only transport-level failures and 5xx statuses are retried (3 attempts,
    exponential backoff); content-level errors surface immediately so a bad
    request never burns the retry budget.
    """

    MAX_ATTEMPTS = 3

    def __init__(self, base_url: str, *, api_key_env: str = "",
                 requests_per_minute: float | None = None,
                 timeout: float = 120.0,
                 backoff_base: float = 1.0,
                 session: requests.Session | None = None,
                 sleep: Callable[[float], None] = time.sleep) -> None:
        super().__init__()
        self._base_url = base_url.rstrip("/")
        self._api_key_env = api_key_env
        self._timeout = timeout
        self._backoff_base = backoff_base
        self._session = session if session is not None else requests.Session()
        self._sleep = sleep
        self._bucket = (TokenBucket(requests_per_minute, sleep=sleep)
                        if requests_per_minute else None)

    def _headers(self) -> dict[str, str]:
        headers = {"Content-Type": "application/json"}
        key = os.environ.get(self._api_key_env, "") if self._api_key_env else ""
        if key:
            headers["Authorization"] = f"Bearer {key}"
        return headers

    def _complete(self, template_id: str, prompt: str,
                  params: LLMParams) -> Sequence[str]:
        url = self._base_url + "/chat/completions"
        payload = {
            "model": params.model,
            "messages": [{"role": "user", "content": prompt}],
            "temperature": params.temperature,
            "max_tokens": params.max_tokens,
            "n": params.sample_count,
        }
        last_error: Exception | None = None
        for attempt in range(self.MAX_ATTEMPTS):
            if attempt:
                self._sleep(self._backoff_base * 2 ** (attempt - 1))
            if self._bucket is not None:
                self._bucket.acquire()
            try:
                resp = self._session.post(url, json=payload,
                                          headers=self._headers(),
                                          timeout=self._timeout)
            except requests.RequestException as exc:
                last_error = exc
                continue
            if resp.status_code >= 500:
                last_error = LLMError(
                    f"server error {resp.status_code} from {url}")
                continue
            if resp.status_code != 200:
                raise LLMError(
                    f"provider returned status {resp.status_code}: "
                    f"{resp.text[:500]}")
            return self._parse_response(resp, params)
        raise LLMError(
            f"transport failure after {self.MAX_ATTEMPTS} attempts: "
            f"{last_error}")

    @staticmethod
    def _parse_response(resp: requests.Response,
                        params: LLMParams) -> list[str]:
        try:
            data = resp.json()
            texts = [choice["message"]["content"]
                     for choice in data["choices"]]
        except (ValueError, KeyError, TypeError) as exc:
            raise LLMError(f"malformed provider response: {exc}") from exc
        if len(texts) != params.sample_count:
            raise LLMError(
                f"provider returned {len(texts)} choice(s), expected "
                f"{params.sample_count}")
        return texts


def count_calls(log: Iterable[CallRecord],
                template_id: TemplateId | str | None = None) -> int:
    """Convenience for tests: calls overall or for one template id."""
    if template_id is None:
        return sum(1 for _ in log)
    wanted = str(TemplateId(template_id))
    return sum(1 for record in log if record.template_id == wanted)
