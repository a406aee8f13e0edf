"""Completion backends with exact token metering.

Every call to :meth:`Backend.complete` appends exactly one
:class:`~seesaw.metrics.CallRecord` to the backend's ledger, failed calls
included. Token counts always come from the provider (or the script),
never from a local tokenizer.
"""

from __future__ import annotations

import json
import logging
import os
import time
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Callable, Iterable

import httpx

from .errors import BackendError, CapExceeded, ConfigError, NoScriptMatch, ScriptParseError
from .metrics import CallRecord, Ledger, SimulatedClock, WallClock

log = logging.getLogger(__name__)

DEFAULT_CAP = 4096
API_KEY_ENV = "SEESAW_API_KEY"


class Phase(str, Enum):
    TREE = "tree"
    SEE = "see"
    SAW = "saw"
    VALIDATE = "validate"


@dataclass(frozen=True)
class CompletionRequest:
    system_text: str
    user_text: str
    phase: Phase
    path: str | None = None
    round: int = 0
    max_tokens: int = DEFAULT_CAP
    temperature: float = 0.0

    def __post_init__(self) -> None:
        object.__setattr__(self, "phase", Phase(self.phase))
        if self.max_tokens <= 0:
            raise ValueError("max_tokens must be positive")
        if self.temperature < 0:
            raise ValueError("temperature must be >= 0")


@dataclass(frozen=True)
class CompletionResult:
    text: str
    prompt_tokens: int
    completion_tokens: int
    latency: float

    @property
    def total_tokens(self) -> int:
        return self.prompt_tokens + self.completion_tokens


class Backend:
    """Base class: cap check, timing and ledger bookkeeping.

    Subclasses implement :meth:`_complete`. A ``BackendError`` raised there
    may carry ``usage=(prompt, completion)`` when the provider reported
    tokens for a failed call.
    """

    def __init__(self, ledger: Ledger | None = None, cap: int = DEFAULT_CAP, clock: WallClock | None = None):
        self.ledger = ledger if ledger is not None else Ledger()
        self.cap = cap
        self.clock = clock if clock is not None else WallClock()
        self.requests: list[CompletionRequest] = []

    def _complete(self, request: CompletionRequest) -> CompletionResult:
        raise NotImplementedError

    def complete(self, request: CompletionRequest) -> CompletionResult:
        self.requests.append(request)
        started = self.clock.now()
        try:
            if request.max_tokens > self.cap:
                raise CapExceeded(f"max_tokens={request.max_tokens} exceeds cap {self.cap}")
            result = self._complete(request)
        except BackendError as exc:
            prompt, completion = getattr(exc, "usage", (0, 0))
            self._record(request, started, self.clock.now() - started, prompt, completion, str(exc) or type(exc).__name__)
            raise
        self._record(request, started, result.latency, result.prompt_tokens, result.completion_tokens, None)
        return result

    def _record(self, request, started, latency, prompt, completion, error) -> None:
        self.ledger.record(CallRecord(
            seq=self.ledger.next_seq(),
            phase=request.phase.value,
            path=request.path,
            round=request.round,
            prompt_tokens=prompt,
            completion_tokens=completion,
            total_tokens=prompt + completion,
            started_at=started,
            latency=latency,
            error=error,
        ))


# -- scripted backend ------------------------------------------------------------

@dataclass(frozen=True)
class ScriptEntry:
    phase: Phase
    response_text: str
    prompt_tokens: int = 0
    completion_tokens: int = 0
    latency_s: float = 0.0
    path: str | None = None
    round: int | None = None
    ordinal: int | None = None
    repeatable: bool = False

    def matches(self, request: CompletionRequest, ordinal: int) -> bool:
        return (
            self.phase is request.phase
            and (self.path is None or self.path == request.path)
            and (self.round is None or self.round == request.round)
            and (self.ordinal is None or self.ordinal == ordinal)
        )

    def to_json(self) -> str:
        match: dict = {"phase": self.phase.value}
        for key in ("path", "round", "ordinal"):
            if getattr(self, key) is not None:
                match[key] = getattr(self, key)
        return json.dumps({
            "match": match,
            "response_text": self.response_text,
            "prompt_tokens": self.prompt_tokens,
            "completion_tokens": self.completion_tokens,
            "latency_s": self.latency_s,
            "repeatable": self.repeatable,
        })


class ScriptedBackend(Backend):
    """Replays pre-authored responses; the offline test oracle.

    Entries are tried in declaration order and the first match wins.
    Non-repeatable entries are consumed on use. ``ordinal`` counts earlier
    calls carrying the same (phase, path) tag, starting at 0. Simulated
    latency advances the backend clock instead of sleeping.
    """

    def __init__(self, entries: Iterable[ScriptEntry], ledger: Ledger | None = None, cap: int = DEFAULT_CAP):
        super().__init__(ledger, cap, SimulatedClock())
        self.entries = list(entries)
        self._used: set[int] = set()
        self._ordinals: dict[tuple[Phase, str | None], int] = {}

    def _complete(self, request: CompletionRequest) -> CompletionResult:
        key = (request.phase, request.path)
        ordinal = self._ordinals.get(key, 0)
        self._ordinals[key] = ordinal + 1
        for i, entry in enumerate(self.entries):
            if i in self._used or not entry.matches(request, ordinal):
                continue
            if not entry.repeatable:
                self._used.add(i)
            self.clock.advance(entry.latency_s)
            return CompletionResult(entry.response_text, entry.prompt_tokens, entry.completion_tokens, entry.latency_s)
        raise NoScriptMatch(
            f"no script entry for phase={request.phase.value} path={request.path} "
            f"round={request.round} ordinal={ordinal}"
        )

    @property
    def unused(self) -> list[ScriptEntry]:
        return [e for i, e in enumerate(self.entries) if i not in self._used and not e.repeatable]


def _parse_entry(obj: object, base_dir: Path) -> ScriptEntry:
    if not isinstance(obj, dict):
        raise ValueError("record must be a JSON object")
    match = obj.get("match")
    if not isinstance(match, dict) or "phase" not in match:
        raise ValueError("record needs match.phase")
    unknown = set(match) - {"phase", "path", "round", "ordinal"}
    if unknown:
        raise ValueError(f"unknown match keys {sorted(unknown)}")
    if "response_text" in obj:
        text = obj["response_text"]
    elif "response_file" in obj:
        text = (base_dir / obj["response_file"]).read_text(encoding="utf-8")
    else:
        raise ValueError("record needs response_text or response_file")
    if not isinstance(text, str):
        raise ValueError("response_text must be a string")
    ints = {}
    for key in ("prompt_tokens", "completion_tokens"):
        val = obj.get(key, 0)
        if not isinstance(val, int) or isinstance(val, bool) or val < 0:
            raise ValueError(f"{key} must be a non-negative integer")
        ints[key] = val
    for key in ("round", "ordinal"):
        if key in match and (not isinstance(match[key], int) or isinstance(match[key], bool)):
            raise ValueError(f"match.{key} must be an integer")
    latency = obj.get("latency_s", 0.0)
    if not isinstance(latency, (int, float)) or latency < 0:
        raise ValueError("latency_s must be a non-negative number")
    return ScriptEntry(
        phase=Phase(match["phase"]),
        response_text=text,
        latency_s=float(latency),
        path=match.get("path"),
        round=match.get("round"),
        ordinal=match.get("ordinal"),
        repeatable=bool(obj.get("repeatable", False)),
        **ints,
    )


def parse_script(text: str, base_dir: str | Path = ".") -> list[ScriptEntry]:
    entries = []
    for lineno, line in enumerate(text.splitlines(), 1):
        if not line.strip():
            continue
        try:
            entries.append(_parse_entry(json.loads(line), Path(base_dir)))
        except (ValueError, OSError) as exc:
            raise ScriptParseError(str(exc), lineno) from exc
    return entries


def load_script(file: str | Path, ledger: Ledger | None = None, cap: int = DEFAULT_CAP) -> ScriptedBackend:
    """Build a :class:`ScriptedBackend` from a JSON-lines script file."""
    file = Path(file)
    try:
        text = file.read_text(encoding="utf-8")
    except OSError as exc:
        raise ScriptParseError(f"cannot read {file}: {exc}") from exc
    return ScriptedBackend(parse_script(text, file.parent), ledger, cap)


def write_script(entries: Iterable[ScriptEntry], file: str | Path) -> None:
    Path(file).write_text("".join(e.to_json() + "\n" for e in entries), encoding="utf-8")


# -- HTTP backend ------------------------------------------------------------------

class HttpBackend(Backend):
    """Client for an OpenAI-compatible ``/chat/completions`` endpoint.

    The API key is read from ``SEESAW_API_KEY`` only. Transport errors get
    one retry after a fixed back-off; HTTP error statuses do not.
    """

    def __init__(
        self,
        base_url: str,
        model: str,
        api_key: str | None = None,
        ledger: Ledger | None = None,
        cap: int = DEFAULT_CAP,
        timeout: float = 120.0,
        retry_backoff: float = 2.0,
        transport: httpx.BaseTransport | None = None,
        sleep: Callable[[float], None] = time.sleep,
    ):
        super().__init__(ledger, cap)
        api_key = api_key if api_key is not None else os.environ.get(API_KEY_ENV)
        if not api_key:
            raise ConfigError(f"{API_KEY_ENV} is not set")
        self.url = base_url.rstrip("/") + "/chat/completions"
        self.model = model
        self.retry_backoff = retry_backoff
        self._sleep = sleep
        self._client = httpx.Client(
            timeout=timeout,
            transport=transport,
            headers={"Authorization": f"Bearer {api_key}"},
        )

    def close(self) -> None:
        self._client.close()

    def _post(self, payload: dict) -> httpx.Response:
        try:
            return self._client.post(self.url, json=payload)
        except httpx.TransportError as exc:
            log.warning("transport error (%s), retrying in %.1fs", exc, self.retry_backoff)
            self._sleep(self.retry_backoff)
            try:
                return self._client.post(self.url, json=payload)
            except httpx.TransportError as exc2:
                raise BackendError(f"transport error after retry: {exc2}") from exc2

    def _complete(self, request: CompletionRequest) -> CompletionResult:
        payload = {
            "model": self.model,
            "messages": [
                {"role": "system", "content": request.system_text},
                {"role": "user", "content": request.user_text},
            ],
            "max_tokens": request.max_tokens,
            "temperature": request.temperature,
        }
        t0 = time.perf_counter()
        resp = self._post(payload)
        latency = time.perf_counter() - t0
        try:
            data = resp.json()
        except ValueError:
            data = None
        usage = (data or {}).get("usage") if isinstance(data, dict) else None
        if resp.status_code >= 400:
            err = BackendError(f"HTTP {resp.status_code}: {resp.text[:200]}")
            if isinstance(usage, dict):
                err.usage = (int(usage.get("prompt_tokens", 0)), int(usage.get("completion_tokens", 0)))
            raise err
        try:
            text = data["choices"][0]["message"]["content"]
            prompt = int(usage["prompt_tokens"])
            completion = int(usage["completion_tokens"])
        except (TypeError, KeyError, IndexError, ValueError) as exc:
            raise BackendError(f"malformed completion response: {exc!r}") from exc
        reported_total = usage.get("total_tokens")
        if reported_total is not None and int(reported_total) != prompt + completion:
            log.warning("provider total_tokens=%s differs from prompt+completion=%d",
                        reported_total, prompt + completion)
        return CompletionResult(text or "", prompt, completion, latency)
