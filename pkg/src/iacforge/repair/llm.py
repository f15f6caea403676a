"""LLM client implementations behind one ``complete(prompt, params)`` contract."""

from __future__ import annotations

import hashlib
import json
import logging
import os
import threading
import time
from collections import defaultdict, deque
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Protocol, Union

from ..errors import LlmUnavailable

log = logging.getLogger(__name__)

API_KEY_ENV = "IACFORGE_LLM_API_KEY"


@dataclass(frozen=True)
class GenerationParams:
    temperature: float = 0.2
    max_tokens: int = 4096
    model: str | None = None


class LlmClient(Protocol):
    def complete(self, prompt: str, params: GenerationParams | None = None) -> str: ...


def prompt_hash(prompt: str) -> str:
    return hashlib.sha256(prompt.encode("utf-8")).hexdigest()


Response = Union[str, Callable[[str], str]]


class ScriptedClient:
    """Returns canned responses in order. A callable entry receives the prompt."""

    def __init__(self, responses: list[Response]) -> None:
        self._responses = list(responses)
        self._index = 0
        self._lock = threading.Lock()
        self.prompts: list[str] = []

    @property
    def calls(self) -> int:
        return len(self.prompts)

    def complete(self, prompt: str, params: GenerationParams | None = None) -> str:
        with self._lock:
            if self._index >= len(self._responses):
                raise LlmUnavailable("scripted client has no responses left")
            entry = self._responses[self._index]
            self._index += 1
            self.prompts.append(prompt)
        return entry(prompt) if callable(entry) else entry


class FunctionClient:
    """Wraps a function of the prompt; handy for rule-based mocks."""

    def __init__(self, fn: Callable[[str], str]) -> None:
        self._fn = fn
        self._lock = threading.Lock()
        self.prompts: list[str] = []

    @property
    def calls(self) -> int:
        return len(self.prompts)

    def complete(self, prompt: str, params: GenerationParams | None = None) -> str:
        with self._lock:
            self.prompts.append(prompt)
        return self._fn(prompt)


class ReplayClient:
    """Serves responses from a JSON Lines log of ``{prompt_hash, response}``.

    Repeated prompts are answered in recorded order.
    """

    def __init__(self, path: str | Path) -> None:
        self._queues: dict[str, deque[str]] = defaultdict(deque)
        self._lock = threading.Lock()
        with open(path, encoding="utf-8") as fh:
            for line in fh:
                if line.strip():
                    entry = json.loads(line)
                    self._queues[entry["prompt_hash"]].append(entry["response"])

    def complete(self, prompt: str, params: GenerationParams | None = None) -> str:
        key = prompt_hash(prompt)
        with self._lock:
            queue = self._queues.get(key)
            if not queue:
                raise LlmUnavailable(f"no recorded response for prompt {key[:12]}")
            return queue.popleft()


class RecordingClient:
    """Forwards to ``inner`` and appends every exchange to a replay log."""

    def __init__(self, inner: LlmClient, path: str | Path) -> None:
        self._inner = inner
        self._path = Path(path)
        self._lock = threading.Lock()

    def complete(self, prompt: str, params: GenerationParams | None = None) -> str:
        response = self._inner.complete(prompt, params)
        line = json.dumps({"prompt_hash": prompt_hash(prompt), "response": response}, sort_keys=True)
        with self._lock, open(self._path, "a", encoding="utf-8") as fh:
            fh.write(line + "\n")
        return response


class HttpChatClient:
    """Chat-completions style endpoint with bearer auth and retry on 429/5xx."""

    def __init__(
        self,
        url: str,
        model: str,
        *,
        api_key: str | None = None,
        timeout: float = 120.0,
        attempts: int = 3,
        backoff: float = 1.0,
        transport=None,
    ) -> None:
        import httpx

        self.url = url
        self.model = model
        self.attempts = attempts
        self.backoff = backoff
        key = api_key if api_key is not None else os.environ.get(API_KEY_ENV)
        headers = {"Authorization": f"Bearer {key}"} if key else {}
        self._client = httpx.Client(timeout=timeout, headers=headers, transport=transport)

    def complete(self, prompt: str, params: GenerationParams | None = None) -> str:
        import httpx

        params = params or GenerationParams()
        body = {
            "model": params.model or self.model,
            "messages": [{"role": "user", "content": prompt}],
            "temperature": params.temperature,
            "max_tokens": params.max_tokens,
        }
        last = "no attempt made"
        for attempt in range(self.attempts):
            if attempt:
                time.sleep(self.backoff * 2 ** (attempt - 1))
            try:
                resp = self._client.post(self.url, json=body)
            except httpx.HTTPError as exc:
                last = f"transport error: {exc}"
                log.warning("LLM request failed (%s), attempt %d", last, attempt + 1)
                continue
            if resp.status_code == 429 or resp.status_code >= 500:
                last = f"HTTP {resp.status_code}"
                log.warning("LLM request failed (%s), attempt %d", last, attempt + 1)
                continue
            if resp.status_code >= 400:
                raise LlmUnavailable(f"LLM endpoint rejected request: HTTP {resp.status_code}")
            try:
                return resp.json()["choices"][0]["message"]["content"]
            except (ValueError, KeyError, IndexError, TypeError) as exc:
                raise LlmUnavailable(f"malformed LLM response: {exc}") from exc
        raise LlmUnavailable(f"LLM endpoint unavailable after {self.attempts} attempts: {last}")
