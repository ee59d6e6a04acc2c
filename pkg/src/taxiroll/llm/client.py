"""Chat-completion clients: a real HTTP client and a scripted mock.

The wire format is the widely used chat-completions shape: POST a JSON body
with ``model``, ``messages`` and ``temperature``, read back
``choices[0].message.content``.  The mock client answers from a
pattern -> replies table so the whole strategy suite runs hermetically.
"""
from __future__ import annotations

import json
import os
import re
import threading
import time
from dataclasses import dataclass, field
from pathlib import Path

import httpx

STRATEGIES = ("zero_shot", "few_shot", "cot", "cot_sc", "tot", "zs_hc")


class TransportError(RuntimeError):
    """Client could not obtain a completion after bounded retries."""


class MockScriptError(ValueError):
    """The scripted mock had no reply for a prompt."""


@dataclass(frozen=True)
class ChatMessage:
    role: str  # system | user | assistant
    content: str


@dataclass
class LlmConfig:
    """Settings for the LLM-backed base policy.

    ``endpoint`` may be an HTTP(S) URL or ``mock://<path-or-name>`` pointing
    at a scripted reply table (bundled scripts resolve by name).  The auth
    token, when needed, is read from the ``auth_env`` environment variable.
    """

    endpoint: str = ""
    model_name: str = "mock"
    strategy: str = "zero_shot"
    temperature: float = 0.0
    sc_temperature: float = 0.7  # self-consistency needs diverse samples
    sc_samples: int = 5
    max_reprompts: int = 5
    semantic_context: str | None = None
    timeout: float = 60.0
    max_retries: int = 2
    retry_backoff: float = 0.2
    auth_env: str = "TAXIROLL_LLM_TOKEN"
    max_in_flight: int = 4
    transcript_path: str | None = None

    def __post_init__(self) -> None:
        if self.strategy not in STRATEGIES:
            raise ValueError(
                f"unknown strategy {self.strategy!r}; expected one of {STRATEGIES}"
            )
        if self.temperature < 0:
            raise ValueError("temperature must be >= 0")
        if self.sc_samples < 1:
            raise ValueError("sc_samples must be >= 1")
        if self.max_reprompts < 0:
            raise ValueError("max_reprompts must be >= 0")


class HttpChatClient:
    """Blocking chat-completion client with retries and an in-flight bound."""

    def __init__(self, cfg: LlmConfig, transport: httpx.BaseTransport | None = None):
        if not cfg.endpoint:
            raise ValueError("LLM endpoint is not configured")
        self.cfg = cfg
        self._gate = threading.BoundedSemaphore(max(1, cfg.max_in_flight))
        headers = {"Content-Type": "application/json"}
        token = os.environ.get(cfg.auth_env, "")
        if token:
            headers["Authorization"] = f"Bearer {token}"
        self._client = httpx.Client(
            timeout=cfg.timeout, headers=headers, transport=transport
        )

    def complete(self, messages: list[ChatMessage], temperature: float = 0.0) -> str:
        payload = {
            "model": self.cfg.model_name,
            "messages": [{"role": m.role, "content": m.content} for m in messages],
            "temperature": temperature,
        }
        last_error: Exception | None = None
        for attempt in range(self.cfg.max_retries + 1):
            try:
                with self._gate:
                    response = self._client.post(self.cfg.endpoint, json=payload)
                response.raise_for_status()
                body = response.json()
                return str(body["choices"][0]["message"]["content"])
            except (httpx.HTTPError, KeyError, IndexError, ValueError) as exc:
                last_error = exc
                if attempt < self.cfg.max_retries and self.cfg.retry_backoff > 0:
                    time.sleep(min(2.0, self.cfg.retry_backoff * 2**attempt))
        raise TransportError(f"chat completion failed: {last_error}")

    def close(self) -> None:
        self._client.close()


@dataclass
class _MockRule:
    pattern: re.Pattern
    replies: list[str]
    cursor: int = 0


@dataclass
class MockChatClient:
    """Scripted client: first rule whose pattern matches the rendered
    conversation answers; its replies are consumed in order and the last one
    repeats.  Deterministic and call-counted."""

    rules: list[_MockRule] = field(default_factory=list)
    default_reply: str | None = None
    calls: int = 0
    history: list[tuple[str, str]] = field(default_factory=list)

    @classmethod
    def from_rules(
        cls, rules: list[tuple[str, list[str] | str]], default_reply: str | None = None
    ) -> "MockChatClient":
        compiled = [
            _MockRule(
                pattern=re.compile(pat, re.DOTALL),
                replies=[replies] if isinstance(replies, str) else list(replies),
            )
            for pat, replies in rules
        ]
        return cls(rules=compiled, default_reply=default_reply)

    @classmethod
    def from_file(cls, path: str | Path) -> "MockChatClient":
        doc = json.loads(Path(path).read_text())
        return cls.from_rules(
            [(r["pattern"], r["replies"]) for r in doc.get("rules", [])],
            default_reply=doc.get("default_reply"),
        )

    def complete(self, messages: list[ChatMessage], temperature: float = 0.0) -> str:
        self.calls += 1
        rendered = "\n".join(f"{m.role}: {m.content}" for m in messages)
        for rule in self.rules:
            m = rule.pattern.search(rendered)
            if m:
                reply = rule.replies[min(rule.cursor, len(rule.replies) - 1)]
                rule.cursor += 1
                # {group1}, {group2}, ... splice in the pattern's captures
                for i, captured in enumerate(m.groups()):
                    reply = reply.replace(f"{{group{i + 1}}}", captured or "")
                self.history.append((rendered, reply))
                return reply
        if self.default_reply is not None:
            self.history.append((rendered, self.default_reply))
            return self.default_reply
        raise MockScriptError(
            f"no scripted reply matches prompt ending: ...{rendered[-200:]!r}"
        )
