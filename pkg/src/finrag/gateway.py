"""Chat-completion gateway: remote OpenAI-compatible client, a deterministic
scripted completer for offline runs, and the shared token estimator.

The scripted completer answers strictly from the context block of the prompt,
which makes end-to-end retrieval behavior testable without any network.
"""

from __future__ import annotations

import json
import math
import re
import time
from dataclasses import dataclass

import requests

from .errors import UpstreamRejected, UpstreamTimeout, UpstreamUnavailable

CHARS_PER_TOKEN = 4

INSUFFICIENT_CONTEXT = "INSUFFICIENT CONTEXT"

DEFAULT_BASE_MODEL = "gpt-3.5-turbo"
DEFAULT_ENHANCED_MODEL = "gpt-3.5-turbo-1106"


def estimate_tokens(text: str) -> int:
    """Deterministic token estimate: ceil(len/4), 0 for empty text.

    This is the single estimator used for passage caps and context budgets.
    It is intentionally tokenizer-free; swap it behind this function if a
    real tokenizer is ever needed.
    """
    if not text:
        return 0
    return math.ceil(len(text) / CHARS_PER_TOKEN)


@dataclass(frozen=True)
class ModelProfile:
    """Connection settings for one upstream chat model."""

    name: str = DEFAULT_BASE_MODEL
    base_url: str = ""
    temperature: float = 0.0
    timeout: float = 30.0
    max_retries: int = 2

    def __post_init__(self):
        if self.temperature < 0:
            raise ValueError("temperature must be >= 0")
        if self.timeout <= 0:
            raise ValueError("timeout must be positive")
        if self.max_retries < 0:
            raise ValueError("max_retries must be >= 0")


@dataclass
class ChatExchange:
    """One request/response round trip with its measured latency."""

    messages: list[dict]
    answer: str
    latency_ms: float
    usage: tuple[int, int] | None = None  # (prompt tokens, completion tokens)
    retries: int = 0

    def __post_init__(self):
        if not self.messages:
            raise ValueError("messages must be non-empty")
        if self.latency_ms < 0:
            raise ValueError("latency must be >= 0")


def complete(
    profile: ModelProfile,
    messages: list[dict],
    api_key: str = "",
    retry_backoff: float = 0.25,
) -> ChatExchange:
    """POST the messages to {base}/chat/completions and return the first choice.

    The request body is serialized once and the identical bytes are sent on
    every retry. Transient failures (connection errors, timeouts, 5xx) are
    retried up to profile.max_retries with exponential backoff; 4xx responses
    are rejected immediately.
    """
    if not messages:
        raise UpstreamRejected("empty message list")
    if not profile.base_url:
        raise UpstreamRejected("no chat endpoint configured")
    url = profile.base_url.rstrip("/") + "/chat/completions"
    body = json.dumps(
        {"model": profile.name, "messages": messages, "temperature": profile.temperature}
    ).encode("utf-8")
    headers = {"Content-Type": "application/json"}
    if api_key:
        headers["Authorization"] = f"Bearer {api_key}"

    started = time.perf_counter()
    last_error: Exception | None = None
    timed_out = False
    for attempt in range(profile.max_retries + 1):
        if attempt:
            time.sleep(retry_backoff * (2 ** (attempt - 1)))
        try:
            response = requests.post(url, data=body, headers=headers, timeout=profile.timeout)
        except requests.Timeout as exc:
            last_error, timed_out = exc, True
            continue
        except requests.RequestException as exc:
            last_error, timed_out = exc, False
            continue
        if 400 <= response.status_code < 500:
            raise UpstreamRejected(f"upstream returned {response.status_code}: {response.text[:200]}")
        if response.status_code != 200:
            last_error, timed_out = UpstreamUnavailable(
                f"upstream returned {response.status_code}"
            ), False
            continue
        try:
            payload = response.json()
            answer = payload["choices"][0]["message"]["content"]
        except (ValueError, KeyError, IndexError, TypeError) as exc:
            raise UpstreamUnavailable(f"malformed upstream response: {exc}") from exc
        usage = None
        raw_usage = payload.get("usage") or {}
        if "prompt_tokens" in raw_usage and "completion_tokens" in raw_usage:
            usage = (int(raw_usage["prompt_tokens"]), int(raw_usage["completion_tokens"]))
        latency_ms = (time.perf_counter() - started) * 1000.0
        return ChatExchange(
            messages=list(messages),
            answer=answer if isinstance(answer, str) else str(answer),
            latency_ms=latency_ms,
            usage=usage,
            retries=attempt,
        )
    if timed_out:
        raise UpstreamTimeout(f"chat endpoint timed out after {profile.max_retries + 1} attempts")
    raise UpstreamUnavailable(
        f"chat endpoint unavailable after {profile.max_retries + 1} attempts: {last_error}"
    )


class ChatCompletionsClient:
    """Completer bound to one model profile and credential."""

    def __init__(self, profile: ModelProfile, api_key: str = "", retry_backoff: float = 0.25):
        self.profile = profile
        self._api_key = api_key
        self._retry_backoff = retry_backoff

    def complete(self, messages: list[dict]) -> ChatExchange:
        return complete(
            self.profile, messages, api_key=self._api_key, retry_backoff=self._retry_backoff
        )


# Passage sentences look like:
#   "For the quarter ending 2023-03-31, Apple Inc. (AAPL) reported Revenue of
#    100000000 USD; Assets of 5 USD."
_PASSAGE_LINE_RE = re.compile(
    r"^For the quarter ending (?P<period>\d{4}-\d{2}-\d{2}), "
    r"(?P<company>.+?) \((?P<ticker>[A-Z.\-]{1,6})\) reported (?P<facts>.+?)\.?$"
)
_FACT_RE = re.compile(r"(?P<indicator>.+?) of (?P<amount>[-+]?[0-9][0-9.eE+\-]*) USD$")


def _split_prompt(messages: list[dict]) -> tuple[str, str]:
    """Return (context block, question) from the last user message."""
    content = ""
    for message in messages:
        if message.get("role") == "user":
            content = str(message.get("content", ""))
    if "Context:\n" in content and "\n\nQuestion:" in content:
        context = content.split("Context:\n", 1)[1].split("\n\nQuestion:", 1)[0]
        question = content.split("\n\nQuestion:", 1)[1].strip()
        return context, question
    return "", content.strip()


def scripted_answer(messages: list[dict]) -> str:
    """Rule-based answer derived only from the prompt's context block.

    Scans context lines of the passage template for one whose period,
    company-or-ticker, and an indicator all appear in the question, and
    returns that fact's amount as plain text. Longer indicator names are
    matched first so nested names (e.g. one indicator containing another)
    resolve deterministically. No match yields "INSUFFICIENT CONTEXT".
    """
    context, question = _split_prompt(messages)
    question_lower = question.lower()
    for line in context.splitlines():
        match = _PASSAGE_LINE_RE.match(line.strip())
        if not match:
            continue
        if match.group("period") not in question:
            continue
        company = match.group("company").lower()
        ticker = match.group("ticker").lower()
        if company not in question_lower and ticker not in question_lower:
            continue
        facts = []
        for part in match.group("facts").split("; "):
            fact = _FACT_RE.match(part.strip())
            if fact:
                facts.append((fact.group("indicator"), fact.group("amount")))
        for indicator, amount in sorted(facts, key=lambda f: len(f[0]), reverse=True):
            if indicator.lower() in question_lower:
                return amount
    return INSUFFICIENT_CONTEXT


class ScriptedCompleter:
    """Deterministic offline completer; a pure function of the messages."""

    def complete(self, messages: list[dict]) -> ChatExchange:
        if not messages:
            raise UpstreamRejected("empty message list")
        started = time.perf_counter()
        answer = scripted_answer(messages)
        latency_ms = (time.perf_counter() - started) * 1000.0
        return ChatExchange(messages=list(messages), answer=answer, latency_ms=latency_ms)
