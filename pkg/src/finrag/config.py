"""Application configuration with a fixed precedence:
CLI flag > environment variable > config file > built-in default.

Credentials come from the environment and are excluded from every serialized
or printed form of the config.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field, fields
from pathlib import Path

from .embedding import DEFAULT_BATCH_SIZE, DEFAULT_DIM, DEFAULT_EMBED_MODEL, EmbedderProfile, make_embedder
from .gateway import (
    DEFAULT_BASE_MODEL,
    DEFAULT_ENHANCED_MODEL,
    ChatCompletionsClient,
    ModelProfile,
    ScriptedCompleter,
)

ENV_LLM_API_BASE = "LLM_API_BASE"
ENV_LLM_API_KEY = "LLM_API_KEY"
ENV_EMBED_API_BASE = "EMBED_API_BASE"
ENV_EMBED_API_KEY = "EMBED_API_KEY"

_SECRET_FIELDS = ("llm_api_key", "embed_api_key")


@dataclass
class AppConfig:
    dataset_path: str = ""
    records_path: str = ""
    index_path: str = ""
    embedder_kind: str = "local-hash"
    embed_model: str = DEFAULT_EMBED_MODEL
    dim: int = DEFAULT_DIM
    normalize: bool = True
    batch_size: int = DEFAULT_BATCH_SIZE
    base_model: str = DEFAULT_BASE_MODEL
    enhanced_model: str = DEFAULT_ENHANCED_MODEL
    completer: str = "scripted"  # "scripted" or "remote"
    k: int = 5
    context_budget: int = 1024
    bind: str = "127.0.0.1:8080"
    llm_api_base: str = ""
    llm_api_key: str = field(default="", repr=False)
    embed_api_base: str = ""
    embed_api_key: str = field(default="", repr=False)

    def __post_init__(self):
        if self.k < 1:
            raise ValueError("k must be >= 1")
        if self.context_budget < 1:
            raise ValueError("context budget must be >= 1")

    def to_dict(self) -> dict:
        """Loggable form; credentials are never included."""
        return {
            f.name: getattr(self, f.name)
            for f in fields(self)
            if f.name not in _SECRET_FIELDS
        }

    def embedder_profile(self) -> EmbedderProfile:
        return EmbedderProfile(
            kind=self.embedder_kind,
            model_name=self.embed_model,
            dim=self.dim,
            normalize=self.normalize,
            batch_size=self.batch_size,
        )

    def make_embedder(self):
        return make_embedder(
            self.embedder_profile(),
            base_url=self.embed_api_base,
            api_key=self.embed_api_key,
        )

    def model_profile(self, which: str = "base") -> ModelProfile:
        name = self.base_model if which == "base" else self.enhanced_model
        return ModelProfile(name=name, base_url=self.llm_api_base)

    def make_completer(self, which: str = "base"):
        if self.completer == "scripted":
            return ScriptedCompleter()
        return ChatCompletionsClient(self.model_profile(which), api_key=self.llm_api_key)


_ENV_MAP = {
    "llm_api_base": ENV_LLM_API_BASE,
    "llm_api_key": ENV_LLM_API_KEY,
    "embed_api_base": ENV_EMBED_API_BASE,
    "embed_api_key": ENV_EMBED_API_KEY,
}

_INT_FIELDS = {"dim", "batch_size", "k", "context_budget"}
_BOOL_FIELDS = {"normalize"}


def _coerce(name: str, value):
    if name in _INT_FIELDS:
        return int(value)
    if name in _BOOL_FIELDS:
        if isinstance(value, bool):
            return value
        return str(value).strip().lower() in ("1", "true", "yes", "on")
    return value


def load_config(
    config_path: str | Path | None = None,
    env: dict | None = None,
    overrides: dict | None = None,
) -> AppConfig:
    """Assemble an AppConfig applying the declared precedence order."""
    environ = os.environ if env is None else env
    values: dict = {}

    if config_path:
        raw = json.loads(Path(config_path).read_text(encoding="utf-8"))
        if not isinstance(raw, dict):
            raise ValueError("config file must contain a JSON object")
        known = {f.name for f in fields(AppConfig)}
        for name, value in raw.items():
            if name in known:
                values[name] = _coerce(name, value)

    for name, env_name in _ENV_MAP.items():
        if environ.get(env_name):
            values[name] = environ[env_name]

    for name, value in (overrides or {}).items():
        if value is not None:
            values[name] = _coerce(name, value)

    return AppConfig(**values)
