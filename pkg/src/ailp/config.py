"""Run configuration shared by the CLI and the service.

Values come from defaults, an optional JSON config file, environment
variables, and command-line flags, in increasing precedence.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, fields
from datetime import datetime
from pathlib import Path

from ailp.util import parse_utc

ENV_LLM_API_KEY = "AILP_LLM_API_KEY"
ENV_LLM_BASE_URL = "AILP_LLM_BASE_URL"
ENV_LLM_MODEL = "AILP_LLM_MODEL"
ENV_GITHUB_TOKEN = "AILP_GITHUB_TOKEN"
ENV_CACHE_DIR = "AILP_CACHE_DIR"
ENV_PORT = "AILP_PORT"

DEFAULT_LLM_BASE_URL = "https://api.deepseek.com/v1"
DEFAULT_LLM_MODEL = "deepseek-chat"
DEFAULT_PORT = 8377
DEFAULT_CUTOFF = "2024-05-27T00:00:00+00:00"


def default_cache_dir() -> Path:
    return Path(os.environ.get(ENV_CACHE_DIR, "~/.cache/ailinkpreviewer")).expanduser()


@dataclass
class RunConfig:
    fixture_dir: Path | None = None
    cache_dir: Path | None = None
    output_dir: Path = Path(".")
    min_label_words: int = 8
    page_budget_words: int = 2000
    strategies: tuple[str, ...] = ("contextual", "noncontextual", "metadata")
    cutoff_date: datetime = parse_utc(DEFAULT_CUTOFF)
    github_concurrency: int = 4
    fetch_concurrency: int = 8
    llm_concurrency: int = 2
    mock_llm: bool = False
    port: int = DEFAULT_PORT
    llm_api_key: str = ""
    llm_base_url: str = DEFAULT_LLM_BASE_URL
    llm_model: str = DEFAULT_LLM_MODEL
    github_token: str = ""

    def __post_init__(self) -> None:
        if self.min_label_words < 1:
            raise ValueError("min_label_words must be >= 1")
        if self.cache_dir is None:
            self.cache_dir = default_cache_dir()

    @property
    def pr_fixture_dir(self) -> Path | None:
        return None if self.fixture_dir is None else self.fixture_dir / "prs"

    @property
    def page_fixture_dir(self) -> Path | None:
        return None if self.fixture_dir is None else self.fixture_dir / "pages"

    @classmethod
    def load(cls, config_file: str | Path | None = None, **overrides) -> "RunConfig":
        values: dict = {}
        if config_file is not None:
            raw = json.loads(Path(config_file).read_text(encoding="utf-8"))
            known = {f.name for f in fields(cls)}
            unknown = set(raw) - known
            if unknown:
                raise ValueError(f"unknown config keys: {sorted(unknown)}")
            values.update(raw)
        env = {
            "llm_api_key": os.environ.get(ENV_LLM_API_KEY),
            "llm_base_url": os.environ.get(ENV_LLM_BASE_URL),
            "llm_model": os.environ.get(ENV_LLM_MODEL),
            "github_token": os.environ.get(ENV_GITHUB_TOKEN),
            "cache_dir": os.environ.get(ENV_CACHE_DIR),
            "port": os.environ.get(ENV_PORT),
        }
        values.update({k: v for k, v in env.items() if v})
        values.update({k: v for k, v in overrides.items() if v is not None})
        for key in ("fixture_dir", "cache_dir", "output_dir"):
            if values.get(key) is not None:
                values[key] = Path(values[key]).expanduser()
        if isinstance(values.get("cutoff_date"), str):
            values["cutoff_date"] = parse_utc(values["cutoff_date"])
        if "port" in values:
            values["port"] = int(values["port"])
        if "strategies" in values:
            values["strategies"] = tuple(values["strategies"])
        return cls(**values)
