"""Gateway configuration: an INI file with documented sections (docs/config.md).

Everything has a working default so the gateway runs with no config at all;
upstream targets are the one thing that must be declared to relay traffic.
"""

from __future__ import annotations

import configparser
from dataclasses import dataclass, field
from pathlib import Path

from .errors import PrivgateError
from .rules import DEFAULT_MAX_TEXT_BYTES
from .upstream import UpstreamTarget

DEFAULT_PORT = 8787
DEFAULT_MAX_FILE_BYTES = 5 * 1024 * 1024


class ConfigError(PrivgateError):
    pass


@dataclass(frozen=True)
class LlmBackendConfig:
    base_url: str
    model: str
    path: str = "/v1/chat/completions"
    timeout: float = 10.0


@dataclass(frozen=True)
class AppConfig:
    host: str = "127.0.0.1"
    port: int = DEFAULT_PORT
    allow_remote: bool = False
    store_dir: str | None = None
    memory_sessions: bool = False
    purge_after_days: float | None = None
    max_text_bytes: int = DEFAULT_MAX_TEXT_BYTES
    max_file_bytes: int = DEFAULT_MAX_FILE_BYTES
    rules_path: str | None = None
    detection_backend: str = "rules"  # rules | llm
    smokescreen_generator: str = "template"  # template | llm
    smokescreen_compose: bool = True  # build surrogates from the redacted text
    smokescreen_categories: tuple[str, ...] = ("Medical", "MentalHealth", "Financial", "Travel")
    llm_backend: LlmBackendConfig | None = None
    upstreams: dict[str, UpstreamTarget] = field(default_factory=dict)

    def upstream(self, name: str) -> UpstreamTarget:
        try:
            return self.upstreams[name]
        except KeyError:
            raise ConfigError(f"no upstream named {name!r} is configured") from None


def load_config(path: str | Path | None = None) -> AppConfig:
    if path is None:
        return AppConfig()
    parser = configparser.ConfigParser()
    read = parser.read(str(path), encoding="utf-8")
    if not read:
        raise ConfigError(f"cannot read config file {path}")

    def get(section: str, key: str, default):
        if not parser.has_option(section, key):
            return default
        raw = parser.get(section, key).strip()
        if raw == "":
            return default
        if isinstance(default, bool):
            if raw.lower() not in ("true", "false"):
                raise ConfigError(f"[{section}] {key} must be true|false")
            return raw.lower() == "true"
        if isinstance(default, int) and not isinstance(default, bool):
            return int(raw)
        if isinstance(default, float):
            return float(raw)
        return raw

    gw = "gateway"
    purge_raw = get(gw, "purge_after_days", "")
    categories = get("smokescreen", "categories", "Medical, MentalHealth, Financial, Travel")

    llm_backend = None
    if parser.has_section("llm_backend"):
        llm_backend = LlmBackendConfig(
            base_url=get("llm_backend", "base_url", "http://127.0.0.1:11434"),
            model=get("llm_backend", "model", "local-model"),
            path=get("llm_backend", "path", "/v1/chat/completions"),
            timeout=get("llm_backend", "timeout", 10.0),
        )

    upstreams: dict[str, UpstreamTarget] = {}
    for section in parser.sections():
        if not section.startswith("upstream."):
            continue
        name = section[len("upstream."):]
        if not name:
            raise ConfigError("upstream section needs a name: [upstream.<name>]")
        if not parser.has_option(section, "base_url"):
            raise ConfigError(f"[{section}] requires base_url")
        upstreams[name] = UpstreamTarget(
            name=name,
            base_url=parser.get(section, "base_url").strip(),
            model=get(section, "model", "default-model"),
            path=get(section, "path", "/v1/chat/completions"),
            authorization=get(section, "authorization", ""),
            timeout=get(section, "timeout", 30.0),
        )

    return AppConfig(
        host=get(gw, "host", "127.0.0.1"),
        port=get(gw, "port", DEFAULT_PORT),
        allow_remote=get(gw, "allow_remote", False),
        store_dir=get(gw, "store_dir", "") or None,
        memory_sessions=get(gw, "memory_sessions", False),
        purge_after_days=float(purge_raw) if purge_raw else None,
        max_text_bytes=get(gw, "max_text_bytes", DEFAULT_MAX_TEXT_BYTES),
        max_file_bytes=get(gw, "max_file_bytes", DEFAULT_MAX_FILE_BYTES),
        rules_path=get("rules", "path", "") or None,
        detection_backend=get("detection", "backend", "rules"),
        smokescreen_generator=get("smokescreen", "mode", "template"),
        smokescreen_compose=get("smokescreen", "compose_with_redaction", True),
        smokescreen_categories=tuple(
            c.strip() for c in categories.split(",") if c.strip()
        ),
        llm_backend=llm_backend,
        upstreams=upstreams,
    )
