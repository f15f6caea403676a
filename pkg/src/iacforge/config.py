"""Tool configuration: ``iacforge.toml`` overlaid by ``IACFORGE_*`` environment variables."""

from __future__ import annotations

import os
import sys
from dataclasses import dataclass, field, fields, replace
from pathlib import Path

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .errors import ConfigError
from .external import DEFAULT_PLAN_TIMEOUT, OpaCli, TerraformCli
from .oracles import Oracles

DEFAULT_CONFIG_PATH = "iacforge.toml"
CONFIG_ENV = "IACFORGE_CONFIG"

# field name -> environment variable
ENV_OVERRIDES = {
    "backend": "IACFORGE_BACKEND",
    "terraform_bin": "IACFORGE_TERRAFORM_BIN",
    "opa_bin": "IACFORGE_OPA_BIN",
    "plugin_dir": "IACFORGE_PLUGIN_DIR",
    "workers": "IACFORGE_WORKERS",
    "timeout_secs": "IACFORGE_TIMEOUT_SECS",
    "max_turns": "IACFORGE_MAX_TURNS",
    "llm_url": "IACFORGE_LLM_URL",
    "llm_model": "IACFORGE_LLM_MODEL",
    "temperature": "IACFORGE_TEMPERATURE",
    "max_tokens": "IACFORGE_MAX_TOKENS",
    "dataset_dir": "IACFORGE_DATASET_DIR",
}


@dataclass(frozen=True)
class ToolConfig:
    backend: str = "builtin"
    terraform_bin: str | None = None
    opa_bin: str | None = None
    plugin_dir: str | None = None
    workers: int = field(default_factory=lambda: os.cpu_count() or 1)
    timeout_secs: float = DEFAULT_PLAN_TIMEOUT
    max_turns: int = 5
    seed: int = 0
    llm_url: str | None = None
    llm_model: str = "default"
    temperature: float = 0.2
    max_tokens: int = 4096
    dataset_dir: str | None = None
    port: int = 8000

    def __post_init__(self) -> None:
        if self.backend not in ("builtin", "external"):
            raise ConfigError(f"backend must be 'builtin' or 'external', not {self.backend!r}")
        if self.workers < 1:
            raise ConfigError("workers must be at least 1")
        if self.max_turns < 1:
            raise ConfigError("max_turns must be at least 1")
        if self.timeout_secs <= 0:
            raise ConfigError("timeout_secs must be positive")

    def with_overrides(self, **values) -> ToolConfig:
        return replace(self, **{k: v for k, v in values.items() if v is not None})

    def build_oracles(self) -> Oracles:
        """Raises BackendUnavailable when the external backend cannot resolve its binaries."""
        if self.backend == "builtin":
            return Oracles()
        terraform = TerraformCli.from_env(
            self.terraform_bin, timeout=self.timeout_secs, workers=self.workers, plugin_dir=self.plugin_dir
        )
        opa = None
        if self.opa_bin or os.environ.get("IACFORGE_OPA_BIN"):
            opa = OpaCli.from_env(self.opa_bin, timeout=self.timeout_secs, workers=self.workers)
        return Oracles("external", terraform, opa)


def _coerce(name: str, raw) -> object:
    kind = {f.name: f.type for f in fields(ToolConfig)}[name]
    try:
        if "int" in kind and "str" not in kind:
            return int(raw)
        if "float" in kind:
            return float(raw)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid value for {name}: {raw!r}") from exc
    return str(raw)


def load_config(path: str | Path | None = None, env: dict | None = None) -> ToolConfig:
    """Read the TOML file (missing default file is fine), then apply env overrides."""
    env = os.environ if env is None else env
    explicit = path is not None or CONFIG_ENV in env
    path = Path(path or env.get(CONFIG_ENV) or DEFAULT_CONFIG_PATH)
    values: dict = {}
    if path.exists():
        try:
            with open(path, "rb") as fh:
                doc = tomllib.load(fh)
        except tomllib.TOMLDecodeError as exc:
            raise ConfigError(f"{path}: {exc}") from exc
        doc = doc.get("iacforge", doc)
        known = {f.name for f in fields(ToolConfig)}
        unknown = sorted(set(doc) - known)
        if unknown:
            raise ConfigError(f"{path}: unknown keys {', '.join(unknown)}")
        values.update({k: _coerce(k, v) for k, v in doc.items()})
    elif explicit:
        raise ConfigError(f"config file {path} not found")
    for name, var in ENV_OVERRIDES.items():
        if var in env and env[var] != "":
            values[name] = _coerce(name, env[var])
    return ToolConfig(**values)
