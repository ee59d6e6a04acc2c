"""Run configuration and bundled data resolution.

Load levels are arrival-rate presets living in configuration (the bundled
``default_config.json``, overridable per run with ``--config``), never in
code.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

from .llm.client import LlmConfig
from .roadgraph import RoadGraph, load_map

BUNDLED_MAPS = {
    "sf-midtown-42": "sf_midtown_42.json",
    "sf-grid-large": "sf_grid_large.json",
}
DEFAULT_MAP = "sf-midtown-42"


class ConfigError(ValueError):
    """Raised for unusable run configuration."""


@dataclass
class RunConfig:
    agents: int = 3
    horizon: int = 60
    mc_samples: int = 200
    t_h: int = 10
    test_scenarios: int = 20
    seed: int = 0
    workers: int = 1
    load_rates: dict[str, float] = field(
        default_factory=lambda: {"low": 0.05, "medium": 0.15, "high": 0.30}
    )
    llm: LlmConfig = field(default_factory=LlmConfig)

    def rate_for(self, load_level: str) -> float:
        try:
            return float(self.load_rates[load_level])
        except KeyError:
            raise ConfigError(
                f"no arrival rate configured for load level {load_level!r}; "
                f"known levels: {sorted(self.load_rates)}"
            ) from None


def _data_text(relative: str) -> str:
    return (
        resources.files("taxiroll").joinpath("data").joinpath(relative).read_text()
    )


def load_config(path: str | Path | None = None) -> RunConfig:
    """Bundled defaults, overridden by the optional user config file."""
    doc = json.loads(_data_text("default_config.json"))
    if path is not None:
        try:
            user = json.loads(Path(path).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        llm_over = user.pop("llm", {})
        doc.update(user)
        doc.setdefault("llm", {}).update(llm_over)
    llm_doc = {k: v for k, v in doc.pop("llm", {}).items() if v not in ("", None)}
    known = {k for k in RunConfig.__dataclass_fields__ if k != "llm"}
    unknown = set(doc) - known
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    try:
        llm = LlmConfig(**llm_doc)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad llm config: {exc}") from exc
    return RunConfig(llm=llm, **doc)


def resolve_map(name_or_path: str | None) -> RoadGraph:
    """A filesystem path, or a bundled map id (default sf-midtown-42)."""
    spec = name_or_path or DEFAULT_MAP
    if spec in BUNDLED_MAPS:
        return load_map(_data_text(f"maps/{BUNDLED_MAPS[spec]}"))
    path = Path(spec)
    if path.exists():
        return load_map(path.read_bytes())
    raise ConfigError(
        f"map {spec!r} is neither a file nor a bundled map id "
        f"{sorted(BUNDLED_MAPS)}"
    )


def bundled_mock_script(name: str) -> str:
    """Resolve a bundled mock reply table by name (e.g. 'demo')."""
    return _data_text(f"mock_scripts/{name}.json")
