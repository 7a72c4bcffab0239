"""Engine configuration: one declarative document, environment-overridable.

Config files are JSON objects whose keys match the dataclass fields below.
Any field can be overridden by an environment variable named
``CTAGENT_<FIELD>`` (upper-cased), e.g. ``CTAGENT_PORT=9000``. Parsing then
serializing a valid config is lossless.
"""
from __future__ import annotations

import dataclasses
import json
import os
from dataclasses import dataclass
from pathlib import Path

from .errors import ConfigInvalidError

ENV_PREFIX = "CTAGENT_"


@dataclass
class EngineConfig:
    # backends; with mock=True everything runs in-process and offline
    mock: bool = True
    planner_endpoint: str | None = None
    region_endpoint: str | None = None
    embedder_endpoint: str | None = None
    embedder_dim: int = 256

    # assets and weights
    template_dir: str | None = None
    params_path: str | None = None  # CTPW: MoE gate/experts + projection
    adapter_dir: str | None = None  # directory of CTLA files
    study_dir: str | None = None  # directory of CTFV files loaded at startup
    store_path: str | None = None  # CTES exemplar store
    history_path: str = "history.jsonl"
    fsync_history: bool = True

    # compression and retrieval
    K: int = 54
    M: int = 10
    retrieval_k: int = 3

    # fallback dimensions when no params file is given: weights are seeded
    # from `seed` and sized to (feature_dim -> feature_dim * d_prime_factor)
    seed: int = 0
    feature_dim: int = 1024
    d_prime_factor: int = 4
    moe_experts: int = 4
    moe_top_k: int = 2

    # service
    host: str = "127.0.0.1"
    port: int = 8420
    async_reports: bool = False

    def __post_init__(self):
        if self.K < 1 or self.M < 0:
            raise ConfigInvalidError(f"need K >= 1 and M >= 0, got K={self.K}, M={self.M}")
        if self.retrieval_k < 0:
            raise ConfigInvalidError(f"retrieval_k must be >= 0, got {self.retrieval_k}")
        if not self.mock:
            missing = [
                name
                for name, value in (
                    ("planner_endpoint", self.planner_endpoint),
                    ("region_endpoint", self.region_endpoint),
                )
                if not value
            ]
            if missing:
                raise ConfigInvalidError(f"mock=false requires endpoints: {', '.join(missing)}")

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, data: dict, apply_env: bool = True) -> "EngineConfig":
        known = {f.name: f for f in dataclasses.fields(cls)}
        unknown = set(data) - set(known)
        if unknown:
            raise ConfigInvalidError(f"unknown config keys: {sorted(unknown)}")
        merged = dict(data)
        if apply_env:
            for name, field in known.items():
                raw = os.environ.get(ENV_PREFIX + name.upper())
                if raw is not None:
                    merged[name] = _coerce(raw, field, name)
        try:
            return cls(**merged)
        except TypeError as exc:
            raise ConfigInvalidError(str(exc)) from exc

    @classmethod
    def from_file(cls, path: str | Path, apply_env: bool = True) -> "EngineConfig":
        try:
            data = json.loads(Path(path).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigInvalidError(f"cannot read config {path}: {exc}") from exc
        if not isinstance(data, dict):
            raise ConfigInvalidError(f"config {path} must be a JSON object")
        return cls.from_dict(data, apply_env=apply_env)

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n")


def _coerce(raw: str, field: dataclasses.Field, name: str):
    type_str = str(field.type)
    if "bool" in type_str:
        if raw.lower() in ("1", "true", "yes", "on"):
            return True
        if raw.lower() in ("0", "false", "no", "off"):
            return False
        raise ConfigInvalidError(f"{ENV_PREFIX}{name.upper()}={raw!r} is not a boolean")
    if "int" in type_str:
        try:
            return int(raw)
        except ValueError as exc:
            raise ConfigInvalidError(f"{ENV_PREFIX}{name.upper()}={raw!r} is not an integer") from exc
    return raw
