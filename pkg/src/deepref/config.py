"""JSON run configuration binding the per-module configs together.

Unknown keys are rejected at every level so typos never silently fall back to
defaults. CLI flags override file values.
"""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field

from .codec import SearchConfig
from .errors import ConfigError
from .flow import ExtractionConfig
from .generator import ModelConfig
from .training import TrainConfig

DEFAULT_Q_SET = (8, 16, 32, 64)


@dataclass
class RunConfig:
    input_path: str | None = None
    input_format: str | None = None  # "yuv" | "y4m" | None = by extension
    width: int | None = None
    height: int | None = None
    output_dir: str = "out"
    seed: int = 0
    q_set: list[int] = field(default_factory=lambda: list(DEFAULT_Q_SET))
    extraction: ExtractionConfig = field(default_factory=ExtractionConfig)
    model: ModelConfig = field(default_factory=ModelConfig)
    train: TrainConfig = field(default_factory=TrainConfig)
    search: SearchConfig = field(default_factory=SearchConfig)

    def __post_init__(self):
        if not self.q_set or any(int(q) < 1 for q in self.q_set):
            raise ConfigError(f"q_set must be non-empty positive integers, got {self.q_set}")
        self.q_set = [int(q) for q in self.q_set]


def _build_section(cls, doc: dict, label: str):
    if not isinstance(doc, dict):
        raise ConfigError(f"{label}: expected an object, got {type(doc).__name__}")
    known = {f.name for f in dataclasses.fields(cls)}
    unknown = set(doc) - known
    if unknown:
        raise ConfigError(f"{label}: unknown keys {sorted(unknown)}")
    try:
        return cls(**doc)
    except TypeError as exc:
        raise ConfigError(f"{label}: {exc}") from exc


_SECTIONS = {
    "extraction": ExtractionConfig,
    "model": ModelConfig,
    "train": TrainConfig,
    "search": SearchConfig,
}
_SCALARS = {"input_path", "input_format", "width", "height", "output_dir", "seed", "q_set"}


def load_run_config(path) -> RunConfig:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise ConfigError(f"{path}: top level must be a JSON object")
    unknown = set(doc) - _SCALARS - set(_SECTIONS)
    if unknown:
        raise ConfigError(f"{path}: unknown top-level keys {sorted(unknown)}")

    kwargs = {k: doc[k] for k in _SCALARS if k in doc}
    for name, cls in _SECTIONS.items():
        section = dict(doc.get(name, {}))
        if name == "train" and "model" in section:
            raise ConfigError("train.model is derived from the model section; do not set it")
        # the top-level seed feeds every stage that was not given its own seed
        if "seed" in doc:
            if name == "model" and "seed" not in section:
                section["seed"] = doc["seed"]
            if name == "train" and "shuffle_seed" not in section:
                section["shuffle_seed"] = doc["seed"]
        kwargs[name] = _build_section(cls, section, name)
    cfg = RunConfig(**kwargs)
    cfg.train.model = cfg.model
    return cfg
