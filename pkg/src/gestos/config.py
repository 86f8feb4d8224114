"""Engine configuration (JSON file, every key optional)."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

from gestos.encoder import EncoderParams
from gestos.keyframes import ExtractorParams
from gestos.reasoner import LLMConfig


@dataclass
class EngineConfig:
    conf_threshold: float = 0.7
    motion_threshold: float = 0.05
    group_ratio: float = 0.5
    move_small: float = 0.02
    move_large: float = 0.10
    weights: tuple[float, float, float] = (0.6, 0.3, 0.1)
    freshness_window: float = 5.0
    memory_k: int = 3
    embedding_dim: int = 256
    gesture_timeout: float = 1.0
    dispatch_timeout: float = 5.0
    state_timeout: float = 2.0
    llm: LLMConfig = field(default_factory=LLMConfig)

    @property
    def extractor(self) -> ExtractorParams:
        return ExtractorParams(self.conf_threshold, self.motion_threshold, self.group_ratio)

    @property
    def encoder(self) -> EncoderParams:
        return EncoderParams(self.group_ratio, self.move_small, self.move_large)

    @classmethod
    def from_dict(cls, raw: dict) -> "EngineConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(raw) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        values = dict(raw)
        if "weights" in values:
            weights = values["weights"]
            if isinstance(weights, dict):
                weights = (weights["match"], weights["availability"], weights["context"])
            values["weights"] = tuple(float(w) for w in weights)
        if "llm" in values:
            values["llm"] = LLMConfig(**values["llm"])
        return cls(**values)

    def to_dict(self) -> dict:
        out = asdict(self)
        out["weights"] = list(self.weights)
        return out


def load_config(path: str | Path | None) -> EngineConfig:
    if path is None:
        return EngineConfig()
    return EngineConfig.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))
