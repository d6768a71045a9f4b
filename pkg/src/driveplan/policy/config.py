"""Architecture configuration for the interactive driving policy."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, fields
from pathlib import Path


class PolicyConfigError(Exception):
    pass


@dataclass
class PolicyConfig:
    node_dim: int = 32           # message-passing width
    embed_dim: int = 64          # per-module output width
    mpn_iterations: int = 2
    mix: float = 0.5             # damped fixed-point coefficient on node updates
    intent_heads: int = 16
    hidden_dim: int = 64         # recurrent state width
    head_hidden: int = 64
    log_std_init: float = -2.0
    log_std_min: float = -5.0
    log_std_max: float = 2.0
    use_interaction: bool = True  # cross-agent graph edges and cross-agent attention
    use_map: bool = True

    @property
    def gru_input(self) -> int:
        return 3 * self.embed_dim

    @property
    def head_dim(self) -> int:
        return self.embed_dim // self.intent_heads

    def validate(self):
        if self.embed_dim % self.intent_heads != 0:
            raise PolicyConfigError(
                f"embed_dim {self.embed_dim} not divisible by {self.intent_heads} heads")
        if not (0.0 < self.mix <= 1.0):
            raise PolicyConfigError(f"mix must be in (0, 1], got {self.mix}")
        if self.mpn_iterations < 1:
            raise PolicyConfigError("mpn_iterations must be >= 1")
        if self.log_std_min >= self.log_std_max:
            raise PolicyConfigError("log_std bounds inverted")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "PolicyConfig":
        known = {f.name for f in fields(cls)}
        extra = set(d) - known
        if extra:
            raise PolicyConfigError(f"unknown policy config key {sorted(extra)[0]!r}")
        cfg = cls(**d)
        cfg.validate()
        return cfg

    def save(self, path):
        Path(path).write_text(json.dumps(self.to_dict(), indent=2) + "\n", encoding="utf-8")

    @classmethod
    def load(cls, path) -> "PolicyConfig":
        return cls.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))
