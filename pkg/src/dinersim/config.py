"""Environment configuration: constants, presets, file loading, hashing.

A config file is a JSON object with an optional ``"preset"`` key ("normal" or
"hard") plus any field overrides, e.g.::

    {"preset": "hard", "max_steps": 400, "arrival_prob": 0.2}

Overrides are applied on top of the preset. Unknown keys are rejected.
"""

import dataclasses
import hashlib
import json
from dataclasses import dataclass


class ConfigError(ValueError):
    """Raised for an invalid configuration; message names the field."""


@dataclass
class EnvConfig:
    # restaurant layout
    table_sizes: tuple = (2, 2, 4, 4, 6, 6)
    queue_capacity: int = 7
    max_lives: int = 5
    # customer flow
    arrival_prob: float = 0.10
    group_size_min: int = 1
    group_size_max: int = 6
    # patience: hearts and per-step decay by waiting situation
    happiness_max: float = 5.0
    decay_queue: float = 0.02
    decay_await_order: float = 0.02
    decay_await_food: float = 0.01
    decay_await_bill: float = 0.01
    # timed stages
    cook_steps: int = 15
    eat_steps: int = 20
    # reward schedule
    r_seat: float = 2.0
    r_take_order: float = 1.0
    r_submit: float = 1.0
    r_pickup: float = 1.0
    r_serve: float = 2.0
    r_bill_base: float = 10.0
    r_bill_per_heart: float = 2.0
    r_clean: float = 1.0
    r_return: float = 1.0
    r_illegal: float = -1.0
    r_leave: float = -100.0
    # episode bookkeeping; gamma is stored for discounted diagnostics only,
    # scores are undiscounted sums
    gamma: float = 0.99
    max_steps: int = 2000

    def validate(self) -> None:
        if len(self.table_sizes) != 6:
            raise ConfigError("table_sizes must have 6 entries")
        if any(int(s) < 1 for s in self.table_sizes):
            raise ConfigError("table_sizes entries must be >= 1")
        if self.queue_capacity < 1:
            raise ConfigError("queue_capacity must be >= 1")
        if self.max_lives < 1:
            raise ConfigError("max_lives must be >= 1")
        if not 0.0 <= self.arrival_prob <= 1.0:
            raise ConfigError("arrival_prob must be in [0, 1]")
        if not 1 <= self.group_size_min <= self.group_size_max:
            raise ConfigError("group_size_min must be in [1, group_size_max]")
        if self.group_size_max > max(self.table_sizes):
            raise ConfigError("group_size_max exceeds the largest table")
        if self.happiness_max <= 0:
            raise ConfigError("happiness_max must be > 0")
        for name in ("decay_queue", "decay_await_order", "decay_await_food",
                     "decay_await_bill"):
            if getattr(self, name) < 0:
                raise ConfigError(f"{name} must be >= 0")
        if self.cook_steps < 1:
            raise ConfigError("cook_steps must be >= 1")
        if self.eat_steps < 1:
            raise ConfigError("eat_steps must be >= 1")
        if not 0.0 < self.gamma <= 1.0:
            raise ConfigError("gamma must be in (0, 1]")
        if self.max_steps < 1:
            raise ConfigError("max_steps must be >= 1")

    def replace(self, **overrides) -> "EnvConfig":
        cfg = dataclasses.replace(self, **overrides)
        cfg.validate()
        return cfg

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["table_sizes"] = list(self.table_sizes)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "EnvConfig":
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ConfigError(f"unknown config field: {sorted(unknown)[0]}")
        d = dict(d)
        if "table_sizes" in d:
            d["table_sizes"] = tuple(int(s) for s in d["table_sizes"])
        cfg = cls(**d)
        cfg.validate()
        return cfg

    @classmethod
    def preset(cls, name: str) -> "EnvConfig":
        if name not in PRESETS:
            raise ConfigError(f"unknown preset '{name}' (choose from {sorted(PRESETS)})")
        return cls().replace(**PRESETS[name])

    @classmethod
    def from_file(cls, path) -> "EnvConfig":
        with open(path, "r", encoding="utf-8") as fh:
            try:
                raw = json.load(fh)
            except json.JSONDecodeError as exc:
                raise ConfigError(f"config file is not valid JSON: {exc}") from exc
        if not isinstance(raw, dict):
            raise ConfigError("config file must contain a JSON object")
        preset = raw.pop("preset", "normal")
        cfg = cls.preset(preset)
        if raw:
            cfg = cls.from_dict({**cfg.to_dict(), **raw})
        return cfg

    def to_file(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_dict(), fh, indent=2, sort_keys=True)
            fh.write("\n")

    def hash(self) -> str:
        """Short digest of the resolved config, recorded in datasets/reports."""
        blob = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()[:12]


# The "hard" preset raises customer pressure; it is the default for all
# recorded experiments. "normal" is the gentler baseline.
PRESETS = {
    "normal": {},
    "hard": {"arrival_prob": 0.14, "decay_queue": 0.03},
}

DEFAULT_PRESET = "hard"


def default_config() -> EnvConfig:
    return EnvConfig.preset(DEFAULT_PRESET)
