"""Restaurant-service benchmark: a deterministic seedable MDP with a scripted
demonstrator, plus an imitation-learning stack built around per-action factor
graphs with a learned reweighting layer, and a behaviour-cloning baseline.
"""

from . import actions
from .config import DEFAULT_PRESET, PRESETS, ConfigError, EnvConfig, default_config
from .env import Env, EnvError, StepResult, decode_state, new_env, state_ranges
from .expert import ExpertConfig, ExpertPolicy, expert_action

__version__ = "0.1.0"

__all__ = [
    "actions",
    "ConfigError",
    "DEFAULT_PRESET",
    "default_config",
    "decode_state",
    "Env",
    "EnvConfig",
    "EnvError",
    "ExpertConfig",
    "ExpertPolicy",
    "expert_action",
    "new_env",
    "PRESETS",
    "state_ranges",
    "StepResult",
    "__version__",
]
