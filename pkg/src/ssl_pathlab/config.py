"""Run configuration: JSON files plus flat --set key=value overrides.

Every run writes its fully resolved configuration next to its outputs, and
re-running from that file reproduces the run bit-for-bit. Unknown keys fail
fast with the offending key named.
"""

from __future__ import annotations

import dataclasses
import json
import os
from dataclasses import dataclass, field
from pathlib import Path

from .agent import SACConfig
from .envs import ENV_NAMES, EnvConfig

SETUPS = ("vanilla", "frameskip", "caps", "fscaps")
FRAME_SKIP = 16
SEED_ENV_VAR = "SSL_PATHLAB_SEED"


class ConfigError(ValueError):
    """Invalid or unknown configuration key/value."""


@dataclass
class RunConfig:
    env: str = "proposed"
    setup: str = "vanilla"
    seed: int = 1
    total_env_steps: int = 300_000
    eval_every: int = 100_000
    eval_episodes: int = 20
    final_eval_episodes: int = 200
    output_dir: str = "runs/latest"
    env_config: EnvConfig = field(default_factory=EnvConfig)
    sac: SACConfig = field(default_factory=SACConfig)

    def __post_init__(self):
        if self.env not in ENV_NAMES:
            raise ConfigError(f"env must be one of {ENV_NAMES}, "
                              f"got {self.env!r}")
        if self.setup not in SETUPS:
            raise ConfigError(f"setup must be one of {SETUPS}, "
                              f"got {self.setup!r}")
        if self.total_env_steps < 1:
            raise ConfigError("total_env_steps must be positive")

    @property
    def uses_frame_skip(self) -> bool:
        return self.setup in ("frameskip", "fscaps")

    @property
    def uses_caps(self) -> bool:
        return self.setup in ("caps", "fscaps")

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["sac"]["hidden_sizes"] = list(self.sac.hidden_sizes)
        return d


def default_seed() -> int:
    """Seed fallback: the SSL_PATHLAB_SEED environment variable, else 1."""
    raw = os.environ.get(SEED_ENV_VAR)
    if raw is None:
        return 1
    try:
        return int(raw)
    except ValueError:
        raise ConfigError(f"{SEED_ENV_VAR} must be an integer, got {raw!r}")


def _coerce(raw: str):
    try:
        return json.loads(raw)
    except json.JSONDecodeError:
        return raw


def _build_nested(cls, data: dict, path: str):
    names = {f.name for f in dataclasses.fields(cls)}
    for key in data:
        if key not in names:
            raise ConfigError(f"unknown config key {path}{key!r}")
    try:
        return cls(**data)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid {path.rstrip('.') or 'config'}: {exc}")


def run_config_from_dict(data: dict) -> RunConfig:
    """Build a RunConfig from a plain dict, rejecting unknown keys."""
    data = dict(data)
    env_cfg = _build_nested(EnvConfig, data.pop("env_config", {}),
                            "env_config.")
    sac_data = dict(data.pop("sac", {}))
    if "hidden_sizes" in sac_data:
        sac_data["hidden_sizes"] = tuple(sac_data["hidden_sizes"])
    top_names = {f.name for f in dataclasses.fields(RunConfig)}
    for key in data:
        if key not in top_names:
            raise ConfigError(f"unknown config key {key!r}")

    setup = data.get("setup", "vanilla")
    if setup in ("caps", "fscaps"):
        if sac_data.get("alpha_trainable") is True:
            raise ConfigError(
                "sac.alpha_trainable must be false for caps/fscaps setups")
        sac_data.setdefault("caps_enabled", True)
        sac_data["alpha_trainable"] = False
        if not sac_data["caps_enabled"]:
            raise ConfigError(
                "sac.caps_enabled must be true for caps/fscaps setups")
    else:
        if sac_data.get("caps_enabled") is True:
            raise ConfigError(
                f"sac.caps_enabled=true conflicts with setup={setup!r}")
        sac_data["caps_enabled"] = False
    sac_cfg = _build_nested(SACConfig, sac_data, "sac.")
    try:
        return RunConfig(env_config=env_cfg, sac=sac_cfg, **data)
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc))


def load_run_config(config_file=None, overrides=()) -> RunConfig:
    """Merge a JSON config file with --set key=value overrides."""
    data: dict = {}
    if config_file is not None:
        with open(config_file) as fh:
            data = json.load(fh)
        if not isinstance(data, dict):
            raise ConfigError("config file must contain a JSON object")
    for item in overrides:
        if "=" not in item:
            raise ConfigError(f"--set expects key=value, got {item!r}")
        key, raw = item.split("=", 1)
        value = _coerce(raw)
        parts = key.split(".")
        node = data
        for part in parts[:-1]:
            node = node.setdefault(part, {})
            if not isinstance(node, dict):
                raise ConfigError(f"cannot override through scalar at {part!r}")
        node[parts[-1]] = value
    if "seed" not in data:
        data["seed"] = default_seed()
    return run_config_from_dict(data)


def write_resolved_config(cfg: RunConfig, path) -> Path:
    out = Path(path)
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(json.dumps(cfg.to_dict(), indent=2, sort_keys=True) + "\n")
    return out
