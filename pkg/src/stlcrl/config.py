"""Run configuration: a flat ``key = value`` text file.

Blank lines and ``#`` comments are ignored. Every key maps to a field of
:class:`RunConfig`; defaults are the benchmark hyperparameters. ``formula``
and ``l_stl`` have no default.
"""
from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from pathlib import Path

from .agents.core import AgentConfig
from .robot_env import RobotConfig
from .stl import FragmentInfo, parse, validate_fragment


class ConfigError(ValueError):
    pass


_REQUIRED = object()


@dataclass
class RunConfig:
    formula: str = _REQUIRED  # type: ignore[assignment]
    l_stl: float = _REQUIRED  # type: ignore[assignment]
    algorithm: str = "sac"
    beta: float = 100.0
    normalize_stl_reward: bool = True
    K: int = 1000
    K_pre: int = 0
    total_steps: int = 600_000
    gamma: float = 0.99
    xi: float = 0.01
    lr: float = 3e-4
    kappa_lr: float = 1e-5
    buffer_size: int = 100_000
    batch_size: int = 64
    H0: float = -2.0
    alpha0: float = 1.0
    kappa0: float = 1.0
    hidden: tuple = (256, 256)
    double_q: bool = True
    preprocess: bool = True
    seeds: tuple = (0,)
    eval_interval: int = 10_000
    eval_episodes: int = 100
    checkpoint_interval: int = 0
    out_dir: str = "runs"
    delta: float = 0.1
    noise_scale: float = 0.01
    ou_p1: float = 0.15
    ou_p2: float = 0.0
    ou_p3: float = 0.3
    target_noise: float = 0.2
    noise_clip: float = 0.5
    policy_delay: int = 2

    def __post_init__(self):
        self.validate()

    def validate(self) -> None:
        for f in dataclasses.fields(self):
            if getattr(self, f.name) is _REQUIRED:
                raise ConfigError(f"missing required key {f.name!r}")
        if self.algorithm not in ("sac", "ddpg", "td3"):
            raise ConfigError(f"algorithm must be sac, ddpg or td3, got {self.algorithm!r}")
        for key in ("beta", "lr", "kappa_lr", "xi"):
            if not getattr(self, key) > 0:
                raise ConfigError(f"{key} must be positive")
        if not 0 <= self.gamma < 1:
            raise ConfigError("gamma must lie in [0, 1)")
        if self.xi > 1:
            raise ConfigError("xi must not exceed 1")
        if self.eval_episodes < 1:
            raise ConfigError("eval_episodes must be at least 1")
        for key in ("batch_size", "buffer_size", "total_steps", "eval_interval", "policy_delay"):
            if getattr(self, key) < 1:
                raise ConfigError(f"{key} must be at least 1")
        if self.K_pre < 0 or self.checkpoint_interval < 0:
            raise ConfigError("K_pre and checkpoint_interval must be nonnegative")
        try:
            info = self.fragment()
        except ValueError as exc:
            raise ConfigError(f"formula: {exc}") from exc
        if self.K < info.tau:
            raise ConfigError(f"K={self.K} is shorter than tau={info.tau}")
        if self.K + 2 < info.horizon + 1:
            raise ConfigError(
                f"episodes of K={self.K} steps produce {self.K + 2} states; the formula "
                f"needs {info.horizon + 1}"
            )
        if self.preprocess and not info.flag_eligible:
            raise ConfigError(
                "formula is not flag-eligible (some sub-formula does not end at tau-1); "
                "set preprocess = false"
            )

    def fragment(self) -> FragmentInfo:
        return validate_fragment(parse(self.formula, 3))

    def robot_config(self) -> RobotConfig:
        return RobotConfig(delta=self.delta, noise_scale=self.noise_scale)

    def agent_config(self) -> AgentConfig:
        return AgentConfig(
            gamma=self.gamma, xi=self.xi, lr=self.lr, kappa_lr=self.kappa_lr,
            kappa0=self.kappa0, alpha0=self.alpha0, l_stl=self.l_stl,
            target_entropy=self.H0, hidden=tuple(self.hidden), double_q=self.double_q,
            ou_p1=self.ou_p1, ou_p2=self.ou_p2, ou_p3=self.ou_p3,
            target_noise=self.target_noise, noise_clip=self.noise_clip,
            policy_delay=self.policy_delay,
        )

    def replace(self, **changes) -> "RunConfig":
        return dataclasses.replace(self, **changes)

    def to_text(self) -> str:
        lines = []
        for f in dataclasses.fields(self):
            v = getattr(self, f.name)
            if isinstance(v, tuple):
                v = ",".join(str(x) for x in v)
            elif isinstance(v, bool):
                v = "true" if v else "false"
            lines.append(f"{f.name} = {v}")
        return "\n".join(lines) + "\n"


def _convert(key: str, typ: str, raw: str):
    try:
        if typ == "bool":
            low = raw.lower()
            if low not in ("true", "false", "1", "0", "yes", "no", "on", "off"):
                raise ValueError(raw)
            return low in ("true", "1", "yes", "on")
        if typ == "int":
            return int(float(raw)) if float(raw).is_integer() else int(raw)
        if typ == "float":
            return float(raw)
        if typ == "tuple":
            return tuple(int(x) for x in raw.replace(" ", "").split(",") if x)
        return raw
    except ValueError:
        raise ConfigError(f"bad value for {key!r}: {raw!r}") from None


def parse_config(text: str) -> RunConfig:
    types = {f.name: f.type for f in dataclasses.fields(RunConfig)}
    values = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value'")
        key, raw = (s.strip() for s in line.split("=", 1))
        if key not in types:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        values[key] = _convert(key, types[key], raw)
    return RunConfig(**values)


def load_config(path) -> RunConfig:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return parse_config(text)
