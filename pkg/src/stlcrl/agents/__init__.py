from __future__ import annotations

import numpy as np

from .buffer import Batch, ReplayBuffer
from .core import FINETUNE, PRETRAIN, AgentConfig, LagrangianAgent
from .ddpg import DdpgLagrangian
from .lagrangian import OuNoise, ProjectedScalar, alpha_update, kappa_update
from .sac import SacLagrangian

ALGORITHMS = ("sac", "ddpg", "td3")


def make_agent(algorithm: str, obs_dim: int, act_dim: int, config: AgentConfig,
               rng: np.random.Generator) -> LagrangianAgent:
    if algorithm == "sac":
        return SacLagrangian(obs_dim, act_dim, config, rng)
    if algorithm in ("ddpg", "td3"):
        return DdpgLagrangian(obs_dim, act_dim, config, rng, td3=algorithm == "td3")
    raise ValueError(f"unknown algorithm {algorithm!r}; choose from {ALGORITHMS}")


__all__ = [
    "ALGORITHMS", "AgentConfig", "Batch", "DdpgLagrangian", "FINETUNE", "LagrangianAgent",
    "OuNoise", "PRETRAIN", "ProjectedScalar", "ReplayBuffer", "SacLagrangian",
    "alpha_update", "kappa_update", "make_agent",
]
