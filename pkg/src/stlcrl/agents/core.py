"""Shared machinery for the Lagrangian actor-critic agents."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..nn import Adam, Mlp, soft_update
from .lagrangian import ProjectedScalar

PRETRAIN = "pretrain"
FINETUNE = "finetune"


@dataclass
class AgentConfig:
    gamma: float = 0.99
    xi: float = 0.01
    lr: float = 3e-4
    kappa_lr: float = 1e-5
    kappa0: float = 1.0
    alpha0: float = 1.0
    l_stl: float = 0.0
    target_entropy: float = -2.0
    hidden: tuple = (256, 256)
    double_q: bool = True
    ou_p1: float = 0.15
    ou_p2: float = 0.0
    ou_p3: float = 0.3
    target_noise: float = 0.2
    noise_clip: float = 0.5
    policy_delay: int = 2


class LagrangianAgent:
    """Base class: reward and STL-reward critic ensembles with targets, and kappa.

    Subclasses register networks in ``self.nets``/``self.opts`` so that
    checkpointing and soft updates are generic.
    """

    algorithm = ""

    def __init__(self, obs_dim: int, act_dim: int, config: AgentConfig, rng: np.random.Generator, n_critics: int):
        self.obs_dim = obs_dim
        self.act_dim = act_dim
        self.config = config
        self.nets: dict[str, Mlp] = {}
        self.opts: dict[str, Adam] = {}
        self.targets: dict[str, Mlp] = {}
        sizes = [obs_dim + act_dim, *config.hidden, 1]
        for head in ("r", "s"):
            for i in range(n_critics):
                name = f"q{head}{i}"
                self._register(name, Mlp(sizes, rng=rng), target=True)
        self.kappa = ProjectedScalar(config.kappa0, config.kappa_lr)
        self.n_updates = 0

    def _register(self, name: str, net: Mlp, target: bool) -> None:
        self.nets[name] = net
        self.opts[name] = Adam(net.params, self.config.lr)
        if target:
            self.targets[name] = net.copy()

    def critics(self, head: str, target: bool = False) -> list[Mlp]:
        src = self.targets if target else self.nets
        return [src[k] for k in sorted(src) if k.startswith(f"q{head}")]

    # -- critic helpers -------------------------------------------------

    @staticmethod
    def min_q(nets: list[Mlp], x: np.ndarray) -> np.ndarray:
        q = nets[0].forward(x)[:, 0]
        for net in nets[1:]:
            q = np.minimum(q, net.forward(x)[:, 0])
        return q

    def q_and_action_grad(self, nets: list[Mlp], x: np.ndarray):
        """``min_i Q_i(x)`` and its gradient w.r.t. the action part of ``x``."""
        qs = [net.forward(x, record=True)[:, 0] for net in nets]
        if len(nets) == 1:
            _, g = nets[0].backward(np.ones((len(x), 1)), param_grads=False)
            return qs[0], g[:, self.obs_dim:]
        pick = np.argmin(np.stack(qs), axis=0)
        q = np.min(np.stack(qs), axis=0)
        grad = np.zeros((len(x), self.act_dim))
        for i, net in enumerate(nets):
            _, g = net.backward((pick == i).astype(float)[:, None], param_grads=False)
            grad += g[:, self.obs_dim:]
        return q, grad

    def regress(self, names: list[str], x: np.ndarray, y: np.ndarray) -> float:
        """One Adam step per critic on the mean squared TD error."""
        losses = []
        for name in names:
            net = self.nets[name]
            diff = net.forward(x, record=True)[:, 0] - y
            losses.append(float(np.mean(diff * diff)))
            grads, _ = net.backward((2.0 * diff / len(y))[:, None])
            self.opts[name].step(grads)
        return float(np.mean(losses))

    def critic_names(self, head: str) -> list[str]:
        return [k for k in sorted(self.nets) if k.startswith(f"q{head}")]

    def soft_update_targets(self, names=None) -> None:
        for name in names if names is not None else self.targets:
            soft_update(self.targets[name], self.nets[name], self.config.xi)

    # -- checkpointing --------------------------------------------------

    def scalars(self) -> dict[str, ProjectedScalar]:
        return {"kappa": self.kappa}

    def state_dict(self) -> tuple[dict[str, np.ndarray], dict]:
        arrays: dict[str, np.ndarray] = {}
        for name, net in self.nets.items():
            for i, p in enumerate(net.params):
                arrays[f"net.{name}.{i}"] = p
            opt = self.opts[name]
            for i, (m, v) in enumerate(zip(opt.m, opt.v)):
                arrays[f"opt.{name}.m{i}"] = m
                arrays[f"opt.{name}.v{i}"] = v
        for name, net in self.targets.items():
            for i, p in enumerate(net.params):
                arrays[f"target.{name}.{i}"] = p
        steps = {name: opt.t for name, opt in self.opts.items()}
        for name, sc in self.scalars().items():
            arrays[f"scalar.{name}"] = sc._p
            arrays[f"scalar.{name}.m"] = sc.opt.m[0]
            arrays[f"scalar.{name}.v"] = sc.opt.v[0]
            steps[f"scalar.{name}"] = sc.opt.t
        meta = {
            "algorithm": self.algorithm,
            "obs_dim": self.obs_dim,
            "act_dim": self.act_dim,
            "hidden": list(self.config.hidden),
            "opt_steps": steps,
            "n_updates": self.n_updates,
        }
        return arrays, meta

    def load_state_dict(self, arrays: dict[str, np.ndarray], meta: dict) -> None:
        if meta["algorithm"] != self.algorithm:
            raise ValueError(f"checkpoint is for {meta['algorithm']!r}, agent is {self.algorithm!r}")
        if (meta["obs_dim"], meta["act_dim"]) != (self.obs_dim, self.act_dim):
            raise ValueError(
                f"checkpoint dimensions (obs {meta['obs_dim']}, act {meta['act_dim']}) do not "
                f"match agent (obs {self.obs_dim}, act {self.act_dim})"
            )
        for name, net in self.nets.items():
            for i, p in enumerate(net.params):
                p[...] = arrays[f"net.{name}.{i}"]
            opt = self.opts[name]
            for i, (m, v) in enumerate(zip(opt.m, opt.v)):
                m[...] = arrays[f"opt.{name}.m{i}"]
                v[...] = arrays[f"opt.{name}.v{i}"]
            opt.t = meta["opt_steps"][name]
        for name, net in self.targets.items():
            for i, p in enumerate(net.params):
                p[...] = arrays[f"target.{name}.{i}"]
        for name, sc in self.scalars().items():
            sc._p[...] = arrays[f"scalar.{name}"]
            sc.opt.m[0][...] = arrays[f"scalar.{name}.m"]
            sc.opt.v[0][...] = arrays[f"scalar.{name}.v"]
            sc.opt.t = meta["opt_steps"][f"scalar.{name}"]
        self.n_updates = meta["n_updates"]
