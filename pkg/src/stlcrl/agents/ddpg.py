from __future__ import annotations

import numpy as np

from ..nn import Mlp
from .core import FINETUNE, AgentConfig, LagrangianAgent
from .lagrangian import OuNoise, kappa_update


class DdpgLagrangian(LagrangianAgent):
    """DDPG-Lagrangian; with ``td3=True`` the TD3-Lagrangian variant.

    TD3 adds twin critics per head (clipped double-Q targets), target policy
    smoothing, and delayed actor/target updates. As in the original TD3, the
    actor follows the first critic of each head.
    """

    def __init__(self, obs_dim: int, act_dim: int, config: AgentConfig, rng: np.random.Generator, td3: bool = False):
        super().__init__(obs_dim, act_dim, config, rng, n_critics=2 if td3 else 1)
        self.td3 = td3
        self.algorithm = "td3" if td3 else "ddpg"
        self._register("actor", Mlp([obs_dim, *config.hidden, act_dim], out_act="tanh", rng=rng), target=True)
        self.actor = self.nets["actor"]
        self.noise = OuNoise(act_dim, config.ou_p1, config.ou_p2, config.ou_p3)

    def reset_noise(self) -> None:
        self.noise.reset()

    def act(self, obs, rng: np.random.Generator, deterministic: bool = False) -> np.ndarray:
        obs = np.asarray(obs, dtype=float)
        a = self.actor.forward(np.atleast_2d(obs))
        if not deterministic:
            a = np.clip(a + self.noise.sample(rng), -1.0, 1.0)
        return a[0] if obs.ndim == 1 else a

    def policy_action(self, obs) -> np.ndarray:
        return self.actor.forward(obs)

    def _policy_critics(self, head: str):
        return self.critics(head)[:1]

    def target_action(self, next_obs, rng) -> np.ndarray:
        a2 = self.targets["actor"].forward(next_obs)
        if self.td3:
            c = self.config
            noise = np.clip(c.target_noise * rng.standard_normal(a2.shape), -c.noise_clip, c.noise_clip)
            a2 = np.clip(a2 + noise, -1.0, 1.0)
        return a2

    def critic_update(self, batch, rng):
        gamma = self.config.gamma
        x2 = np.concatenate([batch.next_obs, self.target_action(batch.next_obs, rng)], axis=1)
        y_r = batch.rew + gamma * self.min_q(self.critics("r", target=True), x2)
        y_s = batch.stl + gamma * self.min_q(self.critics("s", target=True), x2)
        x = np.concatenate([batch.obs, batch.act], axis=1)
        return (
            self.regress(self.critic_names("r"), x, y_r),
            self.regress(self.critic_names("s"), x, y_s),
        )

    def actor_update(self, batch, phase: str) -> float:
        n = len(batch)
        a = self.actor.forward(batch.obs, record=True)
        x = np.concatenate([batch.obs, a], axis=1)
        q_s, g_s = self.q_and_action_grad(self._policy_critics("s"), x)
        if phase == FINETUNE:
            kappa = self.kappa.value
            q_r, g_r = self.q_and_action_grad(self._policy_critics("r"), x)
            q, dq_da = q_r + kappa * q_s, g_r + kappa * g_s
        else:
            q, dq_da = q_s, g_s
        grads, _ = self.actor.backward(-dq_da / n)
        self.opts["actor"].step(grads)
        return float(np.mean(-q))

    def kappa_step(self, init_obs) -> float:
        a0 = self.actor.forward(init_obs)
        q0 = self.min_q(self._policy_critics("s"), np.concatenate([init_obs, a0], axis=1))
        return kappa_update(self.kappa, q0, self.config.l_stl)

    def update(self, batch, init_obs, phase: str, rng: np.random.Generator) -> dict:
        loss_r, loss_s = self.critic_update(batch, rng)
        delay = self.config.policy_delay if self.td3 else 1
        loss_a = None
        self.n_updates += 1
        if self.n_updates % delay == 0:
            loss_a = self.actor_update(batch, phase)
            self.soft_update_targets()
        if phase == FINETUNE:
            self.kappa_step(init_obs)
        return {"actor_loss": loss_a, "critic_r_loss": loss_r, "critic_s_loss": loss_s}
