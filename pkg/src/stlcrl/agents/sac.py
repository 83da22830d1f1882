from __future__ import annotations

import numpy as np

from ..nn import Adam, GaussianPolicy
from .core import FINETUNE, PRETRAIN, AgentConfig, LagrangianAgent
from .lagrangian import ProjectedScalar, alpha_update, kappa_update


class SacLagrangian(LagrangianAgent):
    """SAC-Lagrangian with clipped double Q on both the reward and STL heads."""

    algorithm = "sac"

    def __init__(self, obs_dim: int, act_dim: int, config: AgentConfig, rng: np.random.Generator):
        super().__init__(obs_dim, act_dim, config, rng, n_critics=2 if config.double_q else 1)
        self.actor = GaussianPolicy(obs_dim, act_dim, config.hidden, rng=rng)
        self.nets["actor"] = self.actor.net
        self.opts["actor"] = Adam(self.actor.params, config.lr)
        self.alpha = ProjectedScalar(config.alpha0, config.lr)

    def scalars(self):
        return {"kappa": self.kappa, "alpha": self.alpha}

    def reset_noise(self) -> None:
        pass

    def act(self, obs, rng: np.random.Generator, deterministic: bool = False) -> np.ndarray:
        obs = np.asarray(obs, dtype=float)
        o = np.atleast_2d(obs)
        if deterministic:
            a = self.actor.mean_action(o)
        else:
            a, _ = self.actor.sample(o, rng.standard_normal((len(o), self.act_dim)))
        return a[0] if obs.ndim == 1 else a

    def policy_action(self, obs) -> np.ndarray:
        return self.actor.mean_action(obs)

    # -- updates ----------------------------------------------------------

    def critic_update(self, batch, rng, phase: str):
        alpha = self.alpha.value
        gamma = self.config.gamma
        a2, logp2 = self.actor.sample(batch.next_obs, rng.standard_normal((len(batch), self.act_dim)))
        x2 = np.concatenate([batch.next_obs, a2], axis=1)
        v_r = self.min_q(self.critics("r", target=True), x2) - alpha * logp2
        v_s = self.min_q(self.critics("s", target=True), x2)
        if phase == PRETRAIN:
            v_s = v_s - alpha * logp2
        x = np.concatenate([batch.obs, batch.act], axis=1)
        loss_r = self.regress(self.critic_names("r"), x, batch.rew + gamma * v_r)
        loss_s = self.regress(self.critic_names("s"), x, batch.stl + gamma * v_s)
        return loss_r, loss_s

    def actor_update(self, batch, rng, phase: str):
        """One step on ``E[alpha log pi - Q_s]`` (pre-train) or
        ``E[alpha log pi - (Q_r + kappa Q_s)]`` (fine-tune).

        Returns the loss and the sampled log-probabilities.
        """
        n = len(batch)
        alpha = self.alpha.value
        eps = rng.standard_normal((n, self.act_dim))
        a, logp = self.actor.sample(batch.obs, eps, record=True)
        x = np.concatenate([batch.obs, a], axis=1)
        q_s, g_s = self.q_and_action_grad(self.critics("s"), x)
        if phase == FINETUNE:
            kappa = self.kappa.value
            q_r, g_r = self.q_and_action_grad(self.critics("r"), x)
            q = q_r + kappa * q_s
            dq_da = g_r + kappa * g_s
        else:
            q, dq_da = q_s, g_s
        loss = float(np.mean(alpha * logp - q))
        grads = self.actor.backward(-dq_da / n, np.full(n, alpha / n))
        self.opts["actor"].step(grads)
        return loss, logp

    def kappa_step(self, init_obs, rng) -> float:
        a0, _ = self.actor.sample(init_obs, rng.standard_normal((len(init_obs), self.act_dim)))
        q0 = self.min_q(self.critics("s"), np.concatenate([init_obs, a0], axis=1))
        return kappa_update(self.kappa, q0, self.config.l_stl)

    def update(self, batch, init_obs, phase: str, rng: np.random.Generator) -> dict:
        loss_r, loss_s = self.critic_update(batch, rng, phase)
        loss_a, logp = self.actor_update(batch, rng, phase)
        alpha_update(self.alpha, logp, self.config.target_entropy)
        if phase == FINETUNE:
            self.kappa_step(init_obs, rng)
        self.soft_update_targets()
        self.n_updates += 1
        return {"actor_loss": loss_a, "critic_r_loss": loss_r, "critic_s_loss": loss_s}
