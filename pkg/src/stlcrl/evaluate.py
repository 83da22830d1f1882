"""Policy evaluation: discounted returns, STL returns and success rate."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .stl import FragmentInfo, eval_boolean
from .tau_env import TauEnv, trajectory_robustness


@dataclass
class EvalReport:
    n: int
    mean_return: float
    std_return: float
    mean_stl_return: float
    std_stl_return: float
    successes: int
    robustness: np.ndarray
    traces: np.ndarray | None = None

    @property
    def success_rate(self) -> float:
        return self.successes / self.n

    def summary(self) -> dict:
        return {
            "episodes": self.n,
            "mean_return": self.mean_return,
            "std_return": self.std_return,
            "mean_stl_return": self.mean_stl_return,
            "std_stl_return": self.std_stl_return,
            "success_rate": self.success_rate,
        }


def rollout(agent, env: TauEnv, K: int, gamma: float, rng: np.random.Generator):
    """Run ``env.n_envs`` deterministic episodes of ``K`` steps in lockstep.

    Returns discounted sums of task and STL rewards and the state traces,
    which have ``K + 2`` states: the initial state, ``K`` transitions and one
    closing transition so that the window ending at step ``K`` is complete.
    """
    obs = env.reset(rng)
    traces = [env.window[:, -1].copy()]
    ret = np.zeros(env.n_envs)
    stl_ret = np.zeros(env.n_envs)
    disc = 1.0
    for k in range(K + 1):
        a = agent.policy_action(obs)
        obs, r, s, x_next = env.step(a, rng)
        traces.append(x_next)
        if k < K:
            ret += disc * r
            stl_ret += disc * s
            disc *= gamma
    return ret, stl_ret, np.stack(traces, axis=1)


def evaluate(agent, plant, info: FragmentInfo, *, K: int, gamma: float, episodes: int, seed: int,
             beta: float = 100.0, normalize_reward: bool = True, preprocess: bool = True,
             keep_traces: bool = False, cross_check: bool = False) -> EvalReport:
    """Evaluate the deterministic policy head on ``episodes`` fresh initial states.

    Success is ``trajectory_robustness >= 0``. With ``cross_check`` each
    verdict is re-derived from the pointwise Boolean evaluator and a mismatch
    on a nonzero robustness raises.
    """
    env = TauEnv(plant, info, beta=beta, normalize_reward=normalize_reward,
                 preprocess=preprocess, n_envs=episodes)
    rng = np.random.default_rng(seed)
    ret, stl_ret, traces = rollout(agent, env, K, gamma, rng)
    rho = np.asarray(trajectory_robustness(traces, info), dtype=float).reshape(episodes)
    success = rho >= 0
    if cross_check:
        for i in range(episodes):
            sat = eval_boolean(traces[i], 0, info.formula)
            if rho[i] != 0 and sat != success[i]:
                raise AssertionError(f"episode {i}: robustness {rho[i]} disagrees with Boolean verdict {sat}")
    return EvalReport(
        n=episodes,
        mean_return=float(np.mean(ret)),
        std_return=float(np.std(ret)),
        mean_stl_return=float(np.mean(stl_ret)),
        std_stl_return=float(np.std(stl_ret)),
        successes=int(np.sum(success)),
        robustness=rho,
        traces=traces if keep_traces else None,
    )
