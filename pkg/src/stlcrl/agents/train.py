"""Two-phase training loop: STL-only pre-training, then Lagrangian fine-tuning."""
from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..config import RunConfig
from ..evaluate import evaluate
from ..nn import save_checkpoint
from ..robot_env import TwoWheeledRobot
from ..tau_env import TauEnv
from . import make_agent
from .buffer import ReplayBuffer
from .core import FINETUNE, PRETRAIN

log = logging.getLogger(__name__)

METRIC_COLUMNS = (
    "step", "episode", "sum_reward", "sum_stl_reward", "kappa", "alpha",
    "actor_loss", "critic_r_loss", "critic_s_loss",
)
EVAL_COLUMNS = (
    "step", "mean_return", "std_return", "mean_stl_return", "std_stl_return", "success_rate",
)


class TrainingDiverged(RuntimeError):
    pass


@dataclass
class TrainResult:
    agent: object
    out_dir: Path
    metrics: list[dict] = field(default_factory=list)
    evals: list[dict] = field(default_factory=list)


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v)
    return str(v)


class _CsvLog:
    def __init__(self, path: Path, columns):
        self.columns = columns
        self.fh = open(path, "w", newline="")
        self.writer = csv.writer(self.fh)
        self.writer.writerow(columns)

    def write(self, row: dict) -> None:
        self.writer.writerow([_fmt(row[c]) for c in self.columns])
        self.fh.flush()

    def close(self) -> None:
        self.fh.close()


def _mean_or_none(values):
    return float(np.mean(values)) if values else None


def checkpoint_agent(agent, path, step: int, rngs: dict | None = None) -> None:
    """Save the agent plus, when given, the bit-generator state of each stream."""
    arrays, meta = agent.state_dict()
    meta["step"] = step
    if rngs:
        meta["rng"] = {name: g.bit_generator.state for name, g in rngs.items()}
    save_checkpoint(path, arrays, meta)


def train(cfg: RunConfig, seed: int, out_dir, on_update=None) -> TrainResult:
    """Train one agent for ``cfg.total_steps`` environment steps.

    ``on_update(agent, phase, losses)`` is called after every learning step.
    All randomness derives from ``seed`` through independent child streams.
    Writes ``metrics.csv`` (one row per finished episode), ``eval.csv`` and
    checkpoints into ``out_dir``.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    streams = np.random.SeedSequence(seed).spawn(5)
    rng_init, rng_env, rng_act, rng_learn, rng_p0 = (np.random.default_rng(s) for s in streams)
    rngs = {"env": rng_env, "act": rng_act, "learn": rng_learn, "p0": rng_p0}
    eval_seed = int(np.random.SeedSequence(seed).generate_state(1)[0])

    info = cfg.fragment()
    plant = TwoWheeledRobot(cfg.robot_config())
    env = TauEnv(plant, info, beta=cfg.beta, normalize_reward=cfg.normalize_stl_reward,
                 preprocess=cfg.preprocess, n_envs=1)
    agent = make_agent(cfg.algorithm, env.obs_dim, env.action_dim, cfg.agent_config(), rng_init)
    buffer = ReplayBuffer(cfg.buffer_size, env.obs_dim, env.action_dim)
    result = TrainResult(agent=agent, out_dir=out_dir)

    metrics_log = _CsvLog(out_dir / "metrics.csv", METRIC_COLUMNS)
    eval_log = _CsvLog(out_dir / "eval.csv", EVAL_COLUMNS)

    def run_eval(step):
        rep = evaluate(agent, plant, info, K=cfg.K, gamma=cfg.gamma, episodes=cfg.eval_episodes,
                       seed=eval_seed, beta=cfg.beta, normalize_reward=cfg.normalize_stl_reward,
                       preprocess=cfg.preprocess)
        row = {"step": step, **rep.summary()}
        eval_log.write(row)
        result.evals.append(row)
        log.info("step %d: eval success %.2f stl return %.3f", step, rep.success_rate, rep.mean_stl_return)

    def diverged(step, what):
        path = out_dir / "diverged.npz"
        try:
            checkpoint_agent(agent, path, step, rngs)
        except Exception:  # the dump is best effort; the diagnostic matters more
            path = None
        raise TrainingDiverged(f"non-finite {what} at step {step}; state dumped to {path}")

    c = 0
    episode = 0
    try:
        while c < cfg.total_steps:
            obs = env.reset(rng_env)
            agent.reset_noise()
            sums = [0.0, 0.0]
            losses = {k: [] for k in ("actor_loss", "critic_r_loss", "critic_s_loss")}
            for _ in range(cfg.K):
                a = agent.act(obs[0], rng_act)
                obs2, r, s, _ = env.step(a, rng_env)
                buffer.push(obs[0], a, obs2[0], r[0], s[0])
                sums[0] += float(r[0])
                sums[1] += float(s[0])
                obs = obs2
                if len(buffer) >= cfg.batch_size:
                    phase = PRETRAIN if c < cfg.K_pre else FINETUNE
                    batch = buffer.sample(cfg.batch_size, rng_learn)
                    init_obs = None
                    if phase == FINETUNE:
                        init_obs = env.initial_observation(plant.reset(rng_p0, cfg.batch_size))
                    out = agent.update(batch, init_obs, phase, rng_learn)
                    for k, v in out.items():
                        if v is not None:
                            if not np.isfinite(v):
                                diverged(c, k)
                            losses[k].append(v)
                    if on_update is not None:
                        on_update(agent, phase, out)
                c += 1
                if cfg.checkpoint_interval and c % cfg.checkpoint_interval == 0:
                    checkpoint_agent(agent, out_dir / f"ckpt_{c:08d}.npz", c, rngs)
                if c % cfg.eval_interval == 0:
                    run_eval(c)
                if c >= cfg.total_steps:
                    break
            if not all(np.isfinite(sums)):
                diverged(c, "episode return")
            sc = agent.scalars()
            row = {
                "step": c,
                "episode": episode,
                "sum_reward": sums[0],
                "sum_stl_reward": sums[1],
                "kappa": sc["kappa"].value,
                "alpha": sc["alpha"].value if "alpha" in sc else 0.0,
                **{k: _mean_or_none(v) for k, v in losses.items()},
            }
            metrics_log.write(row)
            result.metrics.append(row)
            episode += 1
        checkpoint_agent(agent, out_dir / "final.npz", c, rngs)
    finally:
        metrics_log.close()
        eval_log.close()
    return result
