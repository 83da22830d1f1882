"""The tau-CMDP: sliding-window extended state, STL reward and trajectory robustness."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Protocol

import numpy as np

from . import preprocess as pp
from .stl import Formula, FragmentInfo, TraceTooShortError, horizon, robustness_signal


def init_extended(x0, tau: int) -> np.ndarray:
    """Window of ``tau`` copies of ``x0``; shape ``(tau, n)``."""
    if tau < 1:
        raise ValueError(f"tau must be at least 1, got {tau}")
    x0 = np.asarray(x0, dtype=float)
    return np.repeat(x0[None, :], tau, axis=0)


def shift(z, x_next) -> np.ndarray:
    """Drop the oldest state and append ``x_next``; returns a new window."""
    z = np.asarray(z, dtype=float)
    x_next = np.asarray(x_next, dtype=float)
    if x_next.shape != z.shape[1:]:
        raise ValueError(f"state shape {x_next.shape} does not match window rows {z.shape[1:]}")
    return np.concatenate([z[1:], x_next[None, :]], axis=0)


def indicator(y):
    """1 if ``y >= 0`` else 0 (elementwise for arrays)."""
    if np.ndim(y) == 0:
        return 1 if y >= 0 else 0
    return (np.asarray(y) >= 0).astype(np.int64)


def lse_min(values, beta: float) -> float:
    """Soft minimum ``-(1/beta) log sum exp(-beta y)``, computed in shifted form."""
    v = np.asarray(values, dtype=float)
    if v.size == 0:
        raise ValueError("lse_min of an empty set")
    if beta <= 0:
        raise ValueError("beta must be positive")
    m = v.min()
    return float(m - np.log(np.sum(np.exp(-beta * (v - m)))) / beta)


def lse_max(values, beta: float) -> float:
    v = np.asarray(values, dtype=float)
    if v.size == 0:
        raise ValueError("lse_max of an empty set")
    if beta <= 0:
        raise ValueError("beta must be positive")
    m = v.max()
    return float(m + np.log(np.sum(np.exp(beta * (v - m)))) / beta)


@dataclass(frozen=True)
class StlRewardParams:
    inner: Formula
    outer: str  # "G" or "F"
    beta: float = 100.0
    normalize: bool = True

    def __post_init__(self):
        if self.beta <= 0:
            raise ValueError("beta must be positive")
        if self.outer not in ("G", "F"):
            raise ValueError(f"outer kind must be 'G' or 'F', got {self.outer!r}")

    @property
    def tau(self) -> int:
        return horizon(self.inner) + 1

    @classmethod
    def from_fragment(cls, info: FragmentInfo, beta: float = 100.0, normalize: bool = True):
        return cls(info.inner, info.outer, beta, normalize)


def stl_reward(z, reward_params: StlRewardParams):
    """STL reward of a window (``(tau, n)``) or a batch of windows (``(B, tau, n)``)."""
    z = np.asarray(z, dtype=float)
    if z.shape[-2] != reward_params.tau:
        raise ValueError(f"window length {z.shape[-2]} != tau = {reward_params.tau}")
    ind = indicator(robustness_signal(z, reward_params.inner)[..., 0])
    if reward_params.outer == "G":
        out = -np.exp(-reward_params.beta * ind)
    elif reward_params.normalize:
        out = np.exp(reward_params.beta * (ind - 1.0))
    else:
        out = np.exp(reward_params.beta * ind)
    return float(out) if np.ndim(out) == 0 else out


def window_robustness(trace, info: FragmentInfo) -> np.ndarray:
    """``rho(z_k, phi)`` for windows ending at ``k = tau-1 .. min(T-1, tau-1+Ke)``."""
    trace = np.asarray(trace, dtype=float)
    if trace.shape[-2] < info.tau:
        raise TraceTooShortError(f"trace of length {trace.shape[-2]} shorter than tau={info.tau}")
    series = robustness_signal(trace, info.inner)
    return series[..., : info.K_e + 1]


def trajectory_robustness(trace, info: FragmentInfo):
    """Outer min (G) or max (F) over the window robustness series."""
    series = window_robustness(trace, info)
    red = np.min if info.outer == "G" else np.max
    out = red(series, axis=-1)
    return float(out) if np.ndim(out) == 0 else out


# ---------------------------------------------------------------------------


class Plant(Protocol):
    state_dim: int
    action_dim: int

    def reset(self, rng: np.random.Generator, n: int) -> np.ndarray: ...

    def step(self, x: np.ndarray, a: np.ndarray, rng: np.random.Generator) -> np.ndarray: ...

    def reward(self, x: np.ndarray, a: np.ndarray) -> np.ndarray: ...

    def normalize(self, x: np.ndarray) -> np.ndarray: ...


class TauEnv:
    """Batch of ``n_envs`` tau-CMDP episodes over a plant.

    Observations are pre-processed states ``[normalised x_k, f_hat]`` or, with
    ``preprocess=False``, the flattened normalised window.
    """

    def __init__(
        self,
        plant: Plant,
        info: FragmentInfo,
        beta: float = 100.0,
        normalize_reward: bool = True,
        preprocess: bool = True,
        n_envs: int = 1,
    ):
        if preprocess and not info.flag_eligible:
            raise ValueError(
                "flag pre-processing needs every sub-formula to end at tau-1; "
                "disable pre-processing for this formula"
            )
        self.plant = plant
        self.info = info
        self.reward_params = StlRewardParams.from_fragment(info, beta, normalize_reward)
        self.preprocess = preprocess
        self.n_envs = n_envs
        self.tau = info.tau
        self.window = None
        self.counts = None

    @property
    def obs_dim(self) -> int:
        n = self.plant.state_dim
        return n + len(self.info.subformulas) if self.preprocess else self.tau * n

    @property
    def action_dim(self) -> int:
        return self.plant.action_dim

    def initial_observation(self, x0: np.ndarray) -> np.ndarray:
        """Observation of padded initial windows without touching episode state."""
        windows = np.repeat(np.asarray(x0, dtype=float)[:, None, :], self.tau, axis=1)
        counts = self._counts_from_scratch(windows)
        return self._observe(windows, counts)

    def reset(self, rng: np.random.Generator) -> np.ndarray:
        x0 = self.plant.reset(rng, self.n_envs)
        self.window = np.repeat(x0[:, None, :], self.tau, axis=1)
        self.counts = self._counts_from_scratch(self.window)
        return self._observe(self.window, self.counts)

    def step(self, action: np.ndarray, rng: np.random.Generator):
        """Returns ``(obs_next, r, s, x_next)`` with ``r = R_z(z_k, a_k)``, ``s = R_STL(z_k)``."""
        action = np.asarray(action, dtype=float).reshape(self.n_envs, -1)
        x = self.window[:, -1]
        r = self.plant.reward(x, action)
        s = stl_reward(self.window, self.reward_params)
        x_next = self.plant.step(x, action, rng)
        self.window = np.concatenate([self.window[:, 1:], x_next[:, None, :]], axis=1)
        if self.preprocess and self.info.subformulas:
            self.counts = np.stack(
                [pp.update_counts(self.counts[:, i], x_next, sub)
                 for i, sub in enumerate(self.info.subformulas)],
                axis=1,
            )
        return self._observe(self.window, self.counts), r, s, x_next

    def flags(self) -> np.ndarray:
        """Current transformed flags, shape ``(n_envs, M)``."""
        return self._fhat(self.counts)

    def _counts_from_scratch(self, windows):
        if not self.preprocess:
            return None
        subs = self.info.subformulas
        if not subs:
            return np.zeros((len(windows), 0), dtype=np.int64)
        return np.stack([pp.flag_counts(windows, s) for s in subs], axis=1)

    def _fhat(self, counts):
        subs = self.info.subformulas
        if not subs:
            return np.zeros((len(counts), 0))
        return np.stack([pp.counts_to_fhat(counts[:, i], s) for i, s in enumerate(subs)], axis=1)

    def _observe(self, windows, counts):
        if self.preprocess:
            head = self.plant.normalize(windows[:, -1])
            return np.concatenate([head, self._fhat(counts)], axis=1)
        flat = self.plant.normalize(windows)
        return flat.reshape(len(windows), -1)
