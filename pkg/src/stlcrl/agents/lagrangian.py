"""Lagrange multiplier, entropy temperature and Ornstein-Uhlenbeck noise."""
from __future__ import annotations

import numpy as np

from ..nn import Adam


class ProjectedScalar:
    """Nonnegative scalar trained with Adam and projected onto ``[0, inf)``."""

    def __init__(self, init: float, lr: float):
        if init < 0:
            raise ValueError("initial value must be nonnegative")
        self._p = np.array([float(init)])
        self.opt = Adam([self._p], lr)

    @property
    def value(self) -> float:
        return float(self._p[0])

    def step(self, grad: float) -> float:
        self.opt.step([np.array([float(grad)])])
        self._p[0] = max(self._p[0], 0.0)
        return self.value


def kappa_update(kappa: ProjectedScalar, q_s_init, l_stl: float) -> float:
    """One descent step on ``kappa * (E[Q_s(z0, a)] - l_stl)``.

    ``kappa`` grows while the estimated STL return at initial states is below
    the threshold and shrinks once it is above.
    """
    return kappa.step(float(np.mean(q_s_init)) - l_stl)


def alpha_update(alpha: ProjectedScalar, logp, target_entropy: float) -> float:
    """One descent step on ``alpha * (E[-log pi] - H0)``."""
    return alpha.step(float(np.mean(-np.asarray(logp))) - target_entropy)


class OuNoise:
    """``w' = w - p1 (w - p2) + p3 * eps`` with standard normal ``eps``."""

    def __init__(self, dim: int, p1: float = 0.15, p2: float = 0.0, p3: float = 0.3):
        self.dim = dim
        self.p1, self.p2, self.p3 = p1, p2, p3
        self.state = np.full(dim, p2, dtype=float)

    def reset(self) -> None:
        self.state = np.full(self.dim, self.p2, dtype=float)

    def step(self, eps) -> np.ndarray:
        self.state = self.state - self.p1 * (self.state - self.p2) + self.p3 * np.asarray(eps, dtype=float)
        return self.state

    def sample(self, rng: np.random.Generator) -> np.ndarray:
        return self.step(rng.standard_normal(self.dim))
