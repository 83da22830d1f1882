"""Two-wheeled mobile robot benchmark plant."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .stl import Formula, box, parse

Box = tuple[tuple[float, float], ...]


@dataclass(frozen=True)
class RobotConfig:
    delta: float = 0.1
    noise_scale: float = 0.01
    work_area: Box = ((0.5, 4.5), (0.5, 4.5))
    init_box: Box = ((0.5, 2.5), (0.5, 2.5), (-math.pi / 2, math.pi / 2))
    region1: Box = ((3.5, 4.5), (3.5, 4.5))
    region2: Box = ((3.5, 4.5), (1.5, 2.5))
    offset: tuple[float, float, float] = (2.5, 2.5, 0.0)

    def __post_init__(self):
        for name in ("work_area", "init_box", "region1", "region2"):
            for lo, hi in getattr(self, name):
                if lo > hi:
                    raise ValueError(f"{name} has low bound {lo} above high bound {hi}")


def wrap_angle(theta):
    """Wrap to ``[-pi, pi)``."""
    return (np.asarray(theta) + np.pi) % (2 * np.pi) - np.pi


class TwoWheeledRobot:
    """Unicycle kinematics with additive Gaussian noise.

    ``step`` accepts batches: ``x`` of shape ``(B, 3)``, ``a`` of shape ``(B, 2)``.
    Pass ``rng=None`` for the noise-free model.
    """

    state_dim = 3
    action_dim = 2

    def __init__(self, config: RobotConfig | None = None):
        self.config = config or RobotConfig()

    def reset(self, rng: np.random.Generator, n: int = 1) -> np.ndarray:
        lo = np.array([b[0] for b in self.config.init_box])
        hi = np.array([b[1] for b in self.config.init_box])
        return rng.uniform(lo, hi, size=(n, 3))

    def step(self, x, a, rng: np.random.Generator | None) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        a = np.asarray(a, dtype=float)
        if not np.all(np.isfinite(a)):
            raise ValueError("non-finite action")
        a = np.clip(a, -1.0, 1.0)
        d = self.config.delta
        theta = x[..., 2]
        nxt = np.stack(
            [
                x[..., 0] + d * a[..., 0] * np.cos(theta),
                x[..., 1] + d * a[..., 0] * np.sin(theta),
                theta + d * a[..., 1],
            ],
            axis=-1,
        )
        if rng is not None:
            nxt = nxt + self.config.noise_scale * rng.standard_normal(nxt.shape)
        nxt[..., 2] = wrap_angle(nxt[..., 2])
        return nxt

    def reward(self, x, a) -> np.ndarray:
        """Working-area penalty plus fuel cost; heading does not enter."""
        x = np.asarray(x, dtype=float)
        a = np.asarray(a, dtype=float)
        (x0lo, x0hi), (x1lo, x1hi) = self.config.work_area
        r_x = np.minimum.reduce([
            x[..., 0] - x0lo, x0hi - x[..., 0],
            x[..., 1] - x1lo, x1hi - x[..., 1],
            np.zeros(x.shape[:-1]),
        ])
        return r_x - np.sum(a * a, axis=-1)

    def normalize(self, x) -> np.ndarray:
        return np.asarray(x, dtype=float) - np.asarray(self.config.offset)

    def region_predicates(self) -> tuple[Formula, Formula]:
        r1, r2 = self.config.region1, self.config.region2
        return (
            box(3, {0: r1[0], 1: r1[1]}),
            box(3, {0: r2[0], 1: r2[1]}),
        )


def _region_text(b: Box) -> str:
    (a0, b0), (a1, b1) = b
    return f"{a0} <= x0 <= {b0} & {a1} <= x1 <= {b1}"


def recurrence_formula(config: RobotConfig | None = None, K_e: int = 900, window: int = 99) -> str:
    """``G[0,Ke](F[0,w] region1 & F[0,w] region2)`` as text."""
    c = config or RobotConfig()
    return (
        f"G[0,{K_e}](F[0,{window}]({_region_text(c.region1)}) & "
        f"F[0,{window}]({_region_text(c.region2)}))"
    )


def stabilization_formula(config: RobotConfig | None = None, K_e: int = 450, stay: int = 49) -> str:
    """``F[0,Ke](G[0,s] region1 | G[0,s] region2)`` as text."""
    c = config or RobotConfig()
    return (
        f"F[0,{K_e}](G[0,{stay}]({_region_text(c.region1)}) | "
        f"G[0,{stay}]({_region_text(c.region2)}))"
    )


RECURRENCE = recurrence_formula()
STABILIZATION = stabilization_formula()


def benchmark_formula(name: str) -> Formula:
    return parse({"recurrence": RECURRENCE, "stabilization": STABILIZATION}[name], 3)
