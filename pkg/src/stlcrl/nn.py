"""Small dense-network toolkit: MLPs with hand-written backprop, Adam,
soft target updates, the tanh-squashed Gaussian policy head and checkpoints.

Everything is float64 numpy.
"""
from __future__ import annotations

import json
import math
from pathlib import Path
from typing import Sequence

import numpy as np

LOG_STD_MIN = -20.0
LOG_STD_MAX = 2.0
_HALF_LOG_2PI = 0.5 * math.log(2.0 * math.pi)

CHECKPOINT_VERSION = 1


class Mlp:
    """Fully connected net: ReLU hidden layers, identity or tanh output.

    ``params`` is the list ``[W0, b0, W1, b1, ...]`` with ``W`` of shape
    ``(fan_in, fan_out)``. All of them are views into the single contiguous
    vector ``flat``, so optimisers and target updates can work on one array.
    The last recorded forward pass is kept for :meth:`backward`.
    """

    def __init__(self, sizes: Sequence[int], out_act: str = "identity", rng=None):
        if out_act not in ("identity", "tanh"):
            raise ValueError(f"unknown output activation {out_act!r}")
        rng = rng if rng is not None else np.random.default_rng()
        self.sizes = tuple(int(s) for s in sizes)
        self.out_act = out_act
        self.shapes: list[tuple[int, ...]] = []
        for fan_in, fan_out in zip(self.sizes[:-1], self.sizes[1:]):
            self.shapes += [(fan_in, fan_out), (fan_out,)]
        self.flat = np.empty(sum(math.prod(s) for s in self.shapes))
        self.params = _views(self.flat, self.shapes)
        for W, b in zip(self.params[::2], self.params[1::2]):
            bound = 1.0 / math.sqrt(W.shape[0])
            W[...] = rng.uniform(-bound, bound, size=W.shape)
            b[...] = rng.uniform(-bound, bound, size=b.shape)
        self._tape = None

    @property
    def n_in(self) -> int:
        return self.sizes[0]

    @property
    def n_out(self) -> int:
        return self.sizes[-1]

    def copy(self) -> "Mlp":
        other = Mlp.__new__(Mlp)
        other.sizes = self.sizes
        other.out_act = self.out_act
        other.shapes = self.shapes
        other.flat = self.flat.copy()
        other.params = _views(other.flat, other.shapes)
        other._tape = None
        return other

    def forward(self, x, record: bool = False) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if x.shape[-1] != self.n_in:
            raise ValueError(f"input width {x.shape[-1]} != {self.n_in}")
        acts = [x]
        h = x
        n_layers = len(self.params) // 2
        for i in range(n_layers):
            W, b = self.params[2 * i], self.params[2 * i + 1]
            h = h @ W + b
            if i < n_layers - 1:
                h = np.maximum(h, 0.0)
            elif self.out_act == "tanh":
                h = np.tanh(h)
            acts.append(h)
        if record:
            self._tape = acts
        return h

    def backward(self, grad_out, param_grads: bool = True):
        """Reverse pass through the last recorded forward.

        Returns ``(grads, grad_input)``; ``grads`` is ``None`` when
        ``param_grads`` is false.
        """
        if self._tape is None:
            raise RuntimeError("backward called without a recorded forward pass")
        acts = self._tape
        g = np.asarray(grad_out, dtype=float)
        n_layers = len(self.params) // 2
        if self.out_act == "tanh":
            g = g * (1.0 - acts[-1] ** 2)
        grads = _views(np.empty_like(self.flat), self.shapes) if param_grads else None
        for i in reversed(range(n_layers)):
            a_in = acts[i]
            if param_grads:
                np.matmul(a_in.T, g, out=grads[2 * i])
                np.sum(g, axis=0, out=grads[2 * i + 1])
            g = g @ self.params[2 * i].T
            if i > 0:
                g = g * (a_in > 0.0)
        return grads, g


def _views(flat: np.ndarray, shapes) -> list[np.ndarray]:
    out, start = [], 0
    for shape in shapes:
        n = math.prod(shape)
        out.append(flat[start:start + n].reshape(shape))
        start += n
    return out


def _packed(arrays: list[np.ndarray]) -> np.ndarray | None:
    """The 1-D buffer that ``arrays`` tile in order, back to back, or ``None``."""
    base = arrays[0].base if arrays else None
    if base is None or base.ndim != 1 or not base.flags.c_contiguous:
        return None
    addr = base.__array_interface__["data"][0]
    for a in arrays:
        if a.base is not base or not a.flags.c_contiguous or a.__array_interface__["data"][0] != addr:
            return None
        addr += a.nbytes
    return base if addr == base.__array_interface__["data"][0] + base.nbytes else None


_SCRATCH: dict[tuple, list[np.ndarray]] = {}

# Dead ReLU units receive exactly zero gradients, so their Adam moments decay
# geometrically towards the subnormal range, where float arithmetic is about
# 100x slower. Moments below this size are zeroed every FLUSH_EVERY steps; at
# that size they move a parameter by less than lr * 1e-242 per step anyway.
MOMENT_FLUSH = 1e-250
FLUSH_EVERY = 100


def _scratch(shape, n: int) -> list[np.ndarray]:
    """Reusable work arrays; large temporaries otherwise dominate update cost."""
    bufs = _SCRATCH.setdefault(tuple(shape), [])
    while len(bufs) < n:
        bufs.append(np.empty(shape))
    return bufs[:n]


class Adam:
    """Adam with bias correction, updating a list of arrays in place.

    When the parameters and the gradients each tile one contiguous buffer
    (as :class:`Mlp` arranges), the update runs once over the whole buffer;
    elementwise arithmetic makes that bit-identical to the per-array loop.
    """

    def __init__(self, params: list[np.ndarray], lr: float, betas=(0.9, 0.999), eps: float = 1e-8):
        self.params = params
        self.lr = lr
        self.beta1, self.beta2 = betas
        self.eps = eps
        self._flat = _packed(params)
        if self._flat is not None:
            self._m_flat = np.zeros_like(self._flat)
            self._v_flat = np.zeros_like(self._flat)
            shapes = [p.shape for p in params]
            self.m = _views(self._m_flat, shapes)
            self.v = _views(self._v_flat, shapes)
        else:
            self.m = [np.zeros_like(p) for p in params]
            self.v = [np.zeros_like(p) for p in params]
        self.t = 0

    def step(self, grads: list[np.ndarray]) -> None:
        if len(grads) != len(self.params):
            raise ValueError("gradient list does not match parameters")
        for p, g in zip(self.params, grads):
            if g.shape != p.shape:
                raise ValueError(f"gradient shape {g.shape} != parameter shape {p.shape}")
        self.t += 1
        c1 = 1.0 - self.beta1 ** self.t
        c2 = 1.0 - self.beta2 ** self.t
        g_flat = _packed(grads) if self._flat is not None else None
        if g_flat is not None:
            self._update(self._flat, g_flat, self._m_flat, self._v_flat, c1, c2)
        else:
            for p, g, m, v in zip(self.params, grads, self.m, self.v):
                self._update(p, g, m, v, c1, c2)
        if self.t % FLUSH_EVERY == 0:
            for m, v in zip(self.m, self.v):
                m[np.abs(m) < MOMENT_FLUSH] = 0.0
                v[v < MOMENT_FLUSH] = 0.0

    def _update(self, p, g, m, v, c1: float, c2: float) -> None:
        t1, t2 = _scratch(p.shape, 2)
        m *= self.beta1
        np.multiply(g, 1.0 - self.beta1, out=t1)
        m += t1
        v *= self.beta2
        np.multiply(g, 1.0 - self.beta2, out=t1)
        t1 *= g
        v += t1
        np.divide(v, c2, out=t1)
        np.sqrt(t1, out=t1)
        t1 += self.eps
        np.divide(m, c1, out=t2)
        t2 *= self.lr
        t2 /= t1
        p -= t2


def soft_update(target: Mlp, main: Mlp, xi: float) -> None:
    """``target <- xi * main + (1 - xi) * target`` elementwise."""
    if not 0.0 < xi <= 1.0:
        raise ValueError(f"soft update rate must lie in (0, 1], got {xi}")
    if target.shapes != main.shapes:
        raise ValueError("soft update between networks of different shapes")
    (t1,) = _scratch(main.flat.shape, 1)
    np.multiply(main.flat, xi, out=t1)
    target.flat *= 1.0 - xi
    target.flat += t1


# ---------------------------------------------------------------------------
# squashed Gaussian


def squashed_gaussian(mean, log_std, eps):
    """Reparameterised sample ``a = tanh(mean + exp(log_std) * eps)`` and its log-density.

    The log-density includes the tanh change-of-variables term.
    """
    mean = np.asarray(mean, dtype=float)
    std = np.exp(log_std)
    u = mean + std * eps
    a = np.tanh(u)
    log_det = 2.0 * (math.log(2.0) - u - np.logaddexp(0.0, -2.0 * u))  # log(1 - tanh(u)^2)
    logp = np.sum(-0.5 * eps**2 - log_std - _HALF_LOG_2PI - log_det, axis=-1)
    return a, logp


class GaussianPolicy:
    """Actor emitting mean and log-std; actions are tanh-squashed into [-1, 1]."""

    def __init__(self, obs_dim: int, act_dim: int, hidden=(256, 256), rng=None):
        self.act_dim = act_dim
        self.net = Mlp([obs_dim, *hidden, 2 * act_dim], rng=rng)
        self._cache = None

    @property
    def params(self):
        return self.net.params

    def _head(self, out):
        mean = out[..., : self.act_dim]
        raw = out[..., self.act_dim:]
        log_std = np.clip(raw, LOG_STD_MIN, LOG_STD_MAX)
        mask = (raw >= LOG_STD_MIN) & (raw <= LOG_STD_MAX)
        return mean, log_std, mask

    def sample(self, obs, eps, record: bool = False):
        out = self.net.forward(obs, record=record)
        mean, log_std, mask = self._head(out)
        a, logp = squashed_gaussian(mean, log_std, eps)
        if record:
            self._cache = (a, np.exp(log_std), eps, mask)
        return a, logp

    def backward(self, grad_a, grad_logp):
        """Parameter gradients of a loss given dL/da and dL/dlogp per sample."""
        if self._cache is None:
            raise RuntimeError("backward called without a recorded sample")
        a, std, eps, mask = self._cache
        glp = np.asarray(grad_logp, dtype=float)[..., None]
        g_u = grad_a * (1.0 - a * a) + glp * 2.0 * a
        g_mean = g_u
        g_log_std = (g_u * std * eps - glp) * mask
        grads, _ = self.net.backward(np.concatenate([g_mean, g_log_std], axis=-1))
        return grads

    def mean_action(self, obs) -> np.ndarray:
        mean, _, _ = self._head(self.net.forward(obs))
        return np.tanh(mean)


# ---------------------------------------------------------------------------
# checkpoints


def save_checkpoint(path, arrays: dict[str, np.ndarray], meta: dict) -> None:
    """Write ``arrays`` plus JSON ``meta`` to an ``.npz`` archive.

    Layout: one npz entry per array under its dotted name, and a
    ``__meta__`` entry holding a JSON string with a ``version`` field.
    """
    meta = dict(meta, version=CHECKPOINT_VERSION)
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "wb") as fh:
        np.savez(fh, __meta__=np.array(json.dumps(meta, sort_keys=True)), **arrays)


def load_checkpoint(path) -> tuple[dict[str, np.ndarray], dict]:
    with np.load(path, allow_pickle=False) as data:
        meta = json.loads(str(data["__meta__"]))
        arrays = {k: data[k].copy() for k in data.files if k != "__meta__"}
    if meta.get("version") != CHECKPOINT_VERSION:
        raise ValueError(f"unsupported checkpoint version {meta.get('version')!r}")
    return arrays, meta
