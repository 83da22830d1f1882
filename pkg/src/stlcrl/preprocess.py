"""Flag-state pre-processing of the extended state.

For a sub-formula ``G[ks, tau-1](phi)`` or ``F[ks, tau-1](phi)`` the flag value
is a normalised timer in ``(0, 1]`` (or ``-inf`` when undefined); the
transformed flag ``f_hat = f - 1/2`` (``-1/2`` when undefined) is what the
networks see.

Every flag value has the form ``c / (tau - ks)`` for an integer count ``c``.
The vectorised helpers work on those counts directly, which keeps the
incremental and from-scratch computations bit-identical.
"""
from __future__ import annotations

import math
from typing import Callable, Sequence

import numpy as np

from .stl import Formula, Globally, FragmentError, is_temporal, satisfaction_signal

BOTTOM = -math.inf


def _check_eligible(sub: Formula, tau: int | None = None) -> int:
    if not is_temporal(sub):
        raise FragmentError(f"flag values need a G/F sub-formula, got {type(sub).__name__}")
    t = sub.end + 1
    if tau is not None and t != tau:
        raise FragmentError(
            f"sub-formula interval [{sub.start},{sub.end}] does not end at tau-1={tau - 1}"
        )
    return t


def _holds(sub: Formula, states) -> np.ndarray:
    """Boolean ``x |= phi_inner`` for each state row (ties count as satisfied)."""
    return satisfaction_signal(np.asarray(states, dtype=float)[..., None, :], sub.child)[..., 0]


def flag_value(z, sub: Formula) -> float:
    """Flag value of one sub-formula for the window ``z`` (shape ``(tau, n)``).

    Returns ``-inf`` when no index qualifies.
    """
    z = np.asarray(z, dtype=float)
    tau = _check_eligible(sub, len(z))
    ks = sub.start
    sat = _holds(sub, z)
    if isinstance(sub, Globally):
        cands = [
            (tau - l) / (tau - ks)
            for l in range(ks, tau)
            if all(sat[lp] for lp in range(l, tau))
        ]
    else:
        cands = [(l - ks + 1) / (tau - ks) for l in range(ks, tau) if sat[l]]
    return max(cands) if cands else BOTTOM


def transform_flag(f: float) -> float:
    return f - 0.5 if f != BOTTOM else -0.5


def preprocess_state(
    z,
    subs: Sequence[Formula],
    normalize: Callable[[np.ndarray], np.ndarray] | None = None,
) -> np.ndarray:
    """``[z[tau-1], f_hat_1, ..., f_hat_M]`` for a single window."""
    z = np.asarray(z, dtype=float)
    head = z[-1] if normalize is None else normalize(z[-1])
    flags = [transform_flag(flag_value(z, s)) for s in subs]
    return np.concatenate([head, np.asarray(flags, dtype=float)])


def incremental_update(fhat: float, x_next, sub: Formula) -> float:
    """Advance a transformed flag by one step given the newest state."""
    _check_eligible(sub)
    span = sub.end + 1 - sub.start
    count = int(round((fhat + 0.5) * span))
    sat = bool(_holds(sub, np.asarray(x_next, dtype=float)[None, :])[0])
    count = int(_step_counts(np.array([count]), np.array([sat]), sub)[0])
    return count / span - 0.5


# ---------------------------------------------------------------------------
# vectorised count form, used by the environment


def flag_counts(windows, sub: Formula) -> np.ndarray:
    """Integer counts ``c`` with ``f = c / (tau - ks)`` (0 for undefined).

    ``windows`` has shape ``(B, tau, n)``.
    """
    windows = np.asarray(windows, dtype=float)
    tau = _check_eligible(sub, windows.shape[-2])
    ks = sub.start
    sat = _holds(sub, windows)[..., ks:]  # (B, tau - ks)
    if isinstance(sub, Globally):
        # length of the trailing run of satisfied states
        return np.cumprod(sat[..., ::-1], axis=-1).sum(axis=-1).astype(np.int64)
    any_sat = sat.any(axis=-1)
    last = (tau - ks - 1) - np.argmax(sat[..., ::-1], axis=-1)
    return np.where(any_sat, last + 1, 0).astype(np.int64)


def _step_counts(counts: np.ndarray, sat_next: np.ndarray, sub: Formula) -> np.ndarray:
    span = sub.end + 1 - sub.start
    if isinstance(sub, Globally):
        return np.where(sat_next, np.minimum(counts + 1, span), 0)
    return np.where(sat_next, span, np.maximum(counts - 1, 0))


def update_counts(counts: np.ndarray, x_next, sub: Formula) -> np.ndarray:
    """Vectorised counterpart of :func:`incremental_update` on counts."""
    return _step_counts(counts, _holds(sub, x_next), sub)


def counts_to_fhat(counts: np.ndarray, sub: Formula) -> np.ndarray:
    span = sub.end + 1 - sub.start
    return counts / span - 0.5
