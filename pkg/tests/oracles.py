"""Independent reference implementations used as test oracles.

The evaluators here build per-index tables bottom-up with explicit loops,
which shares no code path with the recursive or vectorised semantics in
``stlcrl.stl``.
"""
from __future__ import annotations

import numpy as np

from stlcrl.stl import And, Finally, Globally, Not, Or, Pred


def random_pred(rng, dim: int = 2) -> Pred:
    coeffs = tuple(float(c) for c in np.round(rng.uniform(-2, 2, size=dim), 1))
    return Pred(coeffs, float(np.round(rng.uniform(-2, 2), 1)))


def random_state_formula(rng, dim: int = 2, depth: int = 2):
    if depth == 0 or rng.random() < 0.4:
        p = random_pred(rng, dim)
        return Not(p) if rng.random() < 0.2 else p
    kind = rng.integers(3)
    if kind == 0:
        return Not(random_state_formula(rng, dim, depth - 1))
    left = random_state_formula(rng, dim, depth - 1)
    right = random_state_formula(rng, dim, depth - 1)
    return And(left, right) if kind == 1 else Or(left, right)


def random_temporal(rng, dim: int = 2, depth: int = 2, max_end: int = 4):
    """A formula whose temporal nesting depth is at most ``depth``."""
    a = int(rng.integers(0, max_end + 1))
    b = int(rng.integers(a, max_end + 1))
    op = Globally if rng.random() < 0.5 else Finally
    if depth <= 1 or rng.random() < 0.4:
        return op(a, b, random_state_formula(rng, dim))
    left = random_temporal(rng, dim, depth - 1, max_end)
    if rng.random() < 0.5:
        return op(a, b, left)
    right = random_temporal(rng, dim, depth - 1, max_end)
    return op(a, b, And(left, right) if rng.random() < 0.5 else Or(left, right))


def random_formula(rng, dim: int = 2, max_depth: int = 2):
    """State formula or temporal formula of nesting depth <= ``max_depth``."""
    if rng.random() < 0.15:
        return random_state_formula(rng, dim)
    return random_temporal(rng, dim, int(rng.integers(1, max_depth + 1)))


def sum_left(coeffs, x) -> float:
    """``coeffs . x`` as a plain left-to-right float sum."""
    h = float(coeffs[0]) * float(x[0])
    for c, v in zip(coeffs[1:], x[1:]):
        h = h + float(c) * float(v)
    return h


def _table(trace, f, quantitative: bool) -> list:
    """Value of ``f`` at every index where it is defined (``None`` elsewhere)."""
    T = len(trace)
    if isinstance(f, Pred):
        out = []
        for j in range(T):
            h = sum_left(f.coeffs, trace[j])
            out.append(f.bound - h if quantitative else h <= f.bound)
        return out
    if isinstance(f, Not):
        child = _table(trace, f.child, quantitative)
        return [None if v is None else (-v if quantitative else not v) for v in child]
    if isinstance(f, (And, Or)):
        lt = _table(trace, f.left, quantitative)
        rt = _table(trace, f.right, quantitative)
        out = []
        for u, v in zip(lt, rt):
            if u is None or v is None:
                out.append(None)
            elif quantitative:
                out.append(min(u, v) if isinstance(f, And) else max(u, v))
            else:
                out.append((u and v) if isinstance(f, And) else (u or v))
        return out
    child = _table(trace, f.child, quantitative)
    out = []
    for j in range(T):
        vals = []
        ok = True
        for i in range(j + f.start, j + f.end + 1):
            if i >= T or child[i] is None:
                ok = False
                break
            vals.append(child[i])
        if not ok:
            out.append(None)
        elif quantitative:
            out.append(min(vals) if isinstance(f, Globally) else max(vals))
        else:
            out.append(all(vals) if isinstance(f, Globally) else any(vals))
    return out


def brute_robustness(trace, k: int, f) -> float:
    v = _table(np.asarray(trace, dtype=float), f, True)[k]
    if v is None:
        raise ValueError("trace too short")
    return v


def brute_boolean(trace, k: int, f) -> bool:
    v = _table(np.asarray(trace, dtype=float), f, False)[k]
    if v is None:
        raise ValueError("trace too short")
    return bool(v)


def brute_flag(window, sub) -> float:
    """Flag value straight from the set definitions (``-inf`` if empty).

    G: largest ``(tau - l)/(tau - ks)`` over ``l`` in ``[ks, tau)`` such that
    the inner formula holds at every index ``l..tau-1``.
    F: largest ``(l - ks + 1)/(tau - ks)`` over ``l`` where it holds.
    """
    tau = len(window)
    ks = sub.start
    holds = brute_table_holds(window, sub.child)
    best = -np.inf
    for l in range(ks, tau):
        if isinstance(sub, Globally):
            if all(holds[i] for i in range(l, tau)):
                best = max(best, (tau - l) / (tau - ks))
        elif holds[l]:
            best = max(best, (l - ks + 1) / (tau - ks))
    return best


def brute_table_holds(window, state_formula) -> list:
    return [bool(v) for v in _table(np.asarray(window, dtype=float), state_formula, False)]
