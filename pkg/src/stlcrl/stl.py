"""Signal temporal logic over discrete-time state traces.

Formulas are immutable dataclass trees. A trace is an array of shape ``(T, n)``
(one row per time step). Two evaluation paths are provided:

* :func:`eval_boolean` / :func:`robustness` follow the recursive definitions
  and evaluate one time index at a time.
* :func:`satisfaction_signal` / :func:`robustness_signal` evaluate every valid
  start index at once with numpy and accept leading batch dimensions. These
  are what the environment and evaluation code use.

Concrete syntax::

    G[0,900](F[0,99](3.5 <= x0 <= 4.5 & 3.5 <= x1 <= 4.5) & F[0,99](...))

``&`` binds tighter than ``|``; ``!`` may prefix a predicate or a
parenthesised state formula but never a temporal operator.
"""
from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Union

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view


class StlSyntaxError(ValueError):
    """Raised for malformed formula text. ``pos`` is the character offset."""

    def __init__(self, message: str, pos: int):
        super().__init__(f"{message} (at position {pos})")
        self.pos = pos


class FragmentError(ValueError):
    """The formula lies outside the fragment supported by the tau-CMDP."""


class TraceTooShortError(ValueError):
    pass


@dataclass(frozen=True)
class Pred:
    """Linear predicate ``coeffs . x <= bound``."""

    coeffs: tuple[float, ...]
    bound: float

    def __post_init__(self):
        object.__setattr__(self, "coeffs", tuple(float(c) for c in self.coeffs))
        object.__setattr__(self, "bound", float(self.bound))
        if not all(np.isfinite(self.coeffs)) or not np.isfinite(self.bound):
            raise ValueError("predicate coefficients and bound must be finite")


@dataclass(frozen=True)
class Not:
    child: "Formula"


@dataclass(frozen=True)
class And:
    left: "Formula"
    right: "Formula"


@dataclass(frozen=True)
class Or:
    left: "Formula"
    right: "Formula"


@dataclass(frozen=True)
class _Temporal:
    start: int
    end: int
    child: "Formula"

    def __post_init__(self):
        for b in (self.start, self.end):
            if isinstance(b, bool) or int(b) != b or b < 0:
                raise ValueError(f"time bounds must be nonnegative integers, got {b!r}")
        object.__setattr__(self, "start", int(self.start))
        object.__setattr__(self, "end", int(self.end))
        if self.start > self.end:
            raise ValueError(f"malformed interval [{self.start},{self.end}]")


@dataclass(frozen=True)
class Globally(_Temporal):
    pass


@dataclass(frozen=True)
class Finally(_Temporal):
    pass


Formula = Union[Pred, Not, And, Or, Globally, Finally]


def is_temporal(f: Formula) -> bool:
    return isinstance(f, (Globally, Finally))


def contains_temporal(f: Formula) -> bool:
    if isinstance(f, Pred):
        return False
    if is_temporal(f):
        return True
    if isinstance(f, Not):
        return contains_temporal(f.child)
    return contains_temporal(f.left) or contains_temporal(f.right)


def state_dim(f: Formula) -> int:
    """Dimension of the state vectors the formula's predicates expect."""
    if isinstance(f, Pred):
        return len(f.coeffs)
    if isinstance(f, (Not, Globally, Finally)):
        return state_dim(f.child)
    return state_dim(f.left)


def conj(*fs: Formula) -> Formula:
    """Left-associated conjunction of one or more formulas."""
    out = fs[0]
    for f in fs[1:]:
        out = And(out, f)
    return out


def box(dim: int, bounds: dict[int, tuple[float, float]]) -> Formula:
    """Conjunction ``lo <= x_i <= hi`` over the given coordinates."""
    preds = []
    for i, (lo, hi) in sorted(bounds.items()):
        c = np.zeros(dim)
        c[i] = -1.0
        preds.append(Pred(tuple(c), -lo))
        c = np.zeros(dim)
        c[i] = 1.0
        preds.append(Pred(tuple(c), hi))
    return conj(*preds)


def horizon(f: Formula) -> int:
    if isinstance(f, Pred):
        return 0
    if isinstance(f, Not):
        return horizon(f.child)
    if isinstance(f, (And, Or)):
        return max(horizon(f.left), horizon(f.right))
    return f.end + horizon(f.child)


# ---------------------------------------------------------------------------
# recursive (pointwise) semantics


def _check_trace(trace, k: int, f: Formula) -> np.ndarray:
    trace = np.asarray(trace, dtype=float)
    if trace.ndim == 1:
        trace = trace[:, None]
    need = k + horizon(f)
    if k < 0 or need >= len(trace):
        raise TraceTooShortError(
            f"formula with horizon {horizon(f)} evaluated at index {k} needs "
            f"{need + 1} states, trace has {len(trace)}"
        )
    return trace


def eval_boolean(trace, k: int, f: Formula) -> bool:
    """Boolean satisfaction ``x_{k:} |= f``."""
    return _sat(_check_trace(trace, k, f), k, f)


def _sat(x: np.ndarray, k: int, f: Formula) -> bool:
    if isinstance(f, Pred):
        return float(_linear(f.coeffs, x[k])) <= f.bound
    if isinstance(f, Not):
        return not _sat(x, k, f.child)
    if isinstance(f, And):
        return _sat(x, k, f.left) and _sat(x, k, f.right)
    if isinstance(f, Or):
        return _sat(x, k, f.left) or _sat(x, k, f.right)
    if isinstance(f, Globally):
        return all(_sat(x, j, f.child) for j in range(k + f.start, k + f.end + 1))
    return any(_sat(x, j, f.child) for j in range(k + f.start, k + f.end + 1))


def robustness(trace, k: int, f: Formula) -> float:
    """Quantitative semantics ``rho(x_{k:}, f)``."""
    return _rho(_check_trace(trace, k, f), k, f)


def _rho(x: np.ndarray, k: int, f: Formula) -> float:
    if isinstance(f, Pred):
        return f.bound - float(_linear(f.coeffs, x[k]))
    if isinstance(f, Not):
        return -_rho(x, k, f.child)
    if isinstance(f, And):
        return min(_rho(x, k, f.left), _rho(x, k, f.right))
    if isinstance(f, Or):
        return max(_rho(x, k, f.left), _rho(x, k, f.right))
    vals = [_rho(x, j, f.child) for j in range(k + f.start, k + f.end + 1)]
    return min(vals) if isinstance(f, Globally) else max(vals)


# ---------------------------------------------------------------------------
# vectorised semantics


def robustness_signal(trace, f: Formula) -> np.ndarray:
    """Robustness at every start index ``0 .. T - 1 - hrz(f)``.

    ``trace`` has shape ``(..., T, n)``; the result has shape
    ``(..., T - hrz(f))``.
    """
    trace = np.asarray(trace, dtype=float)
    if trace.shape[-2] <= horizon(f):
        raise TraceTooShortError(
            f"formula with horizon {horizon(f)} needs {horizon(f) + 1} states, "
            f"trace has {trace.shape[-2]}"
        )
    return _signal(trace, f, np.minimum, np.maximum, np.min, np.max, _pred_rho)


def satisfaction_signal(trace, f: Formula) -> np.ndarray:
    """Boolean satisfaction at every start index (same shapes as above)."""
    trace = np.asarray(trace, dtype=float)
    if trace.shape[-2] <= horizon(f):
        raise TraceTooShortError(
            f"formula with horizon {horizon(f)} needs {horizon(f) + 1} states, "
            f"trace has {trace.shape[-2]}"
        )
    return _signal(trace, f, np.logical_and, np.logical_or, np.all, np.any, _pred_sat)


def _linear(coeffs, x):
    """``coeffs . x`` over the last axis, summed left to right.

    Shared by the pointwise and vectorised semantics so both round identically.
    """
    h = coeffs[0] * x[..., 0]
    for i in range(1, len(coeffs)):
        h = h + coeffs[i] * x[..., i]
    return h


def _pred_rho(trace, p: Pred):
    return p.bound - _linear(p.coeffs, trace)


def _pred_sat(trace, p: Pred):
    return _linear(p.coeffs, trace) <= p.bound


def _signal(trace, f, meet, join, meet_red, join_red, pred_fn):
    T = trace.shape[-2]
    L = T - horizon(f)
    if isinstance(f, Pred):
        return pred_fn(trace, f)[..., :L]
    args = (meet, join, meet_red, join_red, pred_fn)
    if isinstance(f, Not):
        s = _signal(trace, f.child, *args)[..., :L]
        return np.logical_not(s) if s.dtype == bool else -s
    if isinstance(f, (And, Or)):
        a = _signal(trace, f.left, *args)[..., :L]
        b = _signal(trace, f.right, *args)[..., :L]
        return meet(a, b) if isinstance(f, And) else join(a, b)
    s = _signal(trace, f.child, *args)
    width = f.end - f.start + 1
    win = sliding_window_view(s, width, axis=-1)[..., f.start:f.start + L, :]
    red = meet_red if isinstance(f, Globally) else join_red
    return red(win, axis=-1)


# ---------------------------------------------------------------------------
# fragment check


@dataclass(frozen=True)
class FragmentInfo:
    """Shape of an outer ``G[0,Ke]`` / ``F[0,Ke]`` formula.

    ``subformulas`` are the temporal leaves of the inner formula in
    left-to-right order; ``tau`` is ``hrz(inner) + 1``.
    """

    formula: Formula
    outer: str
    K_e: int
    inner: Formula
    subformulas: tuple
    tau: int
    flag_eligible: bool
    dim: int = field(default=0)

    @property
    def horizon(self) -> int:
        return self.K_e + self.tau - 1


def validate_fragment(f: Formula) -> FragmentInfo:
    if not is_temporal(f):
        raise FragmentError(f"outer node must be G[0,Ke] or F[0,Ke], got {type(f).__name__}")
    if f.start != 0:
        raise FragmentError(f"outer interval must start at 0, got {to_text(f)[:40]}")
    subs: list = []
    state_leaves = _collect_subformulas(f.child, subs)
    tau = horizon(f.child) + 1
    # a bare state leaf reads the oldest window entry, which flags cannot summarise
    eligible = all(s.end == tau - 1 for s in subs) and (state_leaves == 0 or tau == 1)
    return FragmentInfo(
        formula=f,
        outer="G" if isinstance(f, Globally) else "F",
        K_e=f.end,
        inner=f.child,
        subformulas=tuple(subs),
        tau=tau,
        flag_eligible=eligible,
        dim=state_dim(f),
    )


def _collect_subformulas(f: Formula, out: list) -> int:
    """Append temporal leaves of an &/| tree to ``out``; return the number of
    temporal-free leaves."""
    if isinstance(f, (And, Or)):
        return _collect_subformulas(f.left, out) + _collect_subformulas(f.right, out)
    if is_temporal(f):
        if contains_temporal(f.child):
            raise FragmentError(
                f"temporal nesting deeper than 2 at sub-formula {to_text(f)}"
            )
        out.append(f)
        return 0
    if contains_temporal(f):
        raise FragmentError(f"negation above a temporal operator at {to_text(f)}")
    return 1


# ---------------------------------------------------------------------------
# text syntax

_TOKEN = re.compile(
    r"""
    (?P<ws>\s+)
  | (?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)
  | (?P<var>x\d+)
  | (?P<op><=|>=|[GF\[\],()&|!+\-*])
    """,
    re.VERBOSE,
)


def _tokenize(text: str):
    toks = []
    pos = 0
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if m is None:
            raise StlSyntaxError(f"unexpected character {text[pos]!r}", pos)
        kind = m.lastgroup
        if kind != "ws":
            toks.append((kind, m.group(), pos))
        pos = m.end()
    toks.append(("eof", "", len(text)))
    return toks


class _Parser:
    def __init__(self, text: str, dim: int):
        self.toks = _tokenize(text)
        self.i = 0
        self.dim = dim

    @property
    def tok(self):
        return self.toks[self.i]

    def accept(self, value):
        if self.tok[1] == value and self.tok[0] != "eof":
            self.i += 1
            return True
        return False

    def expect(self, value):
        if not self.accept(value):
            raise StlSyntaxError(f"expected {value!r}, found {self.tok[1] or 'end of input'!r}", self.tok[2])

    def parse(self) -> Formula:
        f = self.disjunction()
        if self.tok[0] != "eof":
            raise StlSyntaxError(f"unexpected token {self.tok[1]!r}", self.tok[2])
        return f

    def disjunction(self):
        f = self.conjunction()
        while self.accept("|"):
            f = Or(f, self.conjunction())
        return f

    def conjunction(self):
        f = self.unary()
        while self.accept("&"):
            f = And(f, self.unary())
        return f

    def unary(self):
        kind, val, pos = self.tok
        if self.accept("!"):
            child = self.unary()
            if contains_temporal(child):
                raise StlSyntaxError("negation above a temporal operator", pos)
            return Not(child)
        if val in ("G", "F") and kind == "op":
            self.i += 1
            a, b = self.interval()
            self.expect("(")
            child = self.disjunction()
            self.expect(")")
            return (Globally if val == "G" else Finally)(a, b, child)
        if self.accept("("):
            f = self.disjunction()
            self.expect(")")
            return f
        return self.atom()

    def interval(self):
        pos = self.tok[2]
        self.expect("[")
        a = self.integer()
        self.expect(",")
        b = self.integer()
        self.expect("]")
        if a > b:
            raise StlSyntaxError(f"malformed interval [{a},{b}]: start exceeds end", pos)
        return a, b

    def integer(self) -> int:
        kind, val, pos = self.tok
        if kind != "num" or not val.isdigit():
            raise StlSyntaxError(f"expected a nonnegative integer time bound, found {val!r}", pos)
        self.i += 1
        return int(val)

    def signed_number(self) -> float:
        sign = 1.0
        while self.tok[1] in ("+", "-"):
            if self.tok[1] == "-":
                sign = -sign
            self.i += 1
        kind, val, pos = self.tok
        if kind != "num":
            raise StlSyntaxError(f"expected a number, found {val or 'end of input'!r}", pos)
        self.i += 1
        return sign * float(val)

    def comparator(self):
        kind, val, pos = self.tok
        if val not in ("<=", ">="):
            raise StlSyntaxError(f"expected '<=' or '>=', found {val or 'end of input'!r}", pos)
        self.i += 1
        return val

    def atom(self) -> Formula:
        start = self.i
        # chained/left-constant form: number cmp sum [cmp number]
        try:
            lhs = self.signed_number()
            left_const = self.tok[1] in ("<=", ">=")
        except StlSyntaxError:
            left_const = False
        if not left_const:
            self.i = start
            coeffs = self.linear_sum()
            op = self.comparator()
            rhs = self.signed_number()
            return _make_pred(coeffs, op, rhs)
        op1 = self.comparator()
        coeffs = self.linear_sum()
        # "a <= sum" is "sum >= a"
        first = _make_pred(coeffs, ">=" if op1 == "<=" else "<=", lhs)
        if self.tok[1] in ("<=", ">="):
            op2 = self.comparator()
            rhs = self.signed_number()
            return And(first, _make_pred(coeffs, op2, rhs))
        return first

    def linear_sum(self) -> np.ndarray:
        coeffs = np.zeros(self.dim)
        sign = 1.0
        while True:
            while self.tok[1] in ("+", "-"):
                if self.tok[1] == "-":
                    sign = -sign
                self.i += 1
            kind, val, pos = self.tok
            if kind == "num":
                c = float(val)
                self.i += 1
                self.accept("*")
                kind, val, pos = self.tok
            else:
                c = 1.0
            if kind != "var":
                raise StlSyntaxError(f"expected a variable x0..x{self.dim - 1}, found {val or 'end of input'!r}", pos)
            idx = int(val[1:])
            if idx >= self.dim:
                raise StlSyntaxError(f"unknown variable {val!r} for state dimension {self.dim}", pos)
            self.i += 1
            coeffs[idx] += sign * c
            if self.tok[1] not in ("+", "-"):
                return coeffs
            sign = 1.0


def _make_pred(coeffs: np.ndarray, op: str, rhs: float) -> Pred:
    if op == "<=":
        return Pred(tuple(coeffs), rhs)
    return Pred(tuple(-coeffs), -rhs)


def parse(text: str, state_dim: int) -> Formula:
    """Parse formula text over variables ``x0 .. x{state_dim-1}``."""
    if state_dim < 1:
        raise ValueError("state_dim must be positive")
    return _Parser(text, state_dim).parse()


def infer_state_dim(text: str) -> int:
    """Smallest state dimension covering every variable mentioned in ``text``."""
    idx = [int(m) for m in re.findall(r"x(\d+)", text)]
    return max(idx) + 1 if idx else 1


def to_text(f: Formula) -> str:
    """Pretty-print; ``parse(to_text(f), dim) == f``."""
    if isinstance(f, Pred):
        terms = []
        for i, c in enumerate(f.coeffs):
            if c == 0.0:
                continue
            if not terms:
                terms.append(f"{c!r}*x{i}")
            elif c > 0:
                terms.append(f" + {c!r}*x{i}")
            else:
                terms.append(f" - {-c!r}*x{i}")
        lhs = "".join(terms) if terms else "0.0*x0"
        return f"{lhs} <= {f.bound!r}"
    if isinstance(f, Not):
        return f"!({to_text(f.child)})"
    if isinstance(f, And):
        return f"({to_text(f.left)} & {to_text(f.right)})"
    if isinstance(f, Or):
        return f"({to_text(f.left)} | {to_text(f.right)})"
    op = "G" if isinstance(f, Globally) else "F"
    return f"{op}[{f.start},{f.end}]({to_text(f.child)})"
