"""STL-constrained deep reinforcement learning with flag-state pre-processing."""
from __future__ import annotations

from .stl import (
    FragmentError,
    FragmentInfo,
    StlSyntaxError,
    TraceTooShortError,
    eval_boolean,
    horizon,
    parse,
    robustness,
    to_text,
    validate_fragment,
)

__version__ = "0.1.0"

__all__ = [
    "FragmentError", "FragmentInfo", "StlSyntaxError", "TraceTooShortError",
    "eval_boolean", "horizon", "parse", "robustness", "to_text", "validate_fragment",
]
