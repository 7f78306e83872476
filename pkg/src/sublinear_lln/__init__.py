"""Sublinear expectations, truncation conditions and capacity convergence experiments."""

from .core import (
    AmbiguitySet,
    IntervalSet,
    TestFunction,
    ambiguity,
    capacity_V,
    capacity_v,
    check_chebyshev,
    check_markov,
    check_sublinearity,
    lower_expect,
    upper_expect,
)
from .distributions import Cauchy, DiscreteAtoms, Normal, Pareto, SymmetricLogTail, TwoPoint, Uniform
from .errors import SublinearError
from .truncation import SequenceModel

__version__ = "0.1.0"

__all__ = [
    "AmbiguitySet",
    "Cauchy",
    "DiscreteAtoms",
    "IntervalSet",
    "Normal",
    "Pareto",
    "SequenceModel",
    "SublinearError",
    "SymmetricLogTail",
    "TestFunction",
    "TwoPoint",
    "Uniform",
    "ambiguity",
    "capacity_V",
    "capacity_v",
    "check_chebyshev",
    "check_markov",
    "check_sublinearity",
    "lower_expect",
    "upper_expect",
]
