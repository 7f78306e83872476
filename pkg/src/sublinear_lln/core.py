"""Upper/lower expectations and capacities over finite ambiguity sets.

The upper expectation of a test function is the largest classical
expectation over the members of an ambiguity set, and the lower expectation
is its conjugate ``-E[-phi]``.  Capacities are the same functionals applied
to event indicators, with events restricted to finite unions of intervals so
every member probability is an exact cdf difference.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence

import numpy as np

from . import quadrature
from .distributions import Distribution
from .errors import MonotonicityViolation, NonIntegrable, QuadratureFailure, ValidationError

DEFAULT_MAX_MEMBERS = 64
INEQUALITY_SLACK = 1e-9
AXIOM_TOL = 1e-8
# classical expectations run tighter than the axiom tolerance to leave headroom
EXPECT_TOL = 1e-10


# ---------------------------------------------------------------- test functions


@dataclass(frozen=True, eq=False)
class TestFunction:
    """A vectorized real function with declared local-Lipschitz constants.

    ``growth_order`` and ``lipschitz_scale`` are the ``m`` and ``C`` of
    ``|f(x) - f(y)| <= C (1 + |x|^m + |y|^m) |x - y|``; they are declared, not
    proven (see :meth:`spot_check`).  ``math.inf`` as growth order marks a
    super-polynomial function, integrable only under bounded-support laws.
    ``support`` is a compact interval outside of which ``f`` vanishes;
    ``kinks`` are points where ``f`` is not smooth.
    """

    __test__ = False  # not a pytest class

    fn: Callable[[np.ndarray], np.ndarray]
    growth_order: float = 0
    lipschitz_scale: float = 1.0
    bounded: bool = False
    support: tuple[float, float] | None = None
    kinks: tuple[float, ...] = ()
    name: str = "f"

    def __post_init__(self):
        if self.growth_order < 0:
            raise ValidationError("growth_order", "must be nonnegative")
        if not self.lipschitz_scale > 0:
            raise ValidationError("lipschitz_scale", "must be positive")

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        return np.asarray(self.fn(x), dtype=float) * np.ones_like(x)

    def __neg__(self) -> TestFunction:
        return self.scaled(-1.0)

    def scaled(self, lam: float) -> TestFunction:
        lam = float(lam)
        return TestFunction(
            lambda x, f=self.fn: lam * f(x),
            self.growth_order,
            max(abs(lam), 1e-300) * self.lipschitz_scale,
            self.bounded,
            self.support,
            self.kinks,
            f"{lam:g}*{self.name}",
        )

    def __mul__(self, lam: float) -> TestFunction:
        return self.scaled(lam)

    __rmul__ = __mul__

    def __add__(self, other) -> TestFunction:
        if not isinstance(other, TestFunction):
            other = constant(float(other))
        if self.support is not None and other.support is not None:
            sup = (min(self.support[0], other.support[0]), max(self.support[1], other.support[1]))
        else:
            sup = None
        return TestFunction(
            lambda x, f=self.fn, g=other.fn: f(x) + g(x),
            max(self.growth_order, other.growth_order),
            self.lipschitz_scale + other.lipschitz_scale,
            self.bounded and other.bounded,
            sup,
            tuple(sorted(set(self.kinks) | set(other.kinks))),
            f"({self.name}+{other.name})",
        )

    __radd__ = __add__

    def __sub__(self, other) -> TestFunction:
        if not isinstance(other, TestFunction):
            other = constant(float(other))
        return self + (-other)

    def required_moment(self) -> float:
        """Moment order a law needs for this function to be integrable."""
        if self.bounded or self.support is not None:
            return 0.0
        return self.growth_order + 1

    def spot_check(
        self,
        rng: np.random.Generator,
        pairs: int = 256,
        domain: tuple[float, float] = (-10.0, 10.0),
    ) -> bool:
        """Sample pairs in ``domain`` and test the declared Lipschitz bound."""
        x = rng.uniform(*domain, size=pairs)
        y = rng.uniform(*domain, size=pairs)
        m = self.growth_order
        if math.isinf(m):
            return True
        lhs = np.abs(self(x) - self(y))
        rhs = self.lipschitz_scale * (1 + np.abs(x) ** m + np.abs(y) ** m) * np.abs(x - y)
        return bool(np.all(lhs <= rhs * (1 + 1e-12) + 1e-12))


def constant(c: float) -> TestFunction:
    c = float(c)
    return TestFunction(lambda x: np.full_like(x, c), 0, 1e-300, True, None, (), f"{c:g}")


def identity() -> TestFunction:
    return TestFunction(lambda x: x, 0, 1.0, name="x")


def power(p: int) -> TestFunction:
    """x -> x**p for a positive integer p."""
    return TestFunction(lambda x: x**p, p - 1, float(p), name=f"x^{p}")


def centered_square(a: float) -> TestFunction:
    return TestFunction(lambda x: (x - a) ** 2, 1, 2.0 * (1.0 + abs(a)), name=f"(x-{a:g})^2")


# ---------------------------------------------------------------- events


@dataclass(frozen=True)
class Interval:
    lo: float
    hi: float
    lo_closed: bool = True
    hi_closed: bool = True

    def is_empty(self) -> bool:
        if self.lo > self.hi:
            return True
        if self.lo == self.hi:
            return not (self.lo_closed and self.hi_closed) or math.isinf(self.lo)
        return False

    def contains(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        left = x >= self.lo if self.lo_closed else x > self.lo
        right = x <= self.hi if self.hi_closed else x < self.hi
        return left & right


@dataclass(frozen=True)
class IntervalSet:
    """A finite disjoint union of real intervals, kept in normal form."""

    intervals: tuple[Interval, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "intervals", _normalize(self.intervals))

    @classmethod
    def of(cls, *intervals: Interval) -> IntervalSet:
        return cls(tuple(intervals))

    @classmethod
    def empty(cls) -> IntervalSet:
        return cls(())

    @classmethod
    def real_line(cls) -> IntervalSet:
        return cls((Interval(-math.inf, math.inf, False, False),))

    @classmethod
    def closed(cls, lo: float, hi: float) -> IntervalSet:
        return cls((Interval(lo, hi, True, True),))

    @classmethod
    def open(cls, lo: float, hi: float) -> IntervalSet:
        return cls((Interval(lo, hi, False, False),))

    @classmethod
    def point(cls, x: float) -> IntervalSet:
        return cls((Interval(x, x, True, True),))

    @classmethod
    def at_least(cls, x: float) -> IntervalSet:
        return cls((Interval(x, math.inf, True, False),))

    @classmethod
    def above(cls, x: float) -> IntervalSet:
        return cls((Interval(x, math.inf, False, False),))

    @classmethod
    def abs_above(cls, t: float) -> IntervalSet:
        """{x : |x| > t}."""
        return cls((Interval(-math.inf, -t, False, False), Interval(t, math.inf, False, False)))

    def union(self, other: IntervalSet) -> IntervalSet:
        return IntervalSet(self.intervals + other.intervals)

    def complement(self) -> IntervalSet:
        pieces = []
        lo, lo_closed = -math.inf, False
        for iv in self.intervals:
            pieces.append(Interval(lo, iv.lo, lo_closed, not iv.lo_closed))
            lo, lo_closed = iv.hi, not iv.hi_closed
        pieces.append(Interval(lo, math.inf, lo_closed, False))
        return IntervalSet(tuple(pieces))

    def contains(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        out = np.zeros(x.shape, dtype=bool)
        for iv in self.intervals:
            out |= iv.contains(x)
        return out

    def probability(self, dist: Distribution) -> float:
        """P(X in self) as a sum of exact cdf differences."""
        total = 0.0
        for iv in self.intervals:
            if math.isinf(iv.hi):
                p = dist.sf_left(iv.lo) if iv.lo_closed else dist.sf(iv.lo)
                p = 1.0 if math.isinf(iv.lo) else float(p)
            else:
                upper = dist.cdf(iv.hi) if iv.hi_closed else dist.cdf_left(iv.hi)
                if math.isinf(iv.lo):
                    lower = 0.0
                else:
                    lower = dist.cdf_left(iv.lo) if iv.lo_closed else dist.cdf(iv.lo)
                p = float(upper) - float(lower)
            total += max(p, 0.0)
        return min(total, 1.0)


def _normalize(intervals: Iterable[Interval]) -> tuple[Interval, ...]:
    ivs = []
    for iv in intervals:
        lo_closed = iv.lo_closed and not math.isinf(iv.lo)
        hi_closed = iv.hi_closed and not math.isinf(iv.hi)
        iv = Interval(float(iv.lo), float(iv.hi), lo_closed, hi_closed)
        if not iv.is_empty():
            ivs.append(iv)
    # closed lower ends sort before open ones at the same point
    ivs.sort(key=lambda iv: (iv.lo, not iv.lo_closed))
    merged: list[Interval] = []
    for iv in ivs:
        if merged:
            last = merged[-1]
            touching = iv.lo < last.hi or (iv.lo == last.hi and (last.hi_closed or iv.lo_closed))
            if touching:
                if iv.hi > last.hi:
                    hi, hi_closed = iv.hi, iv.hi_closed
                elif iv.hi == last.hi:
                    hi, hi_closed = last.hi, last.hi_closed or iv.hi_closed
                else:
                    hi, hi_closed = last.hi, last.hi_closed
                merged[-1] = Interval(last.lo, hi, last.lo_closed, hi_closed)
                continue
        merged.append(iv)
    return tuple(merged)


# ---------------------------------------------------------------- ambiguity sets


@dataclass(frozen=True)
class AmbiguitySet:
    """A nonempty finite family of laws for one coordinate."""

    members: tuple[Distribution, ...]
    max_members: int = field(default=DEFAULT_MAX_MEMBERS, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "members", tuple(self.members))
        if not self.members:
            raise ValidationError("members", "ambiguity set must be nonempty")
        if len(self.members) > self.max_members:
            raise ValidationError(
                "members", f"{len(self.members)} members exceed the limit {self.max_members}"
            )

    def __len__(self) -> int:
        return len(self.members)

    def __iter__(self):
        return iter(self.members)

    def __getitem__(self, i: int) -> Distribution:
        return self.members[i]

    @property
    def discrete(self) -> bool:
        return all(m.discrete for m in self.members)

    def to_record(self) -> list[dict]:
        return [m.to_record() for m in self.members]


def ambiguity(*members: Distribution) -> AmbiguitySet:
    return AmbiguitySet(tuple(members))


# ---------------------------------------------------------------- expectations


def expect_under(dist: Distribution, phi: TestFunction, tol: float = EXPECT_TOL) -> float:
    """Classical expectation of ``phi(X)`` for ``X ~ dist``."""
    atoms = dist.atoms()
    if atoms is not None:
        values, probs = atoms
        return float(np.dot(probs, phi(values)))

    lo, hi = dist.support()
    bounded_law = math.isfinite(lo) and math.isfinite(hi)
    need = phi.required_moment()
    if not bounded_law and need > 0 and not dist.has_finite_moment(need):
        raise NonIntegrable(
            f"{phi.name} needs a finite moment of order {need:g}; "
            f"{dist.kind} only has moments below {dist.moment_limit:g}"
        )

    kinks = set(phi.kinks) | set(dist.breakpoints())
    if bounded_law or phi.support is not None:
        a, b = lo, hi
        if phi.support is not None:
            a, b = max(a, phi.support[0]), min(b, phi.support[1])
        if not a < b:
            return 0.0
        value, _ = quadrature.integrate(lambda x: phi(x) * dist.pdf(x), a, b, kinks, tol)
        return value

    # quantile domain, split at the median so the upper half runs in 1 - u
    lower_cuts = [float(dist.cdf(k)) for k in kinks]
    upper_cuts = [float(dist.sf(k)) for k in kinks]
    half_tol = 0.5 * tol
    left, _ = quadrature.integrate(lambda u: phi(dist.quantile(u)), 0.0, 0.5, lower_cuts, half_tol)
    right, _ = quadrature.integrate(lambda v: phi(dist.isf(v)), 0.0, 0.5, upper_cuts, half_tol)
    return left + right


def _tagged(exc: Exception, i: int) -> Exception:
    if isinstance(exc, (NonIntegrable, QuadratureFailure)):
        return type(exc)(f"member {i}: {exc}", member=i)
    return exc


def upper_expect_member(amb: AmbiguitySet, phi: TestFunction) -> tuple[float, int]:
    """(max over members of E^theta phi, index of the maximizing member)."""
    best, arg = -math.inf, -1
    for i, member in enumerate(amb.members):
        try:
            value = expect_under(member, phi)
        except (NonIntegrable, QuadratureFailure) as exc:
            raise _tagged(exc, i) from exc
        if value > best:
            best, arg = value, i
    return best, arg


def upper_expect(amb: AmbiguitySet, phi: TestFunction) -> float:
    if len(amb) == 1:
        return expect_under(amb.members[0], phi)
    return upper_expect_member(amb, phi)[0]


def lower_expect(amb: AmbiguitySet, phi: TestFunction) -> float:
    return -upper_expect(amb, -phi)


def capacity_V(amb: AmbiguitySet, event: IntervalSet) -> float:
    """Upper capacity: max over members of P(X in event)."""
    return max(event.probability(m) for m in amb.members)


def capacity_v(amb: AmbiguitySet, event: IntervalSet) -> float:
    """Lower capacity: min over members of P(X in event)."""
    return min(event.probability(m) for m in amb.members)


# ---------------------------------------------------------------- inequality checks


@dataclass(frozen=True)
class BoundReport:
    lhs: float
    rhs: float
    holds: bool


@dataclass(frozen=True)
class AxiomReport:
    monotonicity: bool
    constants: bool
    homogeneity: bool
    subadditivity: bool
    values: dict = field(default_factory=dict, compare=False)

    @property
    def all_hold(self) -> bool:
        return self.monotonicity and self.constants and self.homogeneity and self.subadditivity


def working_grid(amb: AmbiguitySet, extra: Sequence[float] = (), points: int = 2001) -> np.ndarray:
    """Grid spanning the bulk of every member, for sampled pointwise checks."""
    lows, highs = [], []
    for m in amb.members:
        q = m.quantile(np.array([1e-6, 1 - 1e-6]))
        lows.append(q[0])
        highs.append(q[1])
    lo = min(lows + list(extra))
    hi = max(highs + list(extra))
    if lo == hi:
        lo, hi = lo - 1.0, hi + 1.0
    grid = np.linspace(lo, hi, points)
    atoms = [m.atoms()[0] for m in amb.members if m.atoms() is not None]
    return np.unique(np.concatenate([grid, np.asarray(extra, dtype=float), *atoms]))


def check_markov(amb: AmbiguitySet, f: TestFunction, x: float) -> BoundReport:
    """V(X >= x) <= E f(X) / f(x) for positive nondecreasing ``f``."""
    grid = working_grid(amb, [x])
    values = f(grid)
    if np.any(values <= 0):
        raise ValueError(f"{f.name} must be positive on the working domain")
    if np.any(np.diff(values) < 0):
        i = int(np.argmax(np.diff(values) < 0))
        raise MonotonicityViolation(f"{f.name} decreases between {grid[i]:g} and {grid[i + 1]:g}")
    lhs = capacity_V(amb, IntervalSet.at_least(x))
    rhs = upper_expect(amb, f) / float(f(x))
    return BoundReport(lhs, rhs, lhs <= rhs + INEQUALITY_SLACK)


def check_chebyshev(amb: AmbiguitySet, c: float) -> BoundReport:
    """V(|X - EX| >= c) <= E|X - EX|^2 / c^2 with EX the upper mean."""
    if not c > 0:
        raise ValidationError("c", "must be positive")
    mean = upper_expect(amb, identity())
    event = IntervalSet.open(mean - c, mean + c).complement()
    lhs = capacity_V(amb, event)
    rhs = upper_expect(amb, centered_square(mean)) / (c * c)
    return BoundReport(lhs, rhs, lhs <= rhs + INEQUALITY_SLACK)


def check_sublinearity(
    amb: AmbiguitySet,
    phi1: TestFunction,
    phi2: TestFunction,
    lam: float,
    c: float,
    tol: float = AXIOM_TOL,
) -> AxiomReport:
    """Test the four defining properties of an upper expectation on one case."""
    if lam < 0:
        raise ValidationError("lam", "must be nonnegative")
    e1 = upper_expect(amb, phi1)
    e2 = upper_expect(amb, phi2)
    e_sum = upper_expect(amb, phi1 + phi2)
    e_scaled = upper_expect(amb, phi1.scaled(lam))
    e_const = upper_expect(amb, constant(c))

    grid = working_grid(amb)
    dominates = bool(np.all(phi1(grid) >= phi2(grid)))
    monotone = (e1 >= e2 - tol) if dominates else True
    scale = max(1.0, abs(lam * e1))
    return AxiomReport(
        monotonicity=monotone,
        constants=abs(e_const - c) <= tol * max(1.0, abs(c)),
        homogeneity=abs(e_scaled - lam * e1) <= tol * scale,
        subadditivity=e_sum <= e1 + e2 + tol * max(1.0, abs(e1) + abs(e2)),
        values={"E1": e1, "E2": e2, "E_sum": e_sum, "E_scaled": e_scaled, "E_const": e_const},
    )
