"""Smooth truncation, truncated means, tail functionals and limit-condition checks.

The cutoff at level ``n`` is 1 on ``[-n, n]``, 0 outside ``[-(n+1), n+1]``
and linear in between.  Truncated variables are ``Y = X * chi_n(|X|)``.

Limits such as "psi_n(y) -> 0" cannot be checked on a machine.  The checkers
here are finite-schedule surrogates: they look at the largest scheduled level
and the trend over the last three levels, with explicit tolerances.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Iterable, Sequence

import numpy as np

from . import quadrature
from .core import AmbiguitySet, IntervalSet, TestFunction, capacity_V, lower_expect, upper_expect
from .distributions import DiscreteAtoms, Distribution
from .errors import MissingJoint, ValidationError

TREND_TOL = 1e-12


# ---------------------------------------------------------------- cutoff


def chi(n: int, x):
    """Piecewise-linear cutoff: 1 for |x| <= n, 0 for |x| >= n + 1."""
    if n < 1:
        raise ValidationError("n", "level must be a positive integer")
    return np.clip(n + 1.0 - np.abs(np.asarray(x, dtype=float)), 0.0, 1.0)


def tilde_chi(n: int, x):
    return 1.0 - chi(n, x)


def truncate(n: int, x):
    x = np.asarray(x, dtype=float)
    return x * chi(n, x)


def truncation_function(n: int) -> TestFunction:
    """x -> x chi_n(|x|), bounded by n + 1 and supported on [-(n+1), n+1]."""
    return TestFunction(
        lambda x: truncate(n, x),
        0,
        float(2 * n + 2),
        bounded=True,
        support=(-(n + 1.0), n + 1.0),
        kinks=(-(n + 1.0), -float(n), 0.0, float(n), n + 1.0),
        name=f"Y[{n}]",
    )


def truncated_square_function(n: int) -> TestFunction:
    return TestFunction(
        lambda x: truncate(n, x) ** 2,
        1,
        float(4 * (n + 1) ** 2),
        bounded=True,
        support=(-(n + 1.0), n + 1.0),
        kinks=(-(n + 1.0), -float(n), 0.0, float(n), n + 1.0),
        name=f"Y[{n}]^2",
    )


def truncated_abs_function(n: int) -> TestFunction:
    return TestFunction(
        lambda x: np.abs(truncate(n, x)),
        0,
        float(2 * n + 2),
        bounded=True,
        support=(-(n + 1.0), n + 1.0),
        kinks=(-(n + 1.0), -float(n), 0.0, float(n), n + 1.0),
        name=f"|Y[{n}]|",
    )


@lru_cache(maxsize=4096)
def truncated_mean_upper(amb: AmbiguitySet, n: int) -> float:
    return upper_expect(amb, truncation_function(n))


@lru_cache(maxsize=4096)
def truncated_mean_lower(amb: AmbiguitySet, n: int) -> float:
    return lower_expect(amb, truncation_function(n))


# ---------------------------------------------------------------- models


@dataclass(frozen=True)
class JointLaw:
    """A joint law of a coordinate pair as weighted atoms ``(a, b, p)``."""

    atoms: tuple[tuple[float, float, float], ...]

    def __post_init__(self):
        atoms = tuple((float(a), float(b), float(p)) for a, b, p in self.atoms)
        object.__setattr__(self, "atoms", atoms)
        if any(p < 0 for _, _, p in atoms):
            raise ValidationError("joint.atoms", "probabilities must be nonnegative")
        if abs(math.fsum(p for _, _, p in atoms) - 1.0) > 1e-12:
            raise ValidationError("joint.atoms", "probabilities must sum to 1")

    def marginal(self, which: int) -> DiscreteAtoms:
        return DiscreteAtoms(tuple((atom[which], atom[2]) for atom in self.atoms))

    def swapped(self) -> JointLaw:
        return JointLaw(tuple((b, a, p) for a, b, p in self.atoms))


@dataclass(frozen=True)
class SequenceModel:
    """The sequence X_1, X_2, ... as per-coordinate ambiguity sets.

    Either ``coordinates`` lists the sets explicitly (1-based coordinate k is
    ``coordinates[k - 1]``) or ``rule`` is reused for every k.  Dependence is
    the product of selected members unless ``joint_pairs`` (explicit, keyed
    by ``(i, k)`` with ``i < k``) or ``pair_rule`` (one family for all pairs)
    describe joint pair laws.
    """

    coordinates: tuple[AmbiguitySet, ...] | None = None
    rule: AmbiguitySet | None = None
    joint_pairs: tuple[tuple[tuple[int, int], tuple[JointLaw, ...]], ...] | None = None
    pair_rule: tuple[JointLaw, ...] | None = None

    def __post_init__(self):
        if (self.coordinates is None) == (self.rule is None):
            raise ValidationError("model", "give exactly one of coordinates or rule")
        if self.coordinates is not None:
            object.__setattr__(self, "coordinates", tuple(self.coordinates))
            if not self.coordinates:
                raise ValidationError("model.coordinates", "must be nonempty")
        if self.joint_pairs is not None:
            object.__setattr__(
                self, "joint_pairs", tuple((tuple(key), tuple(laws)) for key, laws in self.joint_pairs)
            )
        self._check_marginals()

    @classmethod
    def iid(cls, amb: AmbiguitySet, pair_rule: Sequence[JointLaw] | None = None) -> SequenceModel:
        return cls(rule=amb, pair_rule=tuple(pair_rule) if pair_rule is not None else None)

    @classmethod
    def explicit(cls, sets: Sequence[AmbiguitySet], joint_pairs=None) -> SequenceModel:
        jp = None
        if joint_pairs is not None:
            jp = tuple(sorted((tuple(sorted(k)), tuple(v)) for k, v in dict(joint_pairs).items()))
        return cls(coordinates=tuple(sets), joint_pairs=jp)

    @property
    def is_iid(self) -> bool:
        return self.rule is not None

    @property
    def is_product(self) -> bool:
        return self.joint_pairs is None and self.pair_rule is None

    @property
    def n_max(self) -> float:
        return math.inf if self.coordinates is None else len(self.coordinates)

    def amb(self, k: int) -> AmbiguitySet:
        """Ambiguity set of the 1-based coordinate k."""
        if self.rule is not None:
            return self.rule
        if not 1 <= k <= len(self.coordinates):
            raise ValidationError("k", f"coordinate {k} outside 1..{len(self.coordinates)}")
        return self.coordinates[k - 1]

    def require(self, n: int) -> None:
        if n < 1:
            raise ValidationError("n", "level must be a positive integer")
        if n > self.n_max:
            raise ValidationError("n", f"model only describes {self.n_max} coordinates")

    def sets(self, n: int) -> list[AmbiguitySet]:
        self.require(n)
        return [self.amb(k) for k in range(1, n + 1)]

    def groups(self, n: int) -> list[tuple[AmbiguitySet, int]]:
        """Distinct ambiguity sets among coordinates 1..n with multiplicities, first-seen order."""
        self.require(n)
        if self.rule is not None:
            return [(self.rule, n)]
        counts: dict[AmbiguitySet, int] = {}
        for k in range(1, n + 1):
            a = self.amb(k)
            counts[a] = counts.get(a, 0) + 1
        return list(counts.items())

    @property
    def discrete(self) -> bool:
        if self.rule is not None:
            return self.rule.discrete
        return all(a.discrete for a in self.coordinates)

    def joint(self, i: int, k: int) -> tuple[JointLaw, ...]:
        """Joint laws of (X_i, X_k), oriented so the first atom component is X_i."""
        if i == k:
            raise ValidationError("pair", "i and k must differ")
        if self.pair_rule is not None:
            return self.pair_rule if i < k else tuple(j.swapped() for j in self.pair_rule)
        key = (min(i, k), max(i, k))
        for pair, laws in self.joint_pairs or ():
            if pair == key:
                return laws if i < k else tuple(j.swapped() for j in laws)
        raise MissingJoint(f"no joint law for pair {key}")

    def _check_marginals(self) -> None:
        entries = []
        if self.pair_rule is not None:
            if self.rule is None:
                raise ValidationError("pair_rule", "pair_rule needs an i.i.d. rule model")
            entries.append(((1, 2), self.pair_rule))
        for pair, laws in self.joint_pairs or ():
            entries.append((pair, laws))
        for (i, k), laws in entries:
            for which, coord in ((0, i), (1, k)):
                amb = self.amb(coord)
                for law in laws:
                    if not any(_same_atoms(law.marginal(which), m) for m in amb.members):
                        raise ValidationError(
                            f"joint_pairs[{i},{k}]",
                            f"marginal of X_{coord} is not a member of its ambiguity set",
                        )


def _same_atoms(a: Distribution, b: Distribution) -> bool:
    if a.atoms() is None or b.atoms() is None:
        return False
    (va, pa), (vb, pb) = a.atoms(), b.atoms()
    return len(va) == len(vb) and np.array_equal(va, vb) and np.allclose(pa, pb, rtol=0, atol=1e-12)


# ---------------------------------------------------------------- truncated means


@dataclass(frozen=True)
class TruncatedMeans:
    n: int
    mu_plus: np.ndarray = field(repr=False)
    mu_minus: np.ndarray = field(repr=False)
    mu_bar: float
    mu_under: float


def mu_bounds(model: SequenceModel, n: int) -> TruncatedMeans:
    """Per-coordinate truncated upper/lower means and their Cesaro averages."""
    sets = model.sets(n)
    plus = np.array([truncated_mean_upper(a, n) for a in sets])
    minus = np.array([truncated_mean_lower(a, n) for a in sets])
    # fixed sequential summation order
    return TruncatedMeans(n, plus, minus, math.fsum(plus) / n, math.fsum(minus) / n)


# ---------------------------------------------------------------- tail functionals


def gamma_hat(amb: AmbiguitySet, t: float) -> float:
    """Upper capacity of {|X| > t}."""
    if not t > 0:
        raise ValidationError("t", "must be positive")
    return capacity_V(amb, IntervalSet.abs_above(t))


def psi(model: SequenceModel, n: int, y: float) -> float:
    """sum_{k<=n} y * V(|X_k| > n y)."""
    if not 0 < y <= 1:
        raise ValidationError("y", "must lie in (0, 1]")
    total = 0.0
    for amb, count in model.groups(n):
        total += count * y * gamma_hat(amb, n * y)
    return total


def default_y_grid(points: int = 129, geometric: int = 32, y_min: float = 1e-6) -> np.ndarray:
    """Geometric spacing up to 1/128, then uniform up to 1."""
    knee = 1.0 / 128
    geo = np.geomspace(y_min, knee, geometric, endpoint=False)
    lin = np.linspace(knee, 1.0, points - geometric)
    return np.concatenate([geo, lin])


def vanishing_grid(points: int = 20) -> np.ndarray:
    """Coarse uniform grid k/points used for the pointwise vanishing check."""
    return np.arange(1, points + 1) / points


@dataclass(frozen=True)
class PsiProfile:
    n: int
    y_grid: np.ndarray = field(repr=False)
    values: np.ndarray = field(repr=False)
    integral: float


def _grid_integral(y: np.ndarray, values: np.ndarray) -> float:
    # [0, y0] contributes the trapezoid towards psi(0+) = 0, at most n y0^2 / 2
    return 0.5 * y[0] * values[0] + float(np.trapezoid(values, y))


def psi_profile(model: SequenceModel, n: int, grid: Sequence[float] | None = None) -> PsiProfile:
    y = default_y_grid() if grid is None else np.asarray(grid, dtype=float)
    if np.any(y <= 0) or np.any(y > 1) or np.any(np.diff(y) <= 0):
        raise ValidationError("grid", "must be strictly increasing inside (0, 1]")
    values = np.array([psi(model, n, float(v)) for v in y])
    return PsiProfile(n, y, values, _grid_integral(y, values))


def psi_integral(model: SequenceModel, n: int, tol: float = 1e-12) -> float:
    """int_0^1 psi_n(y) dy by adaptive quadrature in t = n y.

    Equals n^-2 sum_k int_0^n t gamma_hat_k(t) dt; atoms of every member
    become panel edges so the piecewise-constant discrete tails are exact.
    """
    total = 0.0
    for amb, count in model.groups(n):
        kinks = set()
        for m in amb.members:
            kinks.update(abs(b) for b in m.breakpoints())
        kinks = sorted(k for k in kinks if 0 < k < n)

        def integrand(t, amb=amb):
            tails = np.max([m.abs_tail(t) for m in amb.members], axis=0)
            return t * tails

        value, _ = quadrature.integrate(integrand, 0.0, float(n), kinks, tol * n * n)
        total += count * value
    return total / (n * n)


# ---------------------------------------------------------------- condition checks


def _nonincreasing(seq: Sequence[float]) -> bool:
    return all(b <= a + TREND_TOL for a, b in zip(seq[:-1], seq[1:]))


@dataclass(frozen=True)
class PsiVerdict:
    passed: bool
    worst_n: int
    worst_y: float
    worst_value: float
    trend_ok: bool
    profiles: tuple[PsiProfile, ...] = field(repr=False, default=())


def check_psi_vanishes(
    model: SequenceModel,
    n_schedule: Sequence[int],
    grid: Sequence[float] | None = None,
    tol: float = 0.1,
) -> PsiVerdict:
    """Surrogate for psi_n(y) -> 0 at every grid point.

    Passes when the largest value over the grid at the largest scheduled n is
    below ``tol`` and, at every grid point, the values over the last three
    scheduled levels are nonincreasing.  The default grid is
    :func:`vanishing_grid`; note the limit is pointwise, so grids reaching
    very small y need correspondingly larger n.
    """
    sched = list(n_schedule)
    if any(b <= a for a, b in zip(sched[:-1], sched[1:])):
        raise ValidationError("n_schedule", "must be strictly increasing")
    y = vanishing_grid() if grid is None else np.asarray(grid, dtype=float)
    profiles = tuple(psi_profile(model, n, y) for n in sched)
    last = profiles[-1]
    i = int(np.argmax(last.values))
    tail = profiles[-3:]
    trend_ok = all(_nonincreasing([p.values[j] for p in tail]) for j in range(len(y)))
    worst = float(last.values[i])
    return PsiVerdict(worst < tol and trend_ok, last.n, float(y[i]), worst, trend_ok, profiles)


@dataclass(frozen=True)
class UIVerdict:
    passed: bool
    m_schedule: tuple[float, ...]
    sup_tail_integrals: tuple[float, ...]


def check_uniform_integrability(
    profiles: Sequence[PsiProfile],
    m_schedule: Sequence[float],
    tol: float = 0.05,
) -> UIVerdict:
    """Surrogate for uniform integrability over the given finite profile family.

    For each level M computes sup_n int psi_n 1(psi_n > M) dy on the shared
    grid; passes when the value at the largest M is below ``tol``.  This says
    nothing about profiles that were not computed.
    """
    if not profiles:
        raise ValidationError("profiles", "need at least one profile")
    y = profiles[0].y_grid
    for p in profiles:
        if not np.array_equal(p.y_grid, y):
            raise ValidationError("profiles", "profiles must share one y grid")
    ms = [float(m) for m in m_schedule]
    if any(b <= a for a, b in zip(ms[:-1], ms[1:])):
        raise ValidationError("M_schedule", "must be strictly increasing")
    sups = []
    for m in ms:
        sups.append(max(_grid_integral(y, np.where(p.values > m, p.values, 0.0)) for p in profiles))
    return UIVerdict(sups[-1] < tol, tuple(ms), tuple(sups))


@dataclass(frozen=True)
class KolmogorovVerdict:
    passed: bool
    t_schedule: tuple[float, ...]
    values: tuple[float, ...]


def kolmogorov_condition(dist: Distribution, t_schedule: Sequence[float], tol: float = 0.25) -> KolmogorovVerdict:
    """Surrogate for t (F(-t) + 1 - F(t)) -> 0 on an increasing schedule."""
    ts = [float(t) for t in t_schedule]
    if any(t <= 0 for t in ts) or any(b <= a for a, b in zip(ts[:-1], ts[1:])):
        raise ValidationError("t_schedule", "must be positive and strictly increasing")
    values = [t * (float(dist.cdf(-t)) + float(dist.sf(t))) for t in ts]
    passed = values[-1] < tol and _nonincreasing(values[-3:])
    return KolmogorovVerdict(passed, tuple(ts), tuple(values))


# ---------------------------------------------------------------- correlation


def kappa(model: SequenceModel, n: int, i: int, k: int) -> float:
    """Upper truncated cross-moment of (X_i, X_k), centered at the upper means."""
    if i == k:
        raise ValidationError("pair", "i and k must differ")
    model.require(max(i, k))
    mu_i = truncated_mean_upper(model.amb(i), n)
    mu_k = truncated_mean_upper(model.amb(k), n)
    if model.is_product:
        # independence nests the expectations, and E(Y_i - mu_i) = 0 inside
        return 0.0
    best = -math.inf
    for law in model.joint(i, k):
        arr = np.array(law.atoms)
        yi = truncate(n, arr[:, 0]) - mu_i
        yk = truncate(n, arr[:, 1]) - mu_k
        best = max(best, float(np.dot(arr[:, 2], yi * yk)))
    return best


@dataclass(frozen=True)
class CesaroResult:
    value: float
    passed: bool
    raw_sum: float


def cesaro_condition(model: SequenceModel, n: int, tol: float = 0.05) -> CesaroResult:
    """(1/n^2) (sum_{i != k} kappa_{n,i,k})^+ and whether it is below ``tol``."""
    model.require(n)
    if model.is_product:
        return CesaroResult(0.0, True, 0.0)
    if model.pair_rule is not None:
        # all pairs share one family; kappa is symmetric in (i, k)
        raw = n * (n - 1) * kappa(model, n, 1, 2)
    else:
        raw = 0.0
        for i in range(1, n + 1):
            for k in range(i + 1, n + 1):
                raw += 2.0 * kappa(model, n, i, k)
    value = max(raw, 0.0) / (n * n)
    return CesaroResult(value, value < tol, raw)


# ---------------------------------------------------------------- CSV


def write_psi_csv(profiles: Iterable[PsiProfile], path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["n", "y", "psi"])
        for p in profiles:
            for y, v in zip(p.y_grid, p.values):
                w.writerow([p.n, repr(float(y)), repr(float(v))])


def write_means_csv(means: Iterable[TruncatedMeans], path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["n", "k", "mu_plus", "mu_minus"])
        for m in means:
            for k, (hi, lo) in enumerate(zip(m.mu_plus, m.mu_minus), start=1):
                w.writerow([m.n, k, repr(float(hi)), repr(float(lo))])
