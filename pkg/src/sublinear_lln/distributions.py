"""Scalar probability laws with cdf, tail, quantile, density and sampling.

Every law is an immutable dataclass.  Vectorized methods take and return
numpy arrays; scalars go through ``np.asarray`` so they work as well.

``cdf(x)`` is ``P(X <= x)`` and ``cdf_left(x)`` is ``P(X < x)``; the two
differ only at atoms.  ``quantile(u)`` is the left-continuous inverse
``inf{x : cdf(x) >= u}``, so inverse-transform draws with a shared uniform
are monotonically coupled across laws.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Any, ClassVar

import numpy as np
from scipy import special

from .errors import ParseError, ValidationError

E = math.e
ATOM_SUM_TOL = 1e-12


def _arr(x) -> np.ndarray:
    return np.asarray(x, dtype=float)


class Distribution:
    """Interface shared by all laws."""

    kind: ClassVar[str]
    # sup of p with E|X|^p finite; the moment of order exactly this value is infinite
    moment_limit: ClassVar[float] = math.inf
    discrete: ClassVar[bool] = False

    def cdf(self, x):
        raise NotImplementedError

    def cdf_left(self, x):
        return self.cdf(x)

    def sf(self, x):
        """P(X > x)."""
        return 1.0 - self.cdf(x)

    def sf_left(self, x):
        """P(X >= x)."""
        return self.sf(x)

    def isf(self, v):
        """quantile(1 - v), accurate for tiny v."""
        return self.quantile(1.0 - _arr(v))

    def abs_tail(self, t):
        """P(|X| > t) for t >= 0."""
        t = _arr(t)
        return self.cdf_left(-t) + self.sf(t)

    def quantile(self, u):
        raise NotImplementedError

    def pdf(self, x):
        raise NotImplementedError

    def support(self) -> tuple[float, float]:
        return (-math.inf, math.inf)

    def breakpoints(self) -> tuple[float, ...]:
        """Points where the density has a kink or jump."""
        return ()

    def atoms(self) -> tuple[np.ndarray, np.ndarray] | None:
        return None

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        return self.quantile(open_uniform(rng, size))

    def has_finite_moment(self, order: float) -> bool:
        return order < self.moment_limit

    def params(self) -> dict[str, Any]:
        raise NotImplementedError

    def to_record(self) -> dict[str, Any]:
        return {"kind": self.kind, **self.params()}


def open_uniform(rng: np.random.Generator, size: int) -> np.ndarray:
    """Uniforms on the open interval (0, 1): midpoints of the 2**-53 lattice."""
    return rng.random(size) + 2.0**-54


@dataclass(frozen=True)
class Normal(Distribution):
    mean: float
    stddev: float
    kind: ClassVar[str] = "Normal"

    def __post_init__(self):
        if not self.stddev > 0:
            raise ValidationError("stddev", "must be positive")

    def cdf(self, x):
        return special.ndtr((_arr(x) - self.mean) / self.stddev)

    def sf(self, x):
        return special.ndtr((self.mean - _arr(x)) / self.stddev)

    def quantile(self, u):
        return self.mean + self.stddev * special.ndtri(_arr(u))

    def isf(self, v):
        return self.mean - self.stddev * special.ndtri(_arr(v))

    def pdf(self, x):
        z = (_arr(x) - self.mean) / self.stddev
        return np.exp(-0.5 * z * z) / (self.stddev * math.sqrt(2.0 * math.pi))

    def params(self):
        return {"mean": self.mean, "stddev": self.stddev}


@dataclass(frozen=True)
class Uniform(Distribution):
    lo: float
    hi: float
    kind: ClassVar[str] = "Uniform"

    def __post_init__(self):
        if not self.hi > self.lo:
            raise ValidationError("hi", "must exceed lo")

    def cdf(self, x):
        return np.clip((_arr(x) - self.lo) / (self.hi - self.lo), 0.0, 1.0)

    def sf(self, x):
        return np.clip((self.hi - _arr(x)) / (self.hi - self.lo), 0.0, 1.0)

    def quantile(self, u):
        return self.lo + _arr(u) * (self.hi - self.lo)

    def isf(self, v):
        return self.hi - _arr(v) * (self.hi - self.lo)

    def pdf(self, x):
        x = _arr(x)
        return np.where((x >= self.lo) & (x <= self.hi), 1.0 / (self.hi - self.lo), 0.0)

    def support(self):
        return (self.lo, self.hi)

    def breakpoints(self):
        return (self.lo, self.hi)

    def params(self):
        return {"lo": self.lo, "hi": self.hi}


class _Atomic(Distribution):
    """Shared machinery for laws with finitely many atoms."""

    discrete: ClassVar[bool] = True
    _values: np.ndarray
    _probs: np.ndarray
    _cum: np.ndarray

    def _set_atoms(self, values, probs):
        values = np.asarray(values, dtype=float)
        probs = np.asarray(probs, dtype=float)
        order = np.argsort(values, kind="stable")
        values, probs = values[order], probs[order]
        uniq, inverse = np.unique(values, return_inverse=True)
        merged = np.zeros(len(uniq))
        np.add.at(merged, inverse, probs)
        keep = merged > 0
        object.__setattr__(self, "_values", uniq[keep])
        object.__setattr__(self, "_probs", merged[keep])
        object.__setattr__(self, "_cum", np.cumsum(merged[keep]))

    def atoms(self):
        return self._values, self._probs

    def cdf(self, x):
        idx = np.searchsorted(self._values, _arr(x), side="right")
        return np.concatenate([[0.0], self._cum])[idx]

    def cdf_left(self, x):
        idx = np.searchsorted(self._values, _arr(x), side="left")
        return np.concatenate([[0.0], self._cum])[idx]

    def sf(self, x):
        idx = np.searchsorted(self._values, _arr(x), side="right")
        tail = np.concatenate([np.cumsum(self._probs[::-1])[::-1], [0.0]])
        return tail[idx]

    def sf_left(self, x):
        idx = np.searchsorted(self._values, _arr(x), side="left")
        tail = np.concatenate([np.cumsum(self._probs[::-1])[::-1], [0.0]])
        return tail[idx]

    def quantile(self, u):
        idx = np.searchsorted(self._cum, _arr(u), side="left")
        return self._values[np.minimum(idx, len(self._values) - 1)]

    def support(self):
        return (float(self._values[0]), float(self._values[-1]))

    def breakpoints(self):
        return tuple(float(v) for v in self._values)


@dataclass(frozen=True)
class TwoPoint(_Atomic):
    low: float
    high: float
    p_high: float
    kind: ClassVar[str] = "TwoPoint"

    def __post_init__(self):
        if not self.high > self.low:
            raise ValidationError("high", "must exceed low")
        if not 0.0 <= self.p_high <= 1.0:
            raise ValidationError("p_high", "must lie in [0, 1]")
        self._set_atoms([self.low, self.high], [1.0 - self.p_high, self.p_high])

    def params(self):
        return {"low": self.low, "high": self.high, "p_high": self.p_high}


@dataclass(frozen=True)
class DiscreteAtoms(_Atomic):
    points: tuple[tuple[float, float], ...]
    kind: ClassVar[str] = "DiscreteAtoms"

    def __post_init__(self):
        pts = tuple((float(x), float(p)) for x, p in self.points)
        object.__setattr__(self, "points", pts)
        if not pts:
            raise ValidationError("atoms", "at least one atom required")
        probs = [p for _, p in pts]
        if any(p < 0 for p in probs):
            raise ValidationError("atoms", "probabilities must be nonnegative")
        if abs(math.fsum(probs) - 1.0) > ATOM_SUM_TOL:
            raise ValidationError("atoms", f"probabilities sum to {math.fsum(probs)!r}, not 1")
        self._set_atoms([x for x, _ in pts], probs)

    def params(self):
        return {"atoms": [[x, p] for x, p in self.points]}


@dataclass(frozen=True)
class Pareto(Distribution):
    alpha: float
    scale: float
    kind: ClassVar[str] = "Pareto"

    def __post_init__(self):
        if not self.alpha > 0:
            raise ValidationError("alpha", "must be positive")
        if not self.scale > 0:
            raise ValidationError("scale", "must be positive")

    @property
    def moment_limit(self):  # type: ignore[override]
        return self.alpha

    def sf(self, x):
        x = _arr(x)
        with np.errstate(divide="ignore", invalid="ignore"):
            tail = (self.scale / np.maximum(x, self.scale)) ** self.alpha
        return np.where(x < self.scale, 1.0, tail)

    def cdf(self, x):
        return 1.0 - self.sf(x)

    def quantile(self, u):
        return self.scale * (1.0 - _arr(u)) ** (-1.0 / self.alpha)

    def isf(self, v):
        return self.scale * _arr(v) ** (-1.0 / self.alpha)

    def pdf(self, x):
        x = _arr(x)
        safe = np.maximum(x, self.scale)
        return np.where(x >= self.scale, self.alpha * self.scale**self.alpha / safe ** (self.alpha + 1), 0.0)

    def support(self):
        return (self.scale, math.inf)

    def breakpoints(self):
        return (self.scale,)

    def params(self):
        return {"alpha": self.alpha, "scale": self.scale}


@dataclass(frozen=True)
class Cauchy(Distribution):
    location: float
    scale: float
    kind: ClassVar[str] = "Cauchy"
    moment_limit: ClassVar[float] = 1.0

    def __post_init__(self):
        if not self.scale > 0:
            raise ValidationError("scale", "must be positive")

    def cdf(self, x):
        z = (_arr(x) - self.location) / self.scale
        return np.arctan2(1.0, -z) / math.pi

    def sf(self, x):
        z = (_arr(x) - self.location) / self.scale
        return np.arctan2(1.0, z) / math.pi

    def quantile(self, u):
        return self.location + self.scale * np.tan(math.pi * (_arr(u) - 0.5))

    def isf(self, v):
        return self.location + self.scale / np.tan(math.pi * _arr(v))

    def pdf(self, x):
        z = (_arr(x) - self.location) / self.scale
        return 1.0 / (math.pi * self.scale * (1.0 + z * z))

    def params(self):
        return {"location": self.location, "scale": self.scale}


def log_tail(t):
    """min(1, e / (t ln t)) for t >= e, and 1 below e."""
    t = _arr(t)
    safe = np.maximum(t, E)
    return np.where(t >= E, np.minimum(1.0, E / (safe * np.log(safe))), 1.0)


def log_tail_inverse(q):
    """Solve e / (t ln t) = q for t >= e, q in (0, 1]: t = c / W(c), c = e / q."""
    c = E / _arr(q)
    w = special.lambertw(c).real
    return c / w


def log_tail_inverse_bisect(q: float, tol: float = 1e-13) -> float:
    """Reference inversion of the log tail by bisection on s = ln t.

    Compares logarithms, ln(e / (t ln t)) = 1 - s - ln s, so tiny q stays finite.
    """
    if q >= 1.0:
        return E
    target = math.log(q)
    lo, hi = 1.0, 2.0
    while 1.0 - hi - math.log(hi) > target:
        hi *= 2.0
    while hi - lo > tol * hi:
        mid = 0.5 * (lo + hi)
        if 1.0 - mid - math.log(mid) > target:
            lo = mid
        else:
            hi = mid
    return math.exp(0.5 * (lo + hi))


@dataclass(frozen=True)
class SymmetricLogTail(Distribution):
    """Symmetric law with P(|X| > t) = min(1, e / (t ln t)), t >= e.

    No mass in (-e, e); E|X|^p is finite exactly for p < 1.
    """

    kind: ClassVar[str] = "SymmetricLogTail"
    moment_limit: ClassVar[float] = 1.0

    def sf(self, x):
        x = _arr(x)
        return np.where(x >= 0, 0.5 * log_tail(np.abs(x)), 1.0 - 0.5 * log_tail(np.abs(x)))

    def cdf(self, x):
        x = _arr(x)
        return np.where(x < 0, 0.5 * log_tail(np.abs(x)), 1.0 - 0.5 * log_tail(np.abs(x)))

    def abs_tail(self, t):
        return log_tail(np.abs(_arr(t)))

    def quantile(self, u):
        u = _arr(u)
        lower = u <= 0.5
        q = np.where(lower, 2.0 * u, 2.0 * (1.0 - u))
        q = np.clip(q, np.finfo(float).tiny, 1.0)
        mag = log_tail_inverse(q)
        return np.where(lower, -mag, mag)

    def isf(self, v):
        v = _arr(v)
        return np.where(v < 0.5, log_tail_inverse(np.clip(2.0 * v, np.finfo(float).tiny, 1.0)), self.quantile(1.0 - v))

    def pdf(self, x):
        a = np.abs(_arr(x))
        safe = np.maximum(a, E)
        lg = np.log(safe)
        return np.where(a >= E, 0.5 * E * (lg + 1.0) / (safe * lg) ** 2, 0.0)

    def breakpoints(self):
        return (-E, E)

    def params(self):
        return {}


KINDS: dict[str, type[Distribution]] = {
    cls.kind: cls
    for cls in (Normal, Uniform, TwoPoint, DiscreteAtoms, Pareto, Cauchy, SymmetricLogTail)
}


def from_record(record: dict[str, Any], where: str = "distribution") -> Distribution:
    """Build a law from ``{"kind": ..., <named parameters>}``."""
    if not isinstance(record, dict) or "kind" not in record:
        raise ParseError("expected an object with a 'kind' tag", field=where)
    kind = record["kind"]
    if kind not in KINDS:
        raise ParseError(f"unknown kind {kind!r}; expected one of {sorted(KINDS)}", field=where)
    params = {k: v for k, v in record.items() if k != "kind"}
    try:
        if kind == "DiscreteAtoms":
            atoms = params.pop("atoms")
            if params:
                raise TypeError(f"unexpected parameters {sorted(params)}")
            return DiscreteAtoms(tuple((float(x), float(p)) for x, p in atoms))
        return KINDS[kind](**{k: float(v) for k, v in params.items()})
    except ValidationError as exc:
        raise ValidationError(f"{where}.{exc.field}", exc.reason) from None
    except (TypeError, KeyError, ValueError) as exc:
        raise ParseError(f"bad parameters for {kind}: {exc}", field=where) from None
