"""Capacities of path events of S_n / n by search over product selections.

A selection fixes one member of each coordinate's ambiguity set; the path
law is then the product of the selected members.  The upper capacity of a
path event is estimated as the largest Monte Carlo event frequency over the
selections visited by a coordinate-ascent search, so it is a lower-bound
style estimate of the true supremum.

Draws use common random numbers: coordinate k of repetition r is always the
inverse-transform image of the same uniform, whichever member is selected.
Searching runs on one set of substreams and the reported frequency on
another, so the reported value of the chosen selection is not inflated by
the search itself.
"""

from __future__ import annotations

import csv
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import rng
from .errors import SamplerUnavailable, TooLarge, ValidationError
from .truncation import (
    PsiVerdict,
    SequenceModel,
    TruncatedMeans,
    UIVerdict,
    mu_bounds,
    truncate,
)

EVENT_TOL = 1e-9
DEFAULT_ENUMERATION_CAP = 10**7
KINDS = ("upper", "lower", "band", "outside")


@dataclass(frozen=True)
class EstimateBudget:
    mc_reps: int = 1000
    restarts: int = 2
    max_passes: int = 5
    seed: int = 0
    jobs: int = 1

    def __post_init__(self):
        if self.mc_reps < 1:
            raise ValidationError("mc_reps", "must be positive")
        if self.restarts < 0:
            raise ValidationError("restarts", "must be nonnegative")
        if self.max_passes < 1:
            raise ValidationError("max_passes", "must be positive")
        if not 0 <= self.seed < rng.U64:
            raise ValidationError("seed", "must be an unsigned 64-bit integer")
        if self.jobs < 1:
            raise ValidationError("jobs", "must be positive")


@dataclass(frozen=True)
class PathEvent:
    """An event about S_n / n relative to the truncated mean frontiers.

    ``upper``: S_n/n >= mu_bar + eps; ``lower``: S_n/n <= mu_under - eps;
    ``band``: strictly between the two; ``outside``: complement of band.
    """

    kind: str
    epsilon: float

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValidationError("event.kind", f"expected one of {KINDS}")
        if not self.epsilon > 0:
            raise ValidationError("epsilon", "must be positive")

    def complement(self) -> PathEvent:
        swap = {"band": "outside", "outside": "band"}
        if self.kind not in swap:
            raise ValidationError("event.kind", f"complement of {self.kind!r} is not a PathEvent")
        return PathEvent(swap[self.kind], self.epsilon)

    def predicate(self, means: TruncatedMeans) -> Predicate:
        return Predicate(self.kind, means.mu_under - self.epsilon, means.mu_bar + self.epsilon)


@dataclass(frozen=True)
class Predicate:
    """Event on the path mean with explicit thresholds ``lo`` and ``hi``.

    Boundary comparisons carry an absolute slack of EVENT_TOL so closed
    events keep their boundary despite rounding in the thresholds.
    """

    kind: str
    lo: float
    hi: float

    def indicator(self, mean: np.ndarray) -> np.ndarray:
        above = mean >= self.hi - EVENT_TOL
        below = mean <= self.lo + EVENT_TOL
        if self.kind == "upper":
            return above
        if self.kind == "lower":
            return below
        if self.kind == "outside":
            return above | below
        return ~(above | below)

    def margin(self, mean: np.ndarray) -> np.ndarray:
        """Signed distance into the event; drives the search on flat frequencies."""
        if self.kind == "upper":
            return mean - self.hi
        if self.kind == "lower":
            return self.lo - mean
        if self.kind == "outside":
            return np.maximum(mean - self.hi, self.lo - mean)
        return np.minimum(mean - self.lo, self.hi - mean)


@dataclass(frozen=True)
class ProbabilityEstimate:
    p_hat: float
    stderr: float


@dataclass(frozen=True)
class CapacityEstimate:
    value: float
    stderr: float
    best_selection: tuple[int, ...] = field(repr=False)
    converged: bool = True
    candidates: int = 1


@dataclass(frozen=True)
class LowerCapacityEstimate:
    value: float
    stderr: float
    complement: CapacityEstimate = field(repr=False)


def _stderr(p: float, reps: int) -> float:
    return math.sqrt(max(p * (1.0 - p), 0.0) / reps)


def _check_product(model: SequenceModel) -> None:
    if not model.is_product:
        raise ValidationError("model.dependence", "path capacities need product dependence")


def _check_selection(model: SequenceModel, selection: Sequence[int], n: int) -> tuple[int, ...]:
    model.require(n)
    sel = tuple(int(s) for s in selection)
    if len(sel) != n:
        raise ValidationError("selection", f"length {len(sel)} does not match n = {n}")
    for k, s in enumerate(sel, start=1):
        if not 0 <= s < len(model.amb(k)):
            raise ValidationError("selection", f"index {s} invalid for coordinate {k}")
    return sel


def _draw(model: SequenceModel, k: int, member: int, u: np.ndarray, level: int | None) -> np.ndarray:
    dist = model.amb(k).members[member]
    try:
        x = dist.quantile(u)
    except NotImplementedError:
        raise SamplerUnavailable(f"{dist.kind} has no quantile function") from None
    return truncate(level, x) if level is not None else x


def _path_sums(
    model: SequenceModel,
    selection: Sequence[int],
    n: int,
    reps: int,
    seed: int,
    stream: int,
    level: int | None = None,
) -> np.ndarray:
    total = np.zeros(reps)
    for k in range(1, n + 1):
        u = rng.coordinate_uniforms(seed, k, reps, stream)
        total += _draw(model, k, selection[k - 1], u, level)
    return total


def sample_path(model: SequenceModel, selection: Sequence[int], n: int, seed: int) -> np.ndarray:
    """One path X_1..X_n under the product of the selected members (repetition 0)."""
    _check_product(model)
    sel = _check_selection(model, selection, n)
    return np.array(
        [_draw(model, k, sel[k - 1], rng.coordinate_uniforms(seed, k, 1), None)[0] for k in range(1, n + 1)]
    )


def _frequency(model, selection, n, pred: Predicate, budget: EstimateBudget, level=None) -> ProbabilityEstimate:
    sums = _path_sums(model, selection, n, budget.mc_reps, budget.seed, rng.EVAL, level)
    p = int(np.count_nonzero(pred.indicator(sums / n))) / budget.mc_reps
    return ProbabilityEstimate(p, _stderr(p, budget.mc_reps))


def event_probability_under(
    model: SequenceModel,
    selection: Sequence[int],
    event: PathEvent,
    n: int,
    budget: EstimateBudget,
) -> ProbabilityEstimate:
    """Monte Carlo frequency of ``event`` under one product selection."""
    _check_product(model)
    sel = _check_selection(model, selection, n)
    return _frequency(model, sel, n, event.predicate(mu_bounds(model, n)), budget)


# ---------------------------------------------------------------- search


def _score(pred: Predicate, sums: np.ndarray, n: int) -> tuple[int, float]:
    mean = sums / n
    return int(np.count_nonzero(pred.indicator(mean))), float(np.mean(pred.margin(mean)))


def _better(a: tuple[int, float], b: tuple[int, float]) -> bool:
    if a[0] != b[0]:
        return a[0] > b[0]
    return a[1] > b[1] + 1e-12 * (1.0 + abs(b[1]))


def _ascend(model, n, pred, budget: EstimateBudget, start: list[int], level) -> tuple[tuple[int, ...], bool]:
    sel = list(start)
    reps, seed = budget.mc_reps, budget.seed
    sums = _path_sums(model, sel, n, reps, seed, rng.SEARCH, level)
    for _ in range(budget.max_passes):
        changed = False
        for k in range(1, n + 1):
            size = len(model.amb(k))
            if size == 1:
                continue
            u = rng.coordinate_uniforms(seed, k, reps, rng.SEARCH)
            current = sel[k - 1]
            base = sums - _draw(model, k, current, u, level)
            best_j, best_sums = current, None
            best_score = _score(pred, sums, n)
            for j in range(size):
                if j == current:
                    continue
                trial = base + _draw(model, k, j, u, level)
                score = _score(pred, trial, n)
                if _better(score, best_score):
                    best_j, best_sums, best_score = j, trial, score
            if best_j != current:
                sel[k - 1] = best_j
                sums = best_sums
                changed = True
        if not changed:
            return tuple(sel), True
    return tuple(sel), False


def _starts(model: SequenceModel, n: int, budget: EstimateBudget) -> list[list[int]]:
    """Homogeneous selections (member j everywhere, clipped per coordinate), then random ones."""
    sizes = [len(model.amb(k)) for k in range(1, n + 1)]
    starts = [[min(j, s - 1) for s in sizes] for j in range(max(sizes))]
    for r in range(1, budget.restarts + 1):
        g = rng.substream(budget.seed, rng.RESTART, r)
        starts.append([int(g.integers(s)) for s in sizes])
    return starts


def search_capacity(
    model: SequenceModel,
    pred: Predicate,
    n: int,
    budget: EstimateBudget,
    level: int | None = None,
) -> CapacityEstimate:
    """Maximize the event frequency of ``pred`` over product selections.

    Ascent starts from every homogeneous selection plus ``budget.restarts``
    random ones.  ``level`` truncates every draw at that level first (paths
    of S'_n).
    """
    _check_product(model)
    model.require(n)
    if all(len(model.amb(k)) == 1 for k in range(1, n + 1)):
        est = _frequency(model, [0] * n, n, pred, budget, level)
        return CapacityEstimate(est.p_hat, est.stderr, (0,) * n, True, 1)

    starts = _starts(model, n, budget)
    if budget.jobs > 1:
        with ThreadPoolExecutor(max_workers=budget.jobs) as pool:
            runs = list(pool.map(lambda s: _ascend(model, n, pred, budget, s, level), starts))
    else:
        runs = [_ascend(model, n, pred, budget, s, level) for s in starts]

    candidates = list(dict.fromkeys(sel for sel, _ in runs))
    best, best_sel = None, None
    for sel in candidates:
        est = _frequency(model, sel, n, pred, budget, level)
        if best is None or est.p_hat > best.p_hat:
            best, best_sel = est, sel
    return CapacityEstimate(
        best.p_hat, best.stderr, best_sel, all(ok for _, ok in runs), len(candidates)
    )


def estimate_capacity_V(model: SequenceModel, event: PathEvent, n: int, budget: EstimateBudget) -> CapacityEstimate:
    """Search-based estimate of the upper capacity of a path event."""
    return search_capacity(model, event.predicate(mu_bounds(model, n)), n, budget)


def estimate_capacity_v(
    model: SequenceModel, event: PathEvent, n: int, budget: EstimateBudget
) -> LowerCapacityEstimate:
    """Lower capacity as one minus the upper capacity of the complement."""
    comp = estimate_capacity_V(model, event.complement(), n, budget)
    return LowerCapacityEstimate(1.0 - comp.value, comp.stderr, comp)


# ---------------------------------------------------------------- exact oracle


def _merge(values: np.ndarray, probs: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    uniq, inv = np.unique(values, return_inverse=True)
    return uniq, np.bincount(inv.ravel(), weights=probs, minlength=len(uniq))


def _member_atoms(model: SequenceModel, k: int, level: int | None):
    out = []
    for m in model.amb(k).members:
        atoms = m.atoms()
        if atoms is None:
            raise ValidationError("model", f"coordinate {k} has a non-atomic member {m.kind}")
        values, probs = atoms
        if level is not None:
            values = truncate(level, values)
        out.append((values, probs))
    return out


def enumeration_size(model: SequenceModel, n: int) -> int:
    size = 1
    for k in range(1, n + 1):
        amb = model.amb(k)
        if not amb.discrete:
            raise ValidationError("model", f"coordinate {k} has a non-atomic member")
        size *= len(amb) * max(len(m.atoms()[0]) for m in amb.members)
    return size


def exact_event_probability(
    model: SequenceModel, selection: Sequence[int], pred: Predicate, n: int, level: int | None = None
) -> float:
    """Exact probability of ``pred`` under one selection of an atomic model."""
    sel = _check_selection(model, selection, n)
    values, probs = np.zeros(1), np.ones(1)
    for k in range(1, n + 1):
        av, ap = _member_atoms(model, k, level)[sel[k - 1]]
        values, probs = _merge((values[:, None] + av[None, :]).ravel(), (probs[:, None] * ap[None, :]).ravel())
    return _prob(probs[pred.indicator(values / n)])


def _prob(masses: np.ndarray) -> float:
    # atom sums can overshoot 1 by an ulp
    return min(math.fsum(masses), 1.0)


def brute_force_predicate(
    model: SequenceModel,
    pred: Predicate,
    n: int,
    cap: int = DEFAULT_ENUMERATION_CAP,
    level: int | None = None,
) -> tuple[float, tuple[int, ...]]:
    """Exact max over all selections, by depth-first prefix convolution."""
    _check_product(model)
    model.require(n)
    size = enumeration_size(model, n)
    if size > cap:
        raise TooLarge(f"enumeration size {size} exceeds cap {cap}")
    atoms = [_member_atoms(model, k, level) for k in range(1, n + 1)]

    best = [-1.0, ()]

    def rec(k: int, values: np.ndarray, probs: np.ndarray, prefix: tuple[int, ...]):
        if k == n:
            p = _prob(probs[pred.indicator(values / n)])
            if p > best[0]:
                best[0], best[1] = p, prefix
            return
        for j, (av, ap) in enumerate(atoms[k]):
            v, q = _merge((values[:, None] + av[None, :]).ravel(), (probs[:, None] * ap[None, :]).ravel())
            rec(k + 1, v, q, prefix + (j,))

    rec(0, np.zeros(1), np.ones(1), ())
    return best[0], best[1]


def brute_force_capacity(
    model: SequenceModel, event: PathEvent, n: int, cap: int = DEFAULT_ENUMERATION_CAP
) -> float:
    """Exact upper capacity of ``event`` over product selections of an atomic model."""
    return brute_force_predicate(model, event.predicate(mu_bounds(model, n)), n, cap)[0]


# ---------------------------------------------------------------- experiments


@dataclass(frozen=True)
class ConvergenceRow:
    n: int
    epsilon: float
    mu_bar: float
    mu_under: float
    upper: CapacityEstimate
    lower: CapacityEstimate
    band: LowerCapacityEstimate
    psi_pass: bool | None
    ui_pass: bool | None
    seconds: float = field(compare=False)

    @property
    def converged(self) -> bool:
        return self.upper.converged and self.lower.converged and self.band.complement.converged


@dataclass(frozen=True)
class ConvergenceReport:
    rows: tuple[ConvergenceRow, ...]

    def column(self, name: str) -> list[float]:
        pick = {
            "v_upper_hat": lambda r: r.upper.value,
            "v_lower_hat": lambda r: r.lower.value,
            "v_band_hat": lambda r: r.band.value,
        }[name]
        return [pick(r) for r in self.rows]


CONVERGENCE_COLUMNS = (
    "n",
    "epsilon",
    "mu_bar",
    "mu_under",
    "v_upper_hat",
    "v_lower_hat",
    "v_band_hat",
    "stderr_upper",
    "stderr_lower",
    "stderr_band",
    "psi_pass",
    "ui_pass",
    "search_converged",
)


def convergence_experiment(
    model: SequenceModel,
    epsilon: float,
    n_schedule: Sequence[int],
    budget: EstimateBudget,
    psi_verdict: PsiVerdict | None = None,
    ui_verdict: UIVerdict | None = None,
) -> ConvergenceReport:
    """Estimate the three capacity conclusions at every scheduled n."""
    sched = list(n_schedule)
    if any(b <= a for a, b in zip(sched[:-1], sched[1:])):
        raise ValidationError("n_schedule", "must be strictly increasing")
    rows = []
    for n in sched:
        t0 = time.perf_counter()
        means = mu_bounds(model, n)
        upper = estimate_capacity_V(model, PathEvent("upper", epsilon), n, budget)
        lower = estimate_capacity_V(model, PathEvent("lower", epsilon), n, budget)
        band = estimate_capacity_v(model, PathEvent("band", epsilon), n, budget)
        rows.append(
            ConvergenceRow(
                n,
                float(epsilon),
                means.mu_bar,
                means.mu_under,
                upper,
                lower,
                band,
                psi_verdict.passed if psi_verdict is not None else None,
                ui_verdict.passed if ui_verdict is not None else None,
                time.perf_counter() - t0,
            )
        )
    return ConvergenceReport(tuple(rows))


def _flag(v: bool | None) -> str:
    return "" if v is None else str(bool(v)).lower()


def write_convergence_csv(reports: Sequence[ConvergenceReport], path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CONVERGENCE_COLUMNS)
        for rep in reports:
            for r in rep.rows:
                w.writerow(
                    [
                        r.n,
                        repr(r.epsilon),
                        repr(r.mu_bar),
                        repr(r.mu_under),
                        repr(r.upper.value),
                        repr(r.lower.value),
                        repr(r.band.value),
                        repr(r.upper.stderr),
                        repr(r.lower.stderr),
                        repr(r.band.stderr),
                        _flag(r.psi_pass),
                        _flag(r.ui_pass),
                        _flag(r.converged),
                    ]
                )
