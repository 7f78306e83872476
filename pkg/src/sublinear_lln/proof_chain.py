"""Numeric check of the inequality chain behind the capacity convergence.

For a product model and a level n the report records both sides of

* ``SSprime``  V(S_n != S'_n) <= psi_n(1), the left side by the union bound
  over coordinates, computed from member cdfs;
* ``VSprime``  V(|S'_n - sum mu+| >= n eps) <= E(S'_n - sum mu+)^2 / (n eps)^2;
* ``I``        n^-2 sum E Y^2 <= 2 (1 + 1/n)^2 int_0^1 psi_n;
* ``II``       n^-2 sum (mu+)^2 <= n^-2 sum E Y^2;
* ``III``      n^-2 sum E(-2 mu+ Y) <= 2 n^-2 sum E Y^2.

``VSprime`` takes both sides over product selections.  Its left side is
exact for atomic models (full enumeration, or per-composition lattice
convolution for i.i.d. integer atoms) and a Monte Carlo search estimate
otherwise, in which case the check allows three standard errors.
"""

from __future__ import annotations

import csv
import itertools
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .core import TestFunction, expect_under, upper_expect
from .errors import BoundViolated
from .scenario import (
    DEFAULT_ENUMERATION_CAP,
    EstimateBudget,
    Predicate,
    brute_force_predicate,
    enumeration_size,
    search_capacity,
)
from .truncation import (
    SequenceModel,
    psi,
    psi_integral,
    truncate,
    truncated_mean_upper,
    truncated_square_function,
    truncation_function,
)

SLACK = 1e-7
MC_SIGMAS = 3.0
SELECTION_CAP = 10**6
LATTICE_CAP = 10**5


@dataclass(frozen=True)
class ProofStep:
    n: int
    inequality: str
    lhs: float
    rhs: float
    holds: bool
    method: str = "exact"
    stderr: float = 0.0


@dataclass(frozen=True)
class ProofChainReport:
    steps: tuple[ProofStep, ...]

    @property
    def all_hold(self) -> bool:
        return all(s.holds for s in self.steps)

    def step(self, n: int, inequality: str) -> ProofStep:
        for s in self.steps:
            if s.n == n and s.inequality == inequality:
                return s
        raise KeyError((n, inequality))


# ---------------------------------------------------------------- second moment


def _member_stats(model: SequenceModel, k: int, n: int) -> list[tuple[float, float]]:
    """(variance, mean - mu+) of the truncated variable for each member."""
    amb = model.amb(k)
    mu = truncated_mean_upper(amb, n)
    y1, y2 = truncation_function(n), truncated_square_function(n)
    out = []
    for m in amb.members:
        mean = expect_under(m, y1, 1e-12)
        out.append((max(expect_under(m, y2, 1e-12) - mean * mean, 0.0), mean - mu))
    return out


def _compositions(total: int, parts: int):
    if parts == 1:
        yield (total,)
        return
    for c in range(total + 1):
        for rest in _compositions(total - c, parts - 1):
            yield (c,) + rest


def centered_second_moment(model: SequenceModel, n: int) -> tuple[float, bool]:
    """sup over product selections of E(S'_n - sum mu+)^2, and whether it is exact.

    Under one selection the value is sum Var + (sum (mean - mu+))^2.  Coordinates
    sharing an ambiguity set are exchangeable, so per group only the member
    counts matter.  Beyond SELECTION_CAP combinations the upper bound
    sum max Var + (sum min (mean - mu+))^2 is returned instead.
    """
    groups = model.groups(n)
    per_group = []
    count = 1
    for amb, g in groups:
        k = next(k for k in range(1, n + 1) if model.amb(k) == amb)
        stats = _member_stats(model, k, n)
        per_group.append((stats, g))
        count *= math.comb(g + len(stats) - 1, len(stats) - 1)
    if count > SELECTION_CAP:
        var = sum(g * max(v for v, _ in stats) for stats, g in per_group)
        shift = sum(g * min(d for _, d in stats) for stats, g in per_group)
        return var + shift * shift, False

    options = []
    for stats, g in per_group:
        opts = []
        for comp in _compositions(g, len(stats)):
            opts.append(
                (
                    math.fsum(c * v for c, (v, _) in zip(comp, stats)),
                    math.fsum(c * d for c, (_, d) in zip(comp, stats)),
                )
            )
        options.append(opts)
    best = -math.inf
    for combo in itertools.product(*options):
        var = math.fsum(v for v, _ in combo)
        shift = math.fsum(d for _, d in combo)
        best = max(best, var + shift * shift)
    return best, True


# ---------------------------------------------------------------- exact tail of S'


def _lattice_law(values: np.ndarray, probs: np.ndarray) -> tuple[int, np.ndarray] | None:
    if not np.all(values == np.round(values)):
        return None
    iv = values.astype(np.int64)
    lo = int(iv.min())
    arr = np.zeros(int(iv.max()) - lo + 1)
    np.add.at(arr, iv - lo, probs)
    return lo, arr


def _iid_lattice_capacity(model: SequenceModel, pred: Predicate, n: int) -> float | None:
    """Exact max over member counts for an i.i.d. rule with integer truncated atoms."""
    if not (model.is_iid and model.discrete):
        return None
    laws = []
    for m in model.rule.members:
        values, probs = m.atoms()
        law = _lattice_law(truncate(n, values), probs)
        if law is None:
            return None
        laws.append(law)
    width = n * max(len(a) for _, a in laws)
    if math.comb(n + len(laws) - 1, len(laws) - 1) * width > LATTICE_CAP * 100:
        return None

    powers = []
    for lo, arr in laws:
        seq = [(0, np.ones(1))]
        for _ in range(n):
            plo, parr = seq[-1]
            seq.append((plo + lo, np.convolve(parr, arr)))
        powers.append(seq)

    best = 0.0
    for comp in _compositions(n, len(laws)):
        lo, arr = 0, np.ones(1)
        for j, c in enumerate(comp):
            plo, parr = powers[j][c]
            lo, arr = lo + plo, np.convolve(arr, parr)
        support = (lo + np.arange(len(arr))) / n
        best = max(best, float(arr[pred.indicator(support)].sum()))
    return best


def _vsprime_lhs(model, pred, n, budget, cap) -> tuple[float, str, float]:
    if model.discrete:
        if enumeration_size(model, n) <= cap:
            return brute_force_predicate(model, pred, n, cap, level=n)[0], "exact", 0.0
        value = _iid_lattice_capacity(model, pred, n)
        if value is not None:
            return value, "exact", 0.0
    est = search_capacity(model, pred, n, budget, level=n)
    return est.value, "monte_carlo", est.stderr


# ---------------------------------------------------------------- chain


def proof_chain_check(
    model: SequenceModel,
    n_values: int | Sequence[int],
    epsilon: float = 0.1,
    budget: EstimateBudget | None = None,
    cap: int = DEFAULT_ENUMERATION_CAP,
    raise_on_violation: bool = True,
) -> ProofChainReport:
    """Evaluate both sides of every inequality at each requested n."""
    if isinstance(n_values, int):
        n_values = [n_values]
    budget = budget or EstimateBudget(mc_reps=2000, restarts=1, seed=0)
    steps: list[ProofStep] = []
    for n in n_values:
        steps.extend(_chain_at(model, int(n), epsilon, budget, cap))
    report = ProofChainReport(tuple(steps))
    if raise_on_violation:
        for s in report.steps:
            if not s.holds:
                raise BoundViolated(
                    f"{s.inequality} fails at n={s.n}: lhs {s.lhs!r} > rhs {s.rhs!r}", s.n, s.inequality
                )
    return report


def _chain_at(model: SequenceModel, n: int, epsilon: float, budget: EstimateBudget, cap: int) -> list[ProofStep]:
    groups = model.groups(n)
    square = truncated_square_function(n)

    # union bound over coordinates, straight from member cdfs
    lhs_ss = 0.0
    for amb, g in groups:
        outside = max(1.0 - (float(m.cdf(n)) - float(m.cdf_left(-n))) for m in amb.members)
        lhs_ss += g * max(outside, 0.0)
    rhs_ss = psi(model, n, 1.0)

    sq_sum, mean_sq_sum, cross_sum = 0.0, 0.0, 0.0
    violations = []
    for amb, g in groups:
        ey2 = upper_expect(amb, square)
        mu = truncated_mean_upper(amb, n)
        cross_fn = TestFunction(
            lambda x, mu=mu: -2.0 * mu * truncate(n, x),
            0,
            2.0 * abs(mu) + 1e-300,
            bounded=True,
            support=(-(n + 1.0), n + 1.0),
            kinks=(-(n + 1.0), -float(n), 0.0, float(n), n + 1.0),
        )
        cross = upper_expect(amb, cross_fn)
        if mu * mu > ey2 + SLACK or cross > 2.0 * ey2 + SLACK:
            k = next(k for k in range(1, n + 1) if model.amb(k) == amb)
            violations.append(k)
        sq_sum += g * ey2
        mean_sq_sum += g * mu * mu
        cross_sum += g * cross
    if violations:
        raise BoundViolated(f"per-coordinate bound fails at n={n}, k={violations[0]}", n, "II/III", violations[0])

    lhs_i = sq_sum / n**2
    rhs_i = 2.0 * (1.0 + 1.0 / n) ** 2 * psi_integral(model, n)

    mu_sum = sum(g * truncated_mean_upper(amb, n) for amb, g in groups)
    center = mu_sum / n
    pred = Predicate("outside", center - epsilon, center + epsilon)
    lhs_vs, method, stderr = _vsprime_lhs(model, pred, n, budget, cap)
    second, exact = centered_second_moment(model, n)
    rhs_vs = second / (n * epsilon) ** 2
    vs_holds = (lhs_vs - MC_SIGMAS * stderr) <= rhs_vs + SLACK
    if not exact:
        method += "+bound"

    return [
        ProofStep(n, "SSprime", lhs_ss, rhs_ss, lhs_ss <= rhs_ss + SLACK),
        ProofStep(n, "VSprime", lhs_vs, rhs_vs, vs_holds, method, stderr),
        ProofStep(n, "I", lhs_i, rhs_i, lhs_i <= rhs_i + SLACK),
        ProofStep(n, "II", mean_sq_sum / n**2, lhs_i, mean_sq_sum / n**2 <= lhs_i + SLACK),
        ProofStep(n, "III", cross_sum / n**2, 2.0 * lhs_i, cross_sum / n**2 <= 2.0 * lhs_i + SLACK),
    ]


PROOF_COLUMNS = ("n", "inequality", "lhs", "rhs", "holds", "method", "stderr")


def write_proof_csv(report: ProofChainReport, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(PROOF_COLUMNS)
        for s in report.steps:
            w.writerow([s.n, s.inequality, repr(s.lhs), repr(s.rhs), str(s.holds).lower(), s.method, repr(s.stderr)])
