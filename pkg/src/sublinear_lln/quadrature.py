"""Adaptive composite Gauss-Legendre quadrature on finite windows.

Each panel is integrated with an 8-point and a 16-point rule; the absolute
difference is the panel's error estimate and the 16-point value is kept.
Panels are bisected until the summed error drops below ``tol``.  A panel
whose own error is already below its share of the budget (proportional to
its width, with a small floor) is frozen, which keeps smooth regions cheap
while end-point singularities of quantile-domain integrands keep getting
refined.
"""

from __future__ import annotations

from typing import Callable, Iterable

import numpy as np

from .errors import QuadratureFailure

DEFAULT_TOL = 1e-8
MAX_PANELS = 2**20

_LO_X, _LO_W = np.polynomial.legendre.leggauss(8)
_HI_X, _HI_W = np.polynomial.legendre.leggauss(16)


def _panel_rules(f, a: np.ndarray, b: np.ndarray):
    half = 0.5 * (b - a)
    mid = 0.5 * (b + a)
    x_lo = mid[:, None] + half[:, None] * _LO_X[None, :]
    x_hi = mid[:, None] + half[:, None] * _HI_X[None, :]
    lo = half * (np.asarray(f(x_lo.ravel()), dtype=float).reshape(x_lo.shape) @ _LO_W)
    hi = half * (np.asarray(f(x_hi.ravel()), dtype=float).reshape(x_hi.shape) @ _HI_W)
    return hi, np.abs(hi - lo)


def integrate(
    f: Callable[[np.ndarray], np.ndarray],
    a: float,
    b: float,
    breakpoints: Iterable[float] = (),
    tol: float = DEFAULT_TOL,
    max_panels: int = MAX_PANELS,
    initial_split: int = 4,
) -> tuple[float, float]:
    """Integrate a vectorized ``f`` over the finite interval ``[a, b]``.

    Returns ``(value, error_estimate)``.  Points in ``breakpoints`` that lie
    strictly inside the interval become panel edges from the start, so kinks
    and jumps of ``f`` never sit inside a panel.

    Raises QuadratureFailure when the panel count would exceed ``max_panels``.
    """
    if not (np.isfinite(a) and np.isfinite(b)):
        raise ValueError("integration window must be finite")
    if a == b:
        return 0.0, 0.0
    sign = 1.0
    if b < a:
        a, b = b, a
        sign = -1.0
    edges = sorted({float(a), float(b)} | {float(p) for p in breakpoints if a < p < b})
    lefts, rights = [], []
    for lo, hi in zip(edges[:-1], edges[1:]):
        cuts = np.linspace(lo, hi, initial_split + 1)
        lefts.extend(cuts[:-1])
        rights.extend(cuts[1:])
    pa = np.array(lefts)
    pb = np.array(rights)
    width = b - a

    done_value = 0.0
    done_err = 0.0
    n_panels = len(pa)
    while True:
        vals, errs = _panel_rules(f, pa, pb)
        if not (np.all(np.isfinite(vals)) and np.all(np.isfinite(errs))):
            raise QuadratureFailure("integrand produced non-finite values")
        total_err = done_err + errs.sum()
        if total_err <= tol:
            return sign * float(done_value + vals.sum()), float(total_err)
        # floor: up to max_panels frozen panels at the floor still fit in tol / 2
        share = np.maximum(0.5 * tol * (pb - pa) / width, 0.5 * tol / max_panels)
        frozen = errs <= share
        done_value += vals[frozen].sum()
        done_err += errs[frozen].sum()
        pa, pb = pa[~frozen], pb[~frozen]
        n_panels += len(pa)
        if n_panels > max_panels:
            raise QuadratureFailure(
                f"tolerance {tol:g} not met with {max_panels} panels "
                f"(error estimate {total_err:.3g})"
            )
        mid = 0.5 * (pa + pb)
        # a panel that can no longer be split in floating point is as good as it gets
        splittable = (mid > pa) & (mid < pb)
        if not np.all(splittable):
            v_stuck, e_stuck = _panel_rules(f, pa[~splittable], pb[~splittable])
            done_value += v_stuck.sum()
            done_err += e_stuck.sum()
            pa, pb, mid = pa[splittable], pb[splittable], mid[splittable]
            if len(pa) == 0:
                if done_err <= tol:
                    return sign * float(done_value), float(done_err)
                raise QuadratureFailure(
                    f"tolerance {tol:g} not met at floating-point resolution "
                    f"(error estimate {done_err:.3g})"
                )
        pa, pb = np.concatenate([pa, mid]), np.concatenate([mid, pb])
