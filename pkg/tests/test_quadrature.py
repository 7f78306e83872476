import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate as sp_integrate

from sublinear_lln.errors import QuadratureFailure
from sublinear_lln.quadrature import integrate


def test_polynomial_exact():
    value, err = integrate(lambda x: 3 * x**2, 0.0, 2.0)
    assert value == pytest.approx(8.0, abs=1e-13)
    assert err <= 1e-8


def test_reversed_and_empty_interval():
    assert integrate(np.cos, 1.0, 1.0)[0] == 0.0
    fwd = integrate(np.cos, 0.0, 1.0)[0]
    assert integrate(np.cos, 1.0, 0.0)[0] == pytest.approx(-fwd, abs=1e-14)


def test_kink_at_breakpoint():
    value, _ = integrate(np.abs, -1.0, 2.0, breakpoints=(0.0,))
    assert value == pytest.approx(2.5, abs=1e-12)


def test_integrable_endpoint_singularity():
    # 1/sqrt(x) on (0, 1] integrates to 2
    value, _ = integrate(lambda x: 1 / np.sqrt(x), 0.0, 1.0, tol=1e-7)
    assert value == pytest.approx(2.0, abs=1e-6)


def test_gives_up_on_divergent_integrand():
    with pytest.raises(QuadratureFailure):
        integrate(lambda x: 1 / x, 0.0, 1.0, tol=1e-10, max_panels=2**10)


@settings(max_examples=60, deadline=None)
@given(
    a=st.floats(-5, 5),
    width=st.floats(0.1, 5),
    freq=st.floats(0.1, 4),
)
def test_matches_scipy_quad(a, width, freq):
    f = lambda x: np.sin(freq * x) * np.exp(-0.1 * x * x)
    ours, _ = integrate(f, a, a + width, tol=1e-10)
    ref, _ = sp_integrate.quad(f, a, a + width, epsabs=1e-13, epsrel=1e-13)
    assert math.isclose(ours, ref, abs_tol=1e-9)
