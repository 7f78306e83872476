import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate as sp_integrate
from scipy import special

from sublinear_lln.core import ambiguity
from sublinear_lln.distributions import Cauchy, DiscreteAtoms, Normal, SymmetricLogTail, TwoPoint, Uniform
from sublinear_lln.errors import MissingJoint, ValidationError
from sublinear_lln.truncation import (
    JointLaw,
    PsiProfile,
    SequenceModel,
    cesaro_condition,
    check_psi_vanishes,
    check_uniform_integrability,
    chi,
    default_y_grid,
    gamma_hat,
    kappa,
    kolmogorov_condition,
    mu_bounds,
    psi,
    psi_integral,
    psi_profile,
    tilde_chi,
    truncate,
    truncated_mean_lower,
    truncated_mean_upper,
    vanishing_grid,
    write_means_csv,
    write_psi_csv,
)

E = math.e
CAUCHY = SequenceModel.iid(ambiguity(Cauchy(0.0, 1.0)))
LOGTAIL = SequenceModel.iid(ambiguity(SymmetricLogTail()))
COIN = TwoPoint(-1.0, 1.0, 0.5)
COMONOTONE = JointLaw(((-1.0, -1.0, 0.5), (1.0, 1.0, 0.5)))
ANTI = JointLaw(((-1.0, 1.0, 0.5), (1.0, -1.0, 0.5)))


def cauchy_tail(t):
    return (2 / math.pi) * math.atan(1 / t)


def li(x):
    return float(special.expi(math.log(x)))


class TestCutoff:
    @pytest.mark.parametrize("x,want", [(2.5, 1.0), (-4.2, 0.0), (3.5, 0.5), (-3.25, 0.75), (3.0, 1.0), (4.0, 0.0)])
    def test_chi(self, x, want):
        assert chi(3, x) == pytest.approx(want, abs=1e-15)

    @pytest.mark.parametrize("x,want", [(2.0, 2.0), (6.0, 0.0), (5.5, 2.75), (-5.5, -2.75)])
    def test_truncate(self, x, want):
        assert truncate(5, x) == pytest.approx(want, abs=1e-15)

    @settings(max_examples=200)
    @given(n=st.integers(1, 1000), x=st.floats(-1e6, 1e6))
    def test_cutoff_properties(self, n, x):
        c = float(chi(n, x))
        assert 0.0 <= c <= 1.0
        assert float(tilde_chi(n, x)) == pytest.approx(1.0 - c, abs=1e-15)
        assert abs(float(truncate(n, x))) <= n + 1
        # 1-Lipschitz in |x| with the linear ramp
        assert abs(float(chi(n, x + 0.25)) - c) <= 0.25 + 1e-12


class TestTruncatedMeans:
    def test_cauchy_symmetric(self):
        amb = ambiguity(Cauchy(0.0, 1.0))
        for n in (1, 10, 1000):
            assert truncated_mean_upper(amb, n) == pytest.approx(0.0, abs=1e-9)

    def test_coin_pair(self, coin_pair):
        assert truncated_mean_upper(coin_pair, 2) == pytest.approx(0.2, abs=1e-15)
        assert truncated_mean_lower(coin_pair, 2) == pytest.approx(-0.2, abs=1e-15)

    def test_two_normals(self):
        amb = ambiguity(Normal(0.0, 1.0), Normal(1.0, 1.0))
        assert truncated_mean_upper(amb, 10) == pytest.approx(1.0, abs=1e-6)

    def test_truncation_active(self):
        # one atom at 5.5 sits on the ramp of level 5
        amb = ambiguity(DiscreteAtoms(((0.0, 0.5), (5.5, 0.5))))
        assert truncated_mean_upper(amb, 5) == pytest.approx(0.5 * 2.75)

    def test_mu_bounds(self, coin_pair):
        m = mu_bounds(SequenceModel.iid(coin_pair), 4)
        assert m.mu_bar == pytest.approx(0.2, abs=1e-15)
        assert m.mu_under == pytest.approx(-0.2, abs=1e-15)
        assert len(m.mu_plus) == 4
        u = mu_bounds(SequenceModel.iid(ambiguity(Uniform(0.0, 1.0))), 10)
        assert u.mu_bar == pytest.approx(0.5, abs=1e-12)
        assert u.mu_under == pytest.approx(0.5, abs=1e-12)

    def test_symmetric_model(self):
        m = mu_bounds(LOGTAIL, 50)
        assert m.mu_bar == pytest.approx(-m.mu_under, abs=1e-10)
        sym = SequenceModel.iid(ambiguity(Normal(0.5, 1.0), Normal(-0.5, 1.0)))
        m = mu_bounds(sym, 20)
        assert m.mu_bar == pytest.approx(-m.mu_under, abs=1e-10)
        assert m.mu_under <= m.mu_bar

    def test_explicit_coordinates(self, coin_pair):
        model = SequenceModel.explicit([coin_pair, ambiguity(Uniform(0, 1)), coin_pair])
        m = mu_bounds(model, 3)
        assert m.mu_plus.tolist() == pytest.approx([0.2, 0.5, 0.2])
        assert m.mu_bar == pytest.approx(0.3)
        with pytest.raises(ValidationError):
            mu_bounds(model, 4)


class TestTails:
    @pytest.mark.parametrize("t", [0.1, 1.0, 7.0, 1e4])
    def test_cauchy_gamma(self, t):
        assert gamma_hat(ambiguity(Cauchy(0.0, 1.0)), t) == pytest.approx(cauchy_tail(t), rel=1e-12)

    def test_uniform_gamma(self):
        assert gamma_hat(ambiguity(Uniform(0.0, 1.0)), 2.0) == 0.0

    def test_logtail_gamma(self):
        assert gamma_hat(ambiguity(SymmetricLogTail()), E**2) == pytest.approx(E / (2 * E**2), rel=1e-14)

    def test_gamma_takes_worst_member(self):
        amb = ambiguity(Normal(0.0, 1.0), Cauchy(0.0, 1.0))
        assert gamma_hat(amb, 3.0) == pytest.approx(cauchy_tail(3.0))

    def test_psi_cauchy(self):
        assert psi(CAUCHY, 10, 1.0) == pytest.approx(10 * cauchy_tail(10), rel=1e-12)
        assert psi(CAUCHY, 10, 1.0) == pytest.approx(0.6345, abs=1e-4)

    def test_psi_bounded(self):
        assert psi(SequenceModel.iid(ambiguity(Uniform(-1.0, 1.0))), 2, 1.0) == 0.0

    @pytest.mark.parametrize("n,y", [(10, 0.5), (1000, 0.01), (10**4, 1.0)])
    def test_psi_logtail(self, n, y):
        assert psi(LOGTAIL, n, y) == pytest.approx(E / math.log(n * y), rel=1e-12)

    def test_psi_domain(self):
        with pytest.raises(ValidationError):
            psi(CAUCHY, 10, 0.0)
        with pytest.raises(ValidationError):
            psi(CAUCHY, 10, 1.5)


class TestPsiIntegral:
    @pytest.mark.parametrize("n", [3, 50, 1000])
    def test_cauchy_closed_form(self, n):
        inner = 0.5 * n * n * math.atan(1 / n) + 0.5 * n - 0.5 * math.atan(n)
        assert psi_integral(CAUCHY, n) == pytest.approx((2 / math.pi) * inner / n, rel=1e-9)

    @pytest.mark.parametrize("n", [5, 100, 10**4])
    def test_logtail_closed_form(self, n):
        want = (E * E / 2 + E * (li(n) - li(E))) / n
        assert psi_integral(LOGTAIL, n) == pytest.approx(want, rel=1e-9)

    def test_atomic_exact(self):
        # |X| = 2 w.p. 1/2 under one member: int_0^n t gamma(t) dt = 2 + 0.5 * (4 - 2)... by hand
        model = SequenceModel.iid(ambiguity(DiscreteAtoms(((0.0, 0.5), (2.0, 0.5)))))
        n = 5
        # gamma(t) = 1/2 on [0, 2), 0 after: int = 0.5 * 2^2 / 2 = 1, times n coordinates / n^2
        assert psi_integral(model, n) == pytest.approx(1.0 / n, rel=1e-12)

    def test_profile_integral_cauchy(self):
        prof = psi_profile(CAUCHY, 1000)
        assert prof.integral == pytest.approx(2 / math.pi, abs=0.02)
        assert prof.integral == pytest.approx(psi_integral(CAUCHY, 1000), abs=0.01)

    def test_profile_vs_scipy(self):
        prof = psi_profile(LOGTAIL, 200, vanishing_grid(50))
        ref = sp_integrate.trapezoid(prof.values, prof.y_grid) + 0.5 * prof.y_grid[0] * prof.values[0]
        assert prof.integral == pytest.approx(ref, rel=1e-14)

    def test_grid_shapes(self):
        g = default_y_grid()
        assert len(g) == 129 and g[-1] == 1.0 and np.all(np.diff(g) > 0)
        assert vanishing_grid(20)[0] == 0.05
        with pytest.raises(ValidationError):
            psi_profile(CAUCHY, 10, [0.5, 0.2])


class TestConditions:
    def test_bounded_passes_with_zero(self, coin_pair):
        v = check_psi_vanishes(SequenceModel.iid(coin_pair), [10, 100, 1000], tol=0.1)
        assert v.passed and v.worst_value == 0.0

    def test_cauchy_fails_near_two_over_pi(self):
        v = check_psi_vanishes(CAUCHY, [10, 100, 1000], tol=0.1)
        assert not v.passed
        assert v.worst_y == 1.0
        assert v.worst_value == pytest.approx(2 / math.pi, abs=1e-3)

    def test_logtail_passes_marginally(self):
        v = check_psi_vanishes(LOGTAIL, [100, 1000, 10**4], tol=0.5)
        assert v.passed and v.trend_ok
        assert E / math.log(10**4) < v.worst_value < 0.5

    def test_logtail_fine_grid_sup_is_e(self):
        # sup over y of e/ln(ny) is attained where ny approaches e from above
        v = check_psi_vanishes(LOGTAIL, [100, 1000, 10**4], grid=default_y_grid(), tol=0.5)
        assert not v.passed
        assert v.worst_value > 2.0

    def test_ui_bounded_family(self, coin_pair):
        model = SequenceModel.iid(coin_pair)
        profiles = [psi_profile(model, n) for n in (1, 2, 4)]
        m0 = max(float(p.values.max()) for p in profiles)
        ui = check_uniform_integrability(profiles, [m0 / 2, m0, 2 * m0])
        assert ui.sup_tail_integrals[1:] == (0.0, 0.0)
        assert ui.sup_tail_integrals[0] > 0
        assert ui.passed

    def test_ui_cauchy_passes(self):
        profiles = [psi_profile(CAUCHY, n) for n in (10, 100, 1000)]
        assert check_uniform_integrability(profiles, [1, 2, 4, 8]).passed

    def test_ui_escaping_mass_fails(self):
        y = default_y_grid()
        profiles = [PsiProfile(n, y, np.where(y < 1 / n, float(n), 0.0), 0.0) for n in (10, 100, 1000, 10**4)]
        ui = check_uniform_integrability(profiles, [1, 2, 4, 8, 16])
        assert not ui.passed
        assert ui.sup_tail_integrals[-1] > 0.5

    def test_ui_needs_shared_grid(self):
        a = psi_profile(CAUCHY, 10)
        b = psi_profile(CAUCHY, 10, vanishing_grid())
        with pytest.raises(ValidationError):
            check_uniform_integrability([a, b], [1.0])

    def test_kolmogorov(self):
        u = kolmogorov_condition(Uniform(0.0, 1.0), [2, 10, 100])
        assert u.values == (0.0, 0.0, 0.0) and u.passed
        c = kolmogorov_condition(Cauchy(0.0, 1.0), [10, 1e3, 1e5])
        assert not c.passed
        assert c.values[-1] == pytest.approx(2 / math.pi, abs=1e-6)
        ts = [1e2, 1e3, 1e4, 1e5, 1e6]
        lt = kolmogorov_condition(SymmetricLogTail(), ts)
        assert lt.values == pytest.approx([E / math.log(t) for t in ts], rel=1e-12)
        assert lt.passed

    def test_schedules_validated(self):
        with pytest.raises(ValidationError):
            check_psi_vanishes(CAUCHY, [100, 10])
        with pytest.raises(ValidationError):
            kolmogorov_condition(Cauchy(0, 1), [10, 10])


class TestCorrelation:
    def test_product_is_zero(self, coin_pair):
        model = SequenceModel.iid(coin_pair)
        assert kappa(model, 10, 1, 2) == 0.0
        res = cesaro_condition(model, 50)
        assert res.value == 0.0 and res.passed

    def test_anticorrelated_pair(self):
        model = SequenceModel.iid(ambiguity(COIN), [ANTI])
        assert kappa(model, 3, 1, 2) == pytest.approx(-1.0)
        res = cesaro_condition(model, 20)
        assert res.value == 0.0 and res.passed and res.raw_sum < 0

    def test_comonotone_pair(self):
        model = SequenceModel.iid(ambiguity(COIN), [COMONOTONE])
        assert kappa(model, 3, 2, 1) == pytest.approx(1.0)
        for n in (2, 10, 100):
            res = cesaro_condition(model, n)
            assert res.value == pytest.approx((n * n - n) / (n * n))
            assert not res.passed

    def test_explicit_pairs_sum(self):
        sets = [ambiguity(COIN)] * 3
        model = SequenceModel.explicit(sets, {(1, 2): [COMONOTONE], (1, 3): [ANTI], (2, 3): [ANTI]})
        # 2 * (1 - 1 - 1) = -2 over 9 clamps to zero
        res = cesaro_condition(model, 3)
        assert res.raw_sum == pytest.approx(-2.0)
        assert res.value == 0.0

    def test_sup_over_joint_family(self):
        model = SequenceModel.iid(ambiguity(COIN), [ANTI, COMONOTONE])
        assert kappa(model, 2, 1, 2) == pytest.approx(1.0)

    def test_missing_pair(self):
        model = SequenceModel.explicit([ambiguity(COIN)] * 3, {(1, 2): [ANTI]})
        with pytest.raises(MissingJoint):
            cesaro_condition(model, 3)

    def test_marginals_must_match(self):
        skewed = JointLaw(((-1.0, -1.0, 0.7), (1.0, 1.0, 0.3)))
        with pytest.raises(ValidationError):
            SequenceModel.iid(ambiguity(COIN), [skewed])


def test_csv_writers(tmp_path, coin_pair):
    model = SequenceModel.iid(coin_pair)
    write_psi_csv([psi_profile(model, 3, [0.5, 1.0])], tmp_path / "psi.csv")
    assert (tmp_path / "psi.csv").read_text().splitlines() == ["n,y,psi", "3,0.5,0.0", "3,1.0,0.0"]
    write_means_csv([mu_bounds(model, 2)], tmp_path / "m.csv")
    lines = (tmp_path / "m.csv").read_text().splitlines()
    assert lines[0] == "n,k,mu_plus,mu_minus"
    assert len(lines) == 3
