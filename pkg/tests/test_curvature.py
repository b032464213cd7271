import math

import pytest
from hypothesis import assume, given, strategies as st

from trivopt.curvature import (BoundDomain, CurvatureProfile, alpha_hat, ct, hess_exp_full_bound,
                               hess_exp_normal_bound, hess_exp_radial_bounds, law_of_cosines_zetas, pi_kappa,
                               rauch_bounds, sn, step_size)
from trivopt.errors import ContractError, DomainError

FLAT = CurvatureProfile(0.0, 0.0)
SO = CurvatureProfile(0.0, 0.25)
GRASS = CurvatureProfile(0.0, 2.0)
SPHERE = CurvatureProfile(1.0, 1.0)
HYP = CurvatureProfile(-1.0, -1.0)

kappas = st.floats(-4.0, 4.0, allow_nan=False)
radii = st.floats(1e-3, 3.0, allow_nan=False)


class TestTrig:
    def test_sn_examples(self):
        assert sn(0.0, 3.7) == 3.7
        assert sn(1.0, math.pi / 2) == pytest.approx(1.0, abs=1e-15)
        assert sn(-1.0, 1.0) == pytest.approx(1.1752012, abs=1e-7)

    def test_ct_and_pi(self):
        for t in (0.1, 1.0, 5.0):
            assert ct(0.0, t) == pytest.approx(1.0 / t)
        assert pi_kappa(1.0) == math.pi
        assert pi_kappa(-2.0) == math.inf
        assert pi_kappa(0.0) == math.inf

    @pytest.mark.parametrize("t", [0.0, -0.5, math.pi, 4.0])
    def test_ct_domain(self, t):
        with pytest.raises(DomainError):
            ct(1.0, t)

    @pytest.mark.parametrize("kappa", [1e-9, -1e-9, 1e-7, -1e-7])
    def test_series_continuity(self, kappa):
        t = 0.9
        closed = math.sin(math.sqrt(kappa) * t) / math.sqrt(kappa) if kappa > 0 else \
            math.sinh(math.sqrt(-kappa) * t) / math.sqrt(-kappa)
        assert sn(kappa, t) == pytest.approx(closed, rel=1e-14)
        assert ct(kappa, t) == pytest.approx(1.0 / t - kappa * t / 3.0, rel=1e-12)

    @pytest.mark.parametrize("kappa", [-2.0, -0.3, 0.0, 0.5, 1.0, 3.0])
    def test_sn_solves_ode(self, kappa):
        h = 1e-4
        for i in range(1, 20):
            t = 0.1 * i
            if t >= pi_kappa(kappa):
                break
            acc = (sn(kappa, t + h) - 2 * sn(kappa, t) + sn(kappa, t - h)) / h ** 2
            assert abs(acc + kappa * sn(kappa, t)) <= 1e-6
        assert sn(kappa, 0.0) == 0.0
        assert (sn(kappa, h) - sn(kappa, -h)) / (2 * h) == pytest.approx(1.0, abs=1e-8)

    @given(kappas, kappas, st.floats(1e-3, 3.0))
    def test_sn_non_increasing_in_kappa(self, k1, k2, t):
        k1, k2 = sorted((k1, k2))
        assume(k2 <= (math.pi / t) ** 2)
        assert sn(k1, t) >= sn(k2, t) - 1e-15


class TestProfile:
    def test_invalid(self):
        with pytest.raises(ContractError):
            CurvatureProfile(1.0, 0.0)
        with pytest.raises(ContractError):
            CurvatureProfile(0.0, 1.0, Lambda=-1.0)
        with pytest.raises(ContractError):
            CurvatureProfile(0.0, 1.0, inj=0.0)
        with pytest.raises(ContractError):
            BoundDomain(0.0)

    def test_domain_contains(self):
        d = BoundDomain(math.pi)
        assert d.contains(1.0) and not d.contains(math.pi) and not d.contains(0.0)


class TestRauch:
    def test_flat(self):
        lo, hi, dom = rauch_bounds(FLAT, 2.0)
        assert (lo, hi) == (1.0, 1.0) and dom.radius_limit == math.inf

    def test_sphere_quarter(self):
        lo, hi, dom = rauch_bounds(SPHERE, math.pi / 2)
        assert lo == pytest.approx(2 / math.pi, abs=1e-5)
        assert hi == 1.0
        assert dom.radius_limit == math.pi

    def test_negative(self):
        _, hi, _ = rauch_bounds(CurvatureProfile(-1.0, 0.0), 1.0)
        assert hi == pytest.approx(1.17520, abs=1e-5)

    @given(kappas, kappas, radii)
    def test_ordered(self, a, b, r):
        lo, hi, _ = rauch_bounds(CurvatureProfile(min(a, b), max(a, b)), r)
        assert lo <= hi

    @pytest.mark.parametrize("prof", [FLAT, SO, GRASS, SPHERE, HYP])
    def test_limit_at_zero(self, prof):
        lo, hi, _ = rauch_bounds(prof, 1e-6)
        assert lo == pytest.approx(1.0, abs=1e-9) and hi == pytest.approx(1.0, abs=1e-9)


class TestSecondOrder:
    def test_radial_flat(self):
        assert hess_exp_radial_bounds(FLAT, 1.3) == (0.0, 0.0)

    @pytest.mark.parametrize("prof", [SPHERE, HYP, CurvatureProfile(0.3, 0.3)])
    def test_radial_equality(self, prof):
        lo, hi = hess_exp_radial_bounds(prof, 0.8)
        assert lo == hi

    def test_radial_sphere_value(self):
        lo, hi = hess_exp_radial_bounds(SPHERE, math.pi / 4)
        assert hi == pytest.approx(4 / math.pi - 8 / math.pi ** 2, rel=1e-14)
        # the commonly quoted 0.46258 is a rounding slip; the closed form gives 0.462670
        assert hi == pytest.approx(0.46267, abs=1e-5)
        assert abs(hi - 0.46258) < 1e-3

    def test_radial_domain(self):
        with pytest.raises(DomainError):
            hess_exp_radial_bounds(SPHERE, math.pi)

    def test_radial_small_r_no_cancellation(self):
        lo, _ = hess_exp_radial_bounds(SPHERE, 1e-4)
        # 1/r - sin(2r)/(2r^2) ~ 2r/3
        assert lo == pytest.approx(2e-4 / 3, rel=1e-6)

    def test_normal_constant_curvature(self):
        assert hess_exp_normal_bound(SPHERE, 1.0) == 0.0

    @pytest.mark.parametrize("r", [0.1, 1.0, 3.0, 8.0])
    def test_so_profile(self, r):
        assert hess_exp_normal_bound(SO, r) == pytest.approx(r / 9, rel=1e-14)
        assert hess_exp_full_bound(SO, r) == pytest.approx(r / 3, rel=1e-14)

    def test_so_domain(self):
        limit = 2 * math.sqrt(2) * math.pi
        assert hess_exp_full_bound(SO, limit * 0.999) > 0
        with pytest.raises(DomainError):
            hess_exp_full_bound(SO, limit)

    def test_normal_mixed_profile(self):
        prof = CurvatureProfile(-1.0, 0.0, Lambda=1.0)
        s = math.sinh(0.5) ** 2
        expected = 8.0 / 9.0 * s * (3.0 * s + 2.0 * math.sinh(1.0))
        assert hess_exp_normal_bound(prof, 1.0) == pytest.approx(expected, rel=1e-14)

    @pytest.mark.parametrize("r", [0.5, 1.0, 2.0])
    def test_grassmann_both_forms(self, r):
        assert hess_exp_full_bound(GRASS, r) == pytest.approx(8 * r / 3, rel=1e-14)
        assert hess_exp_normal_bound(GRASS, r) == pytest.approx(8 * r / 9, rel=1e-14)

    def test_flat_full(self):
        assert hess_exp_full_bound(FLAT, 5.0) == 0.0


class TestSteps:
    def test_alpha_hat_examples(self):
        assert alpha_hat(FLAT, 3.0, 2.0) == 3.0
        assert alpha_hat(SO, 1.5, 1.0) == pytest.approx(1.5 * 4 / 3, rel=1e-14)
        c1 = math.sinh(1.0) ** 2
        assert c1 == pytest.approx(1.38109, abs=1e-5)
        prof = CurvatureProfile(-1.0, 0.0)
        c2 = 8.0 / 3.0 * math.sinh(0.5) ** 2 * 2.0 * math.sinh(1.0)
        assert alpha_hat(prof, 1.0, 1.0) == pytest.approx(c1 + c2, rel=1e-14)

    @pytest.mark.parametrize("prof", [FLAT, SO, GRASS, SPHERE, HYP])
    def test_alpha_hat_limit(self, prof):
        assert alpha_hat(prof, 2.0, 1e-7) == pytest.approx(2.0, rel=1e-9)

    def test_alpha_negative(self):
        with pytest.raises(DomainError):
            alpha_hat(SO, -1.0, 1.0)

    def test_zetas(self):
        assert law_of_cosines_zetas(0.0, 1.7) == pytest.approx((1.0, 1.0))
        z1, z2 = law_of_cosines_zetas(-1.0, 1.0)
        assert z1 == pytest.approx(1.31304, abs=1e-5) and z2 == 1.0
        z1, z2 = law_of_cosines_zetas(1.0, math.pi / 4)
        assert z1 == 1.0 and z2 == pytest.approx(math.pi / 4, rel=1e-14)

    @given(kappas, st.floats(1e-3, 10.0))
    def test_zetas_bracket_one(self, k, r):
        assume(r < pi_kappa(k) * 0.999)
        z1, z2 = law_of_cosines_zetas(k, r)
        assert z2 <= 1.0 <= z1

    def test_step_size_examples(self):
        assert step_size(FLAT, 2.0, 3.0) == 0.5
        assert step_size(SO, 1.0, 2.0) == pytest.approx(0.75, rel=1e-14)
        hyp = CurvatureProfile(-1.0, -1.0)
        assert step_size(hyp, 1.0, 1.0) == pytest.approx(1.0 / alpha_hat(hyp, 1.0, 0.5))
        assert step_size(hyp, 1.0, 1.0) < 1.0

    def test_step_size_domain(self):
        with pytest.raises(DomainError):
            step_size(SPHERE, 1.0, 2 * math.pi)
        with pytest.raises(DomainError):
            step_size(SO, 0.0, 1.0)
