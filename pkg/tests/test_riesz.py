"""Riesz kernel family: f_h, g_h, the convolved kernel K and c_gamma."""

import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from localtime_lab.errors import LabError
from localtime_lab.riesz import (
    RieszSpec,
    f_h_fourier,
    g_h_calibration,
    g_h_eval,
    g_h_fourier,
    g_h_heat_pairing,
    g_h_l2_norm,
    g_h_l2_norm_spatial,
    riesz_constant_c_gamma,
    riesz_K,
    riesz_K_convolution,
    riesz_self_convolution,
)

# mpmath (30 digits): 2 * int_0^inf sin^4(u/2) u^{2 beta - 6} du, singular end
# split off before the oscillatory tail.
L2_NORMS = {0.6: 0.707345928498323, 0.75: 0.34919520982789, 0.9: 0.276254864901685}
# mpmath oscillatory quadrature of the unitary transform of f_h, beta=.75, h=.1, x=.3
G_H_POINT = 0.131407246510612
# mpmath direct convolution int |y|^{-beta} p_t'(x - y) dy, beta=.75, t=.5, x=.7
K_POINT = -2.85950155971793
# Beta-function closed form B(1-g, 1-g) + 2 B(1-g, 2g-1)
C_GAMMA = {0.8: 21.2460029960902, 0.9: 40.4438381762624}


class TestSpec:
    @pytest.mark.parametrize("beta,h", [(0.5, 1.0), (1.01, 1.0), (0.75, 0.0), (0.75, -1.0)])
    def test_rejects(self, beta, h):
        with pytest.raises(LabError):
            RieszSpec(beta, h)

    def test_gamma_consistency(self):
        s = RieszSpec.from_gamma(0.8, 0.1)
        assert s.beta == pytest.approx(0.6)
        with pytest.raises(LabError):
            RieszSpec(0.7, 0.1, gamma=0.8)
        with pytest.raises(LabError):
            RieszSpec.from_gamma(0.7, 0.1)


class TestFh:
    def test_example(self):
        assert f_h_fourier(RieszSpec(0.75, 1.0), math.pi) == pytest.approx(math.pi**-2.25, rel=1e-14)
        assert math.pi**-2.25 == pytest.approx(0.0762, abs=1e-4)

    def test_small_xi(self):
        s = RieszSpec(0.75, 0.3)
        assert f_h_fourier(s, 1e-8) < 1e-8 ** (s.beta - 1)

    def test_scaling(self):
        r = f_h_fourier(RieszSpec(0.75, 0.1), 10.0) / f_h_fourier(RieszSpec(0.75, 1.0), 1.0)
        assert r == pytest.approx(math.sqrt(0.1), rel=1e-12)

    def test_pole(self):
        with pytest.raises(LabError):
            f_h_fourier(RieszSpec(0.75, 1.0), 0.0)

    @given(st.floats(0.51, 1.0), st.floats(1e-3, 1.0), st.floats(0.01, 100.0))
    def test_scaling_property(self, beta, h, xi):
        # f_h(xi) = h^{1/2} f_1(h xi)
        lhs = f_h_fourier(RieszSpec(beta, h), xi)
        rhs = math.sqrt(h) * f_h_fourier(RieszSpec(beta, 1.0), h * xi)
        assert lhs == pytest.approx(rhs, rel=1e-10)


class TestGh:
    def test_symmetry_and_sign(self):
        s = RieszSpec(0.75, 0.1)
        assert g_h_eval(s, 5.0) == pytest.approx(g_h_eval(s, -5.0), rel=1e-14)
        assert g_h_eval(s, 0.3) > 0

    def test_against_mpmath(self):
        s = RieszSpec(0.75, 0.1)
        assert g_h_eval(s, 0.3) == pytest.approx(G_H_POINT, rel=1e-4)
        assert g_h_fourier(s, 0.3) == pytest.approx(G_H_POINT, rel=1e-6)

    def test_fourier_agreement_random_points(self, rng):
        for beta in (0.6, 0.75, 0.9):
            s = RieszSpec(beta, 0.1)
            xs = rng.uniform(-3.0, 3.0, 20)
            closed = g_h_eval(s, xs)
            fourier = np.array([g_h_fourier(s, x) for x in xs])
            np.testing.assert_allclose(closed, fourier, rtol=1e-3)

    def test_calibration(self):
        cal = g_h_calibration(0.75)
        assert cal.max_rel_residual < 1e-3
        assert len(cal.reference_points) == 8
        assert cal.constant == pytest.approx(cal.analytic, rel=1e-3)

    def test_beta_one_is_triangle(self):
        s = RieszSpec(1.0, 0.5)
        assert g_h_eval(s, 0.6) == 0.0
        assert g_h_eval(s, 0.0) == pytest.approx(0.5**-1.5 * math.sqrt(2 * math.pi) / 4 * 0.5)

    @given(st.floats(0.55, 0.95), st.floats(1e-3, 0.5), st.floats(-10, 10))
    def test_nonnegative_even(self, beta, h, x):
        s = RieszSpec(beta, h)
        v = g_h_eval(s, x)
        assert v >= 0
        assert v == pytest.approx(g_h_eval(s, -x), rel=1e-12)

    def test_scaling_inequality(self):
        beta, eps = 0.8, 0.1
        ratios = []
        for h in (1 / 8, 1 / 16):
            xs = np.geomspace(math.sqrt(h), 20.0, 40)
            hi = g_h_eval(RieszSpec(beta, h), xs)
            lo = g_h_eval(RieszSpec(beta - eps, h), xs)
            ratios.append(hi / (h ** (eps / 2) * lo))
        assert np.max(np.concatenate(ratios)) <= 2.0


class TestL2Norm:
    @pytest.mark.parametrize("beta", sorted(L2_NORMS))
    def test_value(self, beta):
        assert g_h_l2_norm(RieszSpec(beta, 0.1)) == pytest.approx(L2_NORMS[beta], rel=1e-6)

    def test_h_free(self):
        a = g_h_l2_norm(RieszSpec(0.75, 0.1))
        b = g_h_l2_norm(RieszSpec(0.75, 0.001))
        assert a == b

    def test_spatial_route(self):
        s = RieszSpec(0.75, 0.2)
        assert g_h_l2_norm_spatial(s) == pytest.approx(g_h_l2_norm(s), rel=1e-3)

    def test_deterministic(self):
        s = RieszSpec(0.9, 0.4)
        assert g_h_l2_norm(s) == g_h_l2_norm(s) > 0


class TestHeatPairing:
    def test_bound_shape(self):
        s = [g_h_heat_pairing(RieszSpec(0.75, h), 1.0) / h**0.25 for h in (1e-1, 1e-2, 1e-3)]
        assert all(v > 0 for v in s)
        assert max(s) / min(s) < 1.5

    def test_decay_in_t(self):
        s = RieszSpec(0.75, 0.1)
        r = g_h_heat_pairing(s, 4.0) / g_h_heat_pairing(s, 1.0)
        assert r <= 4 ** (-0.375) * 1.05

    def test_matches_spatial_integral(self):
        from localtime_lab.gaussian import heat_kernel
        from scipy import integrate

        s = RieszSpec(0.75, 0.1)
        f = lambda x: g_h_eval(s, x) * heat_kernel(0.5, x)
        spatial = 2 * integrate.quad(f, 0, 12, points=[0.1], limit=200)[0]
        assert g_h_heat_pairing(s, 0.5) == pytest.approx(spatial, rel=1e-4)

    def test_rejects_t(self):
        with pytest.raises(LabError):
            g_h_heat_pairing(RieszSpec(0.75, 0.1), 0.0)


class TestRieszK:
    def test_examples(self):
        assert riesz_K(0.75, 1.0, 0.0) == 0.0
        assert riesz_K(0.75, 1.0, 1.0) == pytest.approx(-riesz_K(0.75, 1.0, -1.0), rel=1e-12)

    def test_against_mpmath(self):
        assert riesz_K(0.75, 0.5, 0.7) == pytest.approx(K_POINT, rel=1e-8)
        assert riesz_K_convolution(0.75, 0.5, 0.7) == pytest.approx(K_POINT, rel=1e-8)

    @given(st.floats(0.1, 0.9), st.floats(0.2, 2.0), st.floats(0.05, 3.0))
    def test_fourier_matches_convolution(self, beta, t, x):
        assert riesz_K(beta, t, x) == pytest.approx(riesz_K_convolution(beta, t, x), rel=1e-5, abs=1e-9)

    def test_rejects(self):
        with pytest.raises(LabError):
            riesz_K(0.75, 0.0, 1.0)
        with pytest.raises(LabError):
            riesz_K(1.0, 1.0, 1.0)


class TestCGamma:
    @pytest.mark.parametrize("gamma", sorted(C_GAMMA))
    def test_beta_function_value(self, gamma):
        assert riesz_constant_c_gamma(gamma) == pytest.approx(C_GAMMA[gamma], rel=1e-9)

    def test_homogeneity(self):
        g = 0.8
        r1 = riesz_self_convolution(g, 1.0) / 1.0 ** -(2 * g - 1)
        r2 = riesz_self_convolution(g, 2.0) / 2.0 ** -(2 * g - 1)
        assert r2 == pytest.approx(r1, rel=1e-3)

    def test_near_three_quarters_finite(self):
        v = riesz_constant_c_gamma(0.7501)
        assert math.isfinite(v) and v > 0

    @pytest.mark.parametrize("gamma", [0.75, 1.0, 0.5])
    def test_rejects(self, gamma):
        with pytest.raises(LabError):
            riesz_constant_c_gamma(gamma)
