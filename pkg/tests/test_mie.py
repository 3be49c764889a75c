"""Tests for the Mie-series PEC-sphere oracle.

scipy.special provides the independent cross-check for the hand-rolled
spherical Bessel recurrences; the physical limit checks (Rayleigh,
geometrical optics) are convention-independent.
"""

import math

import numpy as np
import pytest
from scipy.special import spherical_jn, spherical_yn

import sbr
from sbr.errors import NumericalError, ValidationError
from sbr.mie import spherical_jn_all, spherical_yn_all, truncation_order


class TestSphericalBessel:
    @pytest.mark.parametrize("x", [0.05, 0.7, 5.0, 31.4159, 120.0, 900.0])
    def test_jn_matches_scipy(self, x):
        n_max = truncation_order(x) + 10
        mine = spherical_jn_all(n_max, x)
        ref = spherical_jn(np.arange(n_max + 1), x)
        assert np.allclose(mine, ref, rtol=1e-10, atol=1e-300)

    @pytest.mark.parametrize("x", [0.5, 5.0, 31.4159, 120.0])
    def test_yn_matches_scipy(self, x):
        n_max = truncation_order(x)
        mine = spherical_yn_all(n_max, x)
        ref = spherical_yn(np.arange(n_max + 1), x)
        assert np.allclose(mine, ref, rtol=1e-9)


class TestMieBackscatter:
    def test_rayleigh_limit(self):
        x, r = 0.05, 1.0
        sigma = sbr.mie_backscatter_pec(x, r)
        rayleigh = 9 * x ** 4 * math.pi * r ** 2
        assert sigma == pytest.approx(rayleigh, rel=0.01)

    def test_geometrical_optics_limit(self):
        r = 1.0
        xs = np.linspace(190.0, 210.0, 81)
        vals = [sbr.mie_backscatter_pec(float(x), r) / (math.pi * r * r)
                for x in xs]
        assert float(np.mean(vals)) == pytest.approx(1.0, abs=0.02)

    def test_radius_scaling(self):
        # sigma scales with r^2 at fixed electrical size
        a = sbr.mie_backscatter_pec(40.0, 1.0)
        b = sbr.mie_backscatter_pec(40.0, 2.0)
        assert b == pytest.approx(4 * a, rel=1e-12)

    def test_truncation_stability(self):
        for x in (3.0, 30.0, 300.0, 1000.0):
            base_order = truncation_order(x) + 64
            a = sbr.mie_backscatter_pec(x, 1.0, n_max=base_order)
            b = sbr.mie_backscatter_pec(x, 1.0, n_max=base_order + 10)
            assert abs(a - b) <= 1e-9 * abs(a)

    def test_positivity(self):
        for x in np.geomspace(0.05, 2000.0, 25):
            assert sbr.mie_backscatter_pec(float(x), 1.0) > 0

    def test_oscillation_envelope_decays(self):
        r = 1.0
        xs = np.linspace(30.0, 300.0, 541)
        dev = np.array([abs(sbr.mie_backscatter_pec(float(x), r)
                            / (math.pi * r * r) - 1.0) for x in xs])
        # windowed envelope over thirds of the range must be decreasing
        thirds = np.array_split(dev, 3)
        peaks = [w.max() for w in thirds]
        assert peaks[0] > peaks[1] > peaks[2]

    def test_cross_check_against_scipy_build(self):
        # Same series assembled from scipy Bessel functions end to end.
        for x in (0.5, 5.0, 30.0, 200.0):
            order = truncation_order(x) + 64
            n = np.arange(0, order + 1)
            jn = spherical_jn(n, x)
            yn = spherical_yn(n, x)
            h2 = jn - 1j * yn
            ns = np.arange(1, order + 1)
            xjn_p = x * jn[ns - 1] - ns * jn[ns]
            xh2_p = x * h2[ns - 1] - ns * h2[ns]
            total = np.sum((-1.0) ** ns * (2 * ns + 1)
                           * (xjn_p / xh2_p - jn[ns] / h2[ns]))
            lam = 2 * math.pi / x
            ref = lam ** 2 / (4 * math.pi) * abs(total) ** 2
            assert sbr.mie_backscatter_pec(x, 1.0) == pytest.approx(ref, rel=1e-9)

    def test_unconverged_truncation_raises(self):
        with pytest.raises(NumericalError, match="not converged"):
            sbr.mie_backscatter_pec(30.0, 1.0, n_max=10)

    def test_domain_validation(self):
        with pytest.raises(ValidationError):
            sbr.mie_backscatter_pec(0.0, 1.0)
        with pytest.raises(ValidationError):
            sbr.mie_backscatter_pec(2e5, 1.0)
        with pytest.raises(ValidationError):
            sbr.mie_backscatter_pec(10.0, -1.0)
