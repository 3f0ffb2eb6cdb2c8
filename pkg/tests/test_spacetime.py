"""Space-time covariance families: closed-form examples, structural
identities, symmetry properties, and positive-definiteness."""

import numpy as np
import pytest
from dataclasses import replace
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate, special

from asymcov.data import PointSet
from asymcov.errors import ValidationError
from asymcov.likelihood import assemble_cov_dense
from asymcov.spacetime import (
    SpaceTimeSpec,
    n_free_params,
    separability_measure,
    spec_from_dict,
    spec_to_dict,
    st_cov,
    st_gneiting_cauchy,
    st_separable,
)
from asymcov.spatial import CrossCovParams, SpatialClass, cc_im, cc_re


def sep_spec(**kw):
    base = dict(family="separable_type", dim=1, spatial_kind="sq_exp",
                temporal_kind="cauchy", alpha_t=0.5, sigma=1.0, a_s=1.0, a_t=1.0)
    base.update(kw)
    return SpaceTimeSpec(**base)


class TestSeparableType:
    def test_xi_zero_is_separable(self, rng):
        spec = sep_spec(xi=0.0, sigma=1.7)
        for _ in range(20):
            h, u = rng.normal(), rng.normal()
            want = 1.7 * np.exp(-h * h) / np.sqrt(u * u + 1)
            assert st_cov(spec, h, u) == pytest.approx(want, rel=1e-13)

    def test_marginals_retained(self, rng):
        spec = sep_spec(xi=0.8, sigma=2.0)
        for _ in range(20):
            h, u = rng.normal(), rng.normal()
            assert st_cov(spec, h, 0.0) == pytest.approx(2.0 * np.exp(-h * h), rel=1e-12)
            assert st_cov(spec, 0.0, u) == pytest.approx(2.0 / np.sqrt(u * u + 1), rel=1e-12)

    def test_sqexp_cauchy_half_value(self):
        # composed from the erfi-scaled and arcsinh special-function layers,
        # evaluated at h = u = 1 with xi = 1 (illustration boundary value)
        spec = sep_spec(xi=1.0)
        want = np.exp(-1) / np.sqrt(2) * (1 + special.erfi(1.0) * (2 / np.pi) * np.arcsinh(1.0))
        assert st_cov(spec, 1.0, 1.0) == pytest.approx(want, rel=1e-13)

    def test_separability_measure_identity(self, rng):
        spec = sep_spec(xi=0.5, sigma=1.3)
        scls, sprm = spec.spatial_class(), spec.spatial_params()
        tcls, tprm = spec.temporal_class(), spec.temporal_params()
        for _ in range(20):
            h, u = rng.normal(), rng.normal()
            want = 1.3**2 * 0.5 * cc_im(scls, sprm, h) * cc_im(tcls, tprm, u)
            assert separability_measure(spec, h, u) == pytest.approx(want, abs=1e-12)
        assert separability_measure(sep_spec(xi=0.0), 0.7, 0.9) == pytest.approx(0.0, abs=1e-15)

    def test_spectral_construction_quadrature(self):
        # the two-factor spectral construction integrates back to the
        # closed form: quadrature of the separated integrals at d=1
        spec = sep_spec(xi=0.6, temporal_kind="sq_exp")

        def s_re(h):
            return integrate.quad(
                lambda x: np.cos(h * x) * np.exp(-x * x / 4) / (2 * np.sqrt(np.pi)),
                -np.inf, np.inf)[0]

        def s_im(h):
            return integrate.quad(
                lambda x: np.sin(h * x) * np.sign(x) * np.exp(-x * x / 4) / (2 * np.sqrt(np.pi)),
                -np.inf, np.inf)[0]

        rng = np.random.default_rng(1)
        for _ in range(20):
            h, u = rng.normal(), rng.normal()
            want = s_re(h) * s_re(u) + 0.6 * s_im(h) * s_im(u)
            assert st_cov(spec, h, u) == pytest.approx(want, abs=1e-3)

    def test_matern_d2_spatial_falls_back_to_fft(self):
        spec = SpaceTimeSpec(family="separable_type", dim=2, spatial_kind="matern",
                             nu_s=1.0, temporal_kind="matern", nu_t=2.0, xi=0.9,
                             x_tilde=(1.0, 0.0))
        v = st_cov(spec, np.array([1.0, 0.5]), 0.7)
        assert np.isfinite(v)
        fwd = st_cov(spec, np.array([1.0, 0.0]), 0.5)
        bwd = st_cov(spec, np.array([-1.0, 0.0]), 0.5)
        assert abs(fwd - bwd) > 1e-3  # asymmetric along x_tilde


class TestGneitingSqexp:
    def test_b_below_one_with_asymmetry_is_not_pd(self, rng):
        # the displayed closed form leaves the valid domain at b < 1 with
        # xi != 0: random Gram matrices go indefinite well beyond noise
        spec = SpaceTimeSpec(family="gneiting_sqexp", xi=0.9, b=0.5, delta=0.25)
        s = rng.uniform(0, 3, 150)
        t = rng.uniform(0, 3, 150)
        K = st_cov(spec, s[None, :] - s[:, None], t[None, :] - t[:, None])
        ev = np.linalg.eigvalsh(K)
        assert ev[0] < -1e-6 * ev[-1]

    def test_symmetric_at_zero_lags(self):
        spec = SpaceTimeSpec(family="gneiting_sqexp", xi=0.7, b=1.0, delta=0.0)
        assert st_cov(spec, 0.0, 1.3) == pytest.approx(1 / np.sqrt(1 + 1.69), rel=1e-13)
        assert st_cov(spec, 2.0, 0.0) == pytest.approx(np.exp(-4.0), rel=1e-13)

    def test_nonnegative_everywhere(self, rng):
        spec = SpaceTimeSpec(family="gneiting_sqexp", xi=0.95, b=1.0, delta=0.4)
        h = rng.normal(scale=3, size=500)
        u = rng.normal(scale=3, size=500)
        assert np.all(st_cov(spec, h, u) >= 0)

    def test_b_zero_xi_zero_separable(self, rng):
        spec = SpaceTimeSpec(family="gneiting_sqexp", xi=0.0, b=0.0, delta=0.8, sigma=1.2)
        for _ in range(10):
            h, u = rng.normal(), rng.normal()
            want = 1.2 * (u * u + 1) ** -0.8 * np.exp(-h * h)
            assert st_cov(spec, h, u) == pytest.approx(want, rel=1e-13)

    def test_positive_nonseparability_when_b_positive(self):
        spec = SpaceTimeSpec(family="gneiting_sqexp", xi=0.0, b=1.0, delta=0.0)
        hs, us = np.meshgrid(np.linspace(-2, 2, 11), np.linspace(-2, 2, 11))
        R = separability_measure(spec, hs.ravel(), us.ravel())
        assert np.all(R >= -1e-12)
        assert np.max(R) > 1e-3

    def test_delta_zero_requires_b_one(self):
        with pytest.raises(ValidationError):
            SpaceTimeSpec(family="gneiting_sqexp", b=0.5, delta=0.0)


class TestGneitingCauchy:
    def test_h_zero_limit(self):
        spec = SpaceTimeSpec(family="gneiting_cauchy", alpha_s=0.8, xi=0.9,
                             b=1.0, delta=0.0)
        assert st_cov(spec, 0.0, 0.9) == pytest.approx(1 / np.sqrt(1 + 0.81), rel=1e-13)

    def test_fast_paths_match_general(self):
        # nudging alpha off 1/2 or 1 forces the hypergeometric branch
        for alpha, (h, u) in [(0.5, (1.0, 1.0)), (1.0, (0.5, -2.0))]:
            fast = SpaceTimeSpec(family="gneiting_cauchy", alpha_s=alpha, xi=0.6,
                                 b=1.0, delta=0.0)
            gen = replace(fast, alpha_s=alpha + 3e-13)
            assert st_cov(fast, h, u) == pytest.approx(st_cov(gen, h, u), abs=1e-9)

    def test_mixture_quadrature_oracle(self):
        # Gamma mixture of the erf-form squared-exponential model
        a_s = a_t = 1.0
        for alpha, b, delta, xi, h, u in [
            (0.5, 1.0, 0.0, 0.7, 1.0, 1.0),
            (1.7, 0.6, 0.4, 0.6, 0.8, 1.3),
        ]:
            tau = b / 2 + delta

            def integrand(v):
                hs = h / (a_t**2 * u**2 + 1) ** (b / 2)
                g = v ** (alpha - 1) * np.exp(-v / a_s**2) / (
                    special.gamma(alpha) * a_s ** (2 * alpha))
                return ((a_t**2 * u**2 + 1) ** -tau * np.exp(-v * hs**2)
                        * (1 + xi * special.erf(np.sqrt(v) * hs * a_t * u)) * g)

            want, _ = integrate.quad(integrand, 0, np.inf, limit=400)
            spec = SpaceTimeSpec(family="gneiting_cauchy", alpha_s=alpha, xi=xi,
                                 b=b, delta=delta)
            assert st_cov(spec, h, u) == pytest.approx(want, rel=1e-9)


class TestLagrangian:
    def test_frozen_velocity_limit(self):
        spec = SpaceTimeSpec(family="lagrangian_sqexp", dim=1, a_s=2.0, sigma=1.5,
                             mu_V=(0.0,), Sigma_V=((1e-12,),))
        for u in [0.0, 1.0, -3.0]:
            assert st_cov(spec, 0.7, u) == pytest.approx(1.5 * np.exp(-4 * 0.49), rel=1e-9)

    def test_gneiting_correspondence(self, rng):
        # mu = 0, Sigma = c I matches the nonseparable closed expression
        for _ in range(100):
            c = rng.uniform(0.1, 3.0)
            a_s = rng.uniform(0.3, 2.0)
            u = 2.0 * rng.normal()
            h = rng.normal(size=2)
            spec = SpaceTimeSpec(family="lagrangian_sqexp", dim=2, a_s=a_s,
                                 mu_V=(0, 0), Sigma_V=((c, 0), (0, c)))
            q = 1 + 2 * a_s**2 * c * u**2
            want = q ** (-1.0) * np.exp(-a_s**2 * (h @ h) / q)
            assert st_cov(spec, h, u) == pytest.approx(want, abs=1e-12)

    def test_marginal_formula(self):
        spec = SpaceTimeSpec(family="lagrangian_sqexp", dim=1, a_s=10.0,
                             mu_V=(5.0,), Sigma_V=((225.0,),))
        m = 1 + 2 * 100 * 0.01 * 225
        want = m**-0.5 * np.exp(-100 * 0.01 * 25 / m)
        assert st_cov(spec, 0.0, 0.1) == pytest.approx(want, rel=1e-13)

    def test_asymmetric_when_mu_nonzero(self):
        spec = SpaceTimeSpec(family="lagrangian_sqexp", dim=1, a_s=1.0,
                             mu_V=(2.0,), Sigma_V=((0.5,),))
        assert abs(st_cov(spec, 1.0, 0.5) - st_cov(spec, -1.0, 0.5)) > 1e-3


class TestIsotropic:
    def test_origin_and_345(self):
        spec = SpaceTimeSpec(family="iso_exponential", dim=2, sigma=2.0, a_s=1.0, a_t=1.0)
        assert st_cov(spec, np.zeros(2), 0.0) == pytest.approx(2.0)
        assert st_cov(spec, np.array([3.0, 0.0]), 4.0) == pytest.approx(2 * np.exp(-5), rel=1e-13)

    def test_matern_half_equals_exponential(self, rng):
        m = SpaceTimeSpec(family="iso_matern", dim=2, nu_s=0.5, a_s=1.4, a_t=0.7)
        e = SpaceTimeSpec(family="iso_exponential", dim=2, a_s=1.4, a_t=0.7)
        for _ in range(20):
            h, u = rng.normal(size=2), rng.normal()
            assert st_cov(m, h, u) == pytest.approx(st_cov(e, h, u), rel=1e-12)


class TestAnisotropy:
    def test_identity_matches_isotropic(self, rng):
        iso = SpaceTimeSpec(family="separable_type", dim=2, xi=0.5, x_tilde=(1, 0))
        ani = replace(iso, aniso_Sigma=((1.0, 0.0), (0.0, 1.0)))
        for _ in range(10):
            h, u = rng.normal(size=2), rng.normal()
            assert st_cov(ani, h, u) == pytest.approx(st_cov(iso, h, u), rel=1e-12)

    def test_whitening_identity(self):
        ani = SpaceTimeSpec(family="separable_type", dim=2, xi=0.0,
                            aniso_Sigma=((1.0, 0.0), (0.0, 5.0)))
        iso = replace(ani, aniso_Sigma=None)
        got = st_cov(ani, np.array([0.0, 1.0]), 0.0)
        want = st_cov(iso, np.array([1 / np.sqrt(5), 0.0]), 0.0)
        assert got == pytest.approx(want, rel=1e-12)

    def test_long_axis_has_higher_covariance(self):
        ani = SpaceTimeSpec(family="separable_type", dim=2, xi=0.0,
                            aniso_Sigma=((5.0, 0.0), (0.0, 1.0)))
        assert st_cov(ani, np.array([2.0, 0.0]), 0.0) > st_cov(ani, np.array([0.0, 2.0]), 0.0)


ALL_FAMILY_SPECS = [
    sep_spec(xi=0.8),
    sep_spec(xi=-0.9, spatial_kind="cauchy", alpha_s=1.0, temporal_kind="matern", nu_t=2.0),
    sep_spec(xi=0.6, spatial_kind="exponential", temporal_kind="sq_exp"),
    SpaceTimeSpec(family="gneiting_sqexp", xi=0.7, b=1.0, delta=0.15),
    SpaceTimeSpec(family="gneiting_sqexp", xi=0.0, b=0.7, delta=0.15),
    SpaceTimeSpec(family="gneiting_cauchy", alpha_s=0.5, xi=0.7, b=1.0, delta=0.0),
    SpaceTimeSpec(family="lagrangian_sqexp", dim=1, a_s=1.0, mu_V=(1.0,), Sigma_V=((2.0,),)),
    SpaceTimeSpec(family="iso_exponential", dim=1),
    SpaceTimeSpec(family="iso_matern", dim=1, nu_s=1.3),
]


class TestSharedInvariants:
    @pytest.mark.parametrize("spec", ALL_FAMILY_SPECS, ids=lambda s: f"{s.family}-{s.spatial_kind}")
    def test_global_symmetry(self, spec, rng):
        h = rng.normal(scale=2, size=1000)
        u = rng.normal(scale=2, size=1000)
        np.testing.assert_allclose(st_cov(spec, h, u), st_cov(spec, -h, -u), atol=1e-12)

    @pytest.mark.parametrize("spec", ALL_FAMILY_SPECS, ids=lambda s: f"{s.family}-{s.spatial_kind}")
    def test_bounded_by_origin(self, spec, rng):
        h = rng.normal(scale=2, size=1000)
        u = rng.normal(scale=2, size=1000)
        c0 = st_cov(spec, 0.0, 0.0)
        assert np.all(np.abs(st_cov(spec, h, u)) <= c0 + 1e-12)

    def test_full_symmetry_iff_xi_zero(self, rng):
        asym = sep_spec(xi=0.8)
        sym = sep_spec(xi=0.0)
        h = rng.normal(size=200)
        u = rng.normal(size=200)
        assert np.max(np.abs(st_cov(asym, h, u) - st_cov(asym, -h, u))) > 1e-6
        np.testing.assert_allclose(st_cov(sym, h, u), st_cov(sym, -h, u), atol=1e-15)

    def test_axial_symmetry_d2(self, rng):
        spec = SpaceTimeSpec(family="separable_type", dim=2, xi=0.8, x_tilde=(1.0, 0.0),
                             temporal_kind="cauchy", alpha_t=0.5)
        H = rng.normal(size=(100, 2))
        u = rng.normal(size=100)
        flip2 = H * np.array([1.0, -1.0])
        flip1 = H * np.array([-1.0, 1.0])
        np.testing.assert_allclose(st_cov(spec, H, u), st_cov(spec, flip2, u), atol=1e-12)
        assert np.max(np.abs(st_cov(spec, H, u) - st_cov(spec, flip1, u))) > 1e-6

    @pytest.mark.parametrize("spec", ALL_FAMILY_SPECS, ids=lambda s: f"{s.family}-{s.spatial_kind}")
    def test_positive_definite_on_random_points(self, spec, rng):
        n = 120
        pts = PointSet(rng.uniform(0, 3, size=(n, spec.dim)), rng.uniform(0, 3, n))
        K = assemble_cov_dense(replace(spec, nugget=0.0), pts)
        ev = np.linalg.eigvalsh(K)
        assert ev[0] >= -1e-8 * ev[-1]


class TestSpecPlumbing:
    def test_dict_roundtrip(self):
        spec = SpaceTimeSpec(family="lagrangian_sqexp", dim=2, a_s=2.0,
                             mu_V=(1.0, -0.5), Sigma_V=((2.0, 0.3), (0.3, 1.0)))
        assert spec_from_dict(spec_to_dict(spec)) == spec

    def test_param_counts(self):
        sep2 = SpaceTimeSpec(family="separable_type", dim=2)
        assert n_free_params(sep2, asymmetric=False) == 4
        assert n_free_params(sep2, asymmetric=True) == 6
        cau2 = SpaceTimeSpec(family="separable_type", dim=2, spatial_kind="cauchy",
                             temporal_kind="cauchy")
        assert n_free_params(cau2, asymmetric=False, estimate_alpha=True) == 6
        assert n_free_params(cau2, asymmetric=True, estimate_alpha=True) == 8
        lag2 = SpaceTimeSpec(family="lagrangian_sqexp", dim=2)
        assert n_free_params(lag2) == 8
        assert n_free_params(SpaceTimeSpec(family="iso_exponential")) == 4
        assert n_free_params(SpaceTimeSpec(family="iso_matern")) == 5

    def test_xi_bounds(self):
        with pytest.raises(ValidationError):
            SpaceTimeSpec(xi=1.2)

    def test_bad_direction(self):
        with pytest.raises(ValidationError):
            SpaceTimeSpec(dim=2, x_tilde=(1.0, 1.0))
