"""Spectral machinery: Hilbert-transform oracle, half-spectral evaluation,
and the unconditional simulator."""

import numpy as np
import pytest
from scipy import special

from asymcov.data import PointSet
from asymcov.errors import NumericalError, ValidationError
from asymcov.spacetime import SpaceTimeSpec, st_cov
from asymcov.spatial import FFTGrid, spectral_density
from asymcov.spectral import (
    SimRequest,
    SpectralProposal,
    halfspectral_gneiting,
    hilbert_oracle_1d,
    replicate_rng,
    simulate_unconditional,
)


class TestHilbertOracle:
    def test_even_odd_outputs(self):
        dens = lambda x: 1.0 / (1.0 + x**4)
        lags, c_re, c_im = hilbert_oracle_1d(dens, FFTGrid(n=4096, extent=50.0))
        # lag grid is (m - n/2) dl: the mirror of index m is n - m (m >= 1)
        m = np.arange(1, len(lags))
        np.testing.assert_allclose(c_re[m], c_re[-m], atol=1e-12)
        np.testing.assert_allclose(c_im[m], -c_im[-m], atol=1e-12)

    def test_zero_density(self):
        lags, c_re, c_im = hilbert_oracle_1d(lambda x: np.zeros_like(x), FFTGrid(n=512, extent=5.0))
        assert not c_re.any() and not c_im.any()

    def test_sqexp_pair(self):
        dens = lambda x: spectral_density("sq_exp", 1, np.abs(x), a=1.0)
        lags, c_re, c_im = hilbert_oracle_1d(dens, FFTGrid(n=2**16, extent=40.0))
        m = np.abs(lags) <= 10
        assert np.max(np.abs(c_re[m] - np.exp(-lags[m] ** 2))) < 1e-6
        closed = np.exp(-lags[m] ** 2) * special.erfi(np.clip(lags[m], -26, 26))
        assert np.max(np.abs(c_im[m] - closed)) < 1e-4


class TestHalfSpectral:
    def test_gamma_u2_matches_closed_form(self, rng):
        spec = SpaceTimeSpec(family="gneiting_sqexp", a_s=1.2, a_t=0.8, xi=0.6,
                             b=1.0, delta=0.0)
        hs = rng.uniform(-3, 3, 20)
        for u in rng.uniform(-3, 3, 4):
            got = halfspectral_gneiting("gamma_u2", 1.2, 0.8, 0.6, hs, float(u))
            want = st_cov(spec, hs, np.full(20, u))
            assert np.max(np.abs(got - want)) < 1e-3

    def test_u_zero_symmetric(self):
        hs = np.linspace(-2, 2, 9)
        got = halfspectral_gneiting("gamma_u2", 1.0, 1.0, 0.9, hs, 0.0)
        np.testing.assert_allclose(got, np.exp(-hs**2), atol=1e-10)

    def test_gamma_absu_symmetric_reduction(self):
        hs = np.linspace(-2, 2, 9)
        got = halfspectral_gneiting("gamma_absu", 1.0, 1.0, 0.0, hs, 1.5)
        want = (1.5 + 1) ** -0.5 * np.exp(-hs**2 / 2.5)
        np.testing.assert_allclose(got, want, atol=1e-10)

    def test_gamma_absu_global_symmetry(self):
        a = halfspectral_gneiting("gamma_absu", 1.0, 1.0, 0.7, np.array([1.2]), 0.8)
        b = halfspectral_gneiting("gamma_absu", 1.0, 1.0, 0.7, np.array([-1.2]), -0.8)
        assert a[0] == pytest.approx(b[0], rel=1e-10)

    def test_refinement_guard(self):
        with pytest.raises(NumericalError):
            halfspectral_gneiting("gamma_u2", 1.0, 1.0, 0.5, np.array([1.0]), 1.0,
                                  n=2**4, extent=40.0)

    def test_d2_even_part_is_symmetric_gneiting(self):
        # closed forms stop at d=1, but the even part in h of the d=2
        # numerical evaluation must equal the symmetric d=2 Gneiting value
        # q^{-d/2} exp(-|h|^2/q)
        h = np.array([[1.0, 0.3], [0.5, 0.5]])
        got_p = halfspectral_gneiting("gamma_u2", 1.0, 1.0, 0.5, h, 1.0,
                                      x_tilde=(1.0, 0.0), dim=2, n=2**9)
        got_m = halfspectral_gneiting("gamma_u2", 1.0, 1.0, 0.5, -h, 1.0,
                                      x_tilde=(1.0, 0.0), dim=2, n=2**9)
        q = 2.0
        hn2 = np.sum(h * h, axis=1)
        sym = q ** -1.0 * np.exp(-hn2 / q)
        np.testing.assert_allclose(0.5 * (got_p + got_m), sym, atol=1e-6)
        assert np.max(np.abs(got_p - got_m)) > 1e-3  # odd part is material


def _small_request(xi=0.7, L=400, seed=11, kinds=("sq_exp", "sq_exp")):
    spec = SpaceTimeSpec(family="separable_type", spatial_kind=kinds[0],
                         temporal_kind=kinds[1], xi=xi, sigma=1.3,
                         alpha_s=1.0, alpha_t=1.0, nu_s=1.0, nu_t=2.0)
    pts = PointSet(np.array([[0.0], [0.7], [-0.7]]), np.array([0.0, 0.5, 0.5]))
    return SimRequest(spec, pts, L=L, seed=seed)


class TestSimulator:
    def test_bit_exact_determinism(self):
        req = _small_request()
        assert np.array_equal(simulate_unconditional(req), simulate_unconditional(req))

    def test_xi_zero_second_sum_vanishes(self):
        # with xi = 0 the sine-sum weight is 0: simulating with the sign
        # factor artificially flipped must give identical output
        req = _small_request(xi=0.0)
        y = simulate_unconditional(req)
        spec_flip = SpaceTimeSpec(family="separable_type", xi=0.0, sigma=1.3,
                                  x_tilde=(-1.0,))
        req2 = SimRequest(spec_flip, req.points, L=req.L, seed=req.seed)
        np.testing.assert_array_equal(y, simulate_unconditional(req2))

    def test_mean_zero(self):
        req = _small_request(L=200)
        vals = np.array([
            simulate_unconditional(req, rng=replicate_rng(5, r))[0] for r in range(2000)
        ])
        se = vals.std() / np.sqrt(len(vals))
        assert abs(vals.mean()) < 3 * se + 1e-12

    def test_empirical_variance(self):
        req = _small_request(L=500)
        vals = np.array([
            simulate_unconditional(req, rng=replicate_rng(7, r))[0] for r in range(1500)
        ])
        v = vals**2
        se = v.std() / np.sqrt(len(v))
        assert v.mean() == pytest.approx(1.3, abs=4 * se)

    def test_per_term_expectation_identity(self):
        # for one fixed spectral draw (x, eta), the phase average over
        # (phi, psi) of the two-point summand product equals the target
        # covariance contribution; a 64^2 periodic trapezoid grid is exact
        spec = SpaceTimeSpec(family="separable_type", xi=0.6, sigma=1.4)
        x, eta = 0.83, -1.21
        rho = np.sign(x) * np.sign(eta)
        alpha = 0.5 * (np.sqrt(1.4 * 1.6) + np.sqrt(1.4 * 0.4))
        beta = 0.5 * (np.sqrt(1.4 * 1.6) - np.sqrt(1.4 * 0.4))
        (s1, t1), (s2, t2) = (0.2, 0.5), (1.1, -0.4)
        grid = (np.arange(64) + 0.5) * 2 * np.pi / 64
        PHI, PSI = np.meshgrid(grid, grid, indexing="ij")

        def summand(s, t):
            return 2 * (alpha * np.cos(s * x + PHI) * np.cos(t * eta + PSI)
                        + beta * rho * np.sin(s * x + PHI) * np.sin(t * eta + PSI))

        emp = np.mean(summand(s1, t1) * summand(s2, t2))
        h, u = s2 - s1, t2 - t1
        want = 1.4 * (np.cos(h * x) * np.cos(u * eta)
                      + 0.6 * rho * np.sin(h * x) * np.sin(u * eta))
        assert emp == pytest.approx(want, abs=1e-10)

    def test_matern_targets_covariance_match(self):
        # small-scale version of the simulation acceptance check
        spec = SpaceTimeSpec(family="separable_type", spatial_kind="matern",
                             temporal_kind="matern", nu_s=1.0, nu_t=2.0, xi=0.9,
                             sigma=1.0)
        pts = PointSet(np.array([[0.0], [0.8], [-0.8]]), np.array([0.0, 0.6, 0.6]))
        req = SimRequest(spec, pts, L=800, seed=3)
        prods = np.zeros((1200, 2))
        for r in range(1200):
            y = simulate_unconditional(req, rng=replicate_rng(13, r))
            prods[r] = [y[0] * y[1], y[0] * y[2]]
        emp = prods.mean(axis=0)
        se = prods.std(axis=0) / np.sqrt(len(prods))
        tgt = np.array([st_cov(spec, 0.8, 0.6), st_cov(spec, -0.8, 0.6)])
        assert np.all(np.abs(emp - tgt) < 4 * se)
        assert abs(tgt[0] - tgt[1]) > 0.1  # the asymmetry is material

    def test_proposal_tail_validation(self):
        spec = SpaceTimeSpec(family="separable_type", spatial_kind="exponential")
        pts = PointSet(np.zeros((1, 1)), np.zeros(1))
        with pytest.raises(ValidationError):
            SimRequest(spec, pts, proposal_s=SpectralProposal(nu=1.0))
        SimRequest(spec, pts, proposal_s=SpectralProposal(nu=0.5))  # ok

    def test_triangular_target_rejected(self):
        spec = SpaceTimeSpec(family="separable_type", spatial_kind="triangular")
        pts = PointSet(np.zeros((1, 1)), np.zeros(1))
        with pytest.raises(ValidationError):
            SimRequest(spec, pts)

    def test_xi_must_be_inside_open_interval(self):
        spec = SpaceTimeSpec(family="separable_type", xi=1.0)
        pts = PointSet(np.zeros((1, 1)), np.zeros(1))
        with pytest.raises(ValidationError):
            SimRequest(spec, pts)
