import numpy as np
import pytest

from semprop.conjugate import (
    CategoricalDist,
    DirichletParams,
    NIGParams,
    ProductPrior,
    dirichlet_pdf,
)
from semprop.errors import DomainError
from semprop.moments import analytic_moments, branch_responsibilities, exact_posterior
from semprop.oracle import (
    QuadratureSpec,
    bayes_branch_masses,
    grid_posterior_dirichlet,
    mc_predictive,
    normalization_check,
    quad_moments,
)
from conftest import random_prior


def lattice_vs_closed_form(alpha, counts, resolution=200):
    lattice = grid_posterior_dirichlet(DirichletParams(alpha), counts, resolution)
    closed = DirichletParams(np.asarray(alpha, dtype=float) + np.asarray(counts, dtype=float))
    exact = np.array([
        dirichlet_pdf(closed, CategoricalDist(p)) for p in lattice.points
    ])
    return np.abs(lattice.density - exact).max()


class TestSimplexLattice:
    def test_beta_2_1_closed_form(self):
        assert lattice_vs_closed_form([1.0, 1.0], [1, 0], 1000) < 1e-3

    def test_zero_counts_match_prior(self):
        lattice = grid_posterior_dirichlet(DirichletParams([2.0, 3.0]), [0, 0], 400)
        exact = np.array([
            dirichlet_pdf(DirichletParams([2.0, 3.0]), CategoricalDist(p))
            for p in lattice.points
        ])
        assert np.abs(lattice.density - exact).max() < 1e-4

    def test_three_class_update(self):
        assert lattice_vs_closed_form([2.0, 3.0, 1.0], [4, 0, 2], 200) < 1e-3

    def test_k_too_large_rejected(self):
        with pytest.raises(DomainError):
            grid_posterior_dirichlet(DirichletParams(np.ones(4)), [0, 0, 0, 0])


class TestQuadMoments:
    def test_k1_at_prior_mean_is_symmetric(self, k1_prior):
        m = quad_moments(k1_prior, psi=0.5, check=False)
        assert m.e_mu[0] == pytest.approx(0.5, abs=1e-8)

    def test_agreement_with_analytic_on_random_priors(self):
        rng = np.random.default_rng(99)
        for _ in range(5):
            prior = random_prior(rng, k=2)
            psi = rng.normal(0.7, 0.8)
            quad = quad_moments(prior, psi, check=False)
            ana = analytic_moments(exact_posterior(prior, psi))
            for name in ("e_mu", "e_var", "e_var2", "e_mu2var", "e_w", "e_w2"):
                np.testing.assert_allclose(
                    getattr(ana, name), getattr(quad, name), rtol=1e-5,
                    err_msg=name,
                )

    @pytest.mark.slow
    def test_refinement_stability_on_standard_fixture(self, k1_prior):
        spec = QuadratureSpec.for_component(k1_prior.nig[0], psi=0.9)
        coarse = quad_moments(k1_prior, 0.9, spec=spec.shrink(2), check=False)
        fine = quad_moments(k1_prior, 0.9, spec=spec, check=False)
        for name in ("e_mu", "e_var", "e_var2", "e_mu2var"):
            a = getattr(fine, name)[0]
            b = getattr(coarse, name)[0]
            assert abs(a - b) / max(abs(a), 1e-12) < 1e-6

    def test_convergence_check_passes_on_good_spec(self, k1_prior):
        quad_moments(k1_prior, 0.9, check=True)

    def test_k_limit(self):
        rng = np.random.default_rng(1)
        prior = random_prior(rng, k=4)
        with pytest.raises(DomainError):
            quad_moments(prior, 0.1, check=False)


class TestNormalization:
    def test_k1_standard_fixture(self, k1_prior):
        assert normalization_check(k1_prior, 0.9) == pytest.approx(1.0, abs=1e-6)

    def test_k2_snow_ice_fixture(self, snow_ice_prior):
        assert normalization_check(snow_ice_prior, 0.139) == pytest.approx(1.0, abs=1e-4)

    @pytest.mark.slow
    def test_gamma_scale_robustness(self, snow_ice_prior):
        scaled = ProductPrior(
            snow_ice_prior.a,
            tuple(
                NIGParams(n.tau, n.kappa, n.beta, n.gamma * 10.0)
                for n in snow_ice_prior.nig
            ),
        )
        assert normalization_check(scaled, 0.139) == pytest.approx(1.0, abs=1e-4)


class TestBayesBranchMasses:
    def test_weighted_responsibilities_match_direct_bayes(self):
        # the prior-weight factor folded into the branch constants is what
        # direct Bayes quadrature produces; k=2, asymmetric weights
        prior = ProductPrior(
            DirichletParams([3.0, 1.0]),
            (NIGParams(0.0, 1.0, 3.0, 1.0), NIGParams(1.0, 1.0, 3.0, 1.0)),
        )
        post = exact_posterior(prior, 0.95)
        oracle_masses = bayes_branch_masses(prior, 0.95)
        np.testing.assert_allclose(
            branch_responsibilities(post), oracle_masses, atol=1e-6
        )

    @pytest.mark.slow
    def test_asymmetric_k3_case(self):
        rng = np.random.default_rng(55)
        prior = random_prior(rng, k=3)
        psi = 0.9
        post = exact_posterior(prior, psi)
        oracle_masses = bayes_branch_masses(prior, psi)
        np.testing.assert_allclose(
            branch_responsibilities(post), oracle_masses, atol=1e-8
        )

    @pytest.mark.slow
    def test_snow_ice_posterior_matches_bayes(self, snow_ice_prior):
        post = exact_posterior(snow_ice_prior, 0.139)
        oracle_masses = bayes_branch_masses(snow_ice_prior, 0.139)
        np.testing.assert_allclose(
            branch_responsibilities(post), oracle_masses, atol=1e-6
        )


class TestMCPredictive:
    def test_matches_closed_form(self):
        est, se = mc_predictive(DirichletParams([3.0, 2.0, 1.0]), 1_000_000, seed=7)
        np.testing.assert_allclose(est, [0.5, 1 / 3, 1 / 6], atol=1.5e-3)

    def test_symmetric_within_mc_error(self):
        est, se = mc_predictive(DirichletParams([2.0, 2.0, 2.0]), 200_000, seed=3)
        for i in range(3):
            assert abs(est[i] - 1 / 3) <= 4 * se[i]

    def test_same_seed_bit_identical(self):
        a, _ = mc_predictive(DirichletParams([1.5, 4.0]), 50_000, seed=42)
        b, _ = mc_predictive(DirichletParams([1.5, 4.0]), 50_000, seed=42)
        np.testing.assert_array_equal(a, b)

    def test_minimum_samples(self):
        with pytest.raises(DomainError):
            mc_predictive(DirichletParams([1.0, 1.0]), 100, seed=0)


class TestOracleFixtures:
    def test_snow_ice_first_step_moments(self, snow_ice_prior):
        # the first sequential step of the friction scenario, verified by
        # quadrature: the pipeline's moments are trusted because of this
        quad = quad_moments(snow_ice_prior, 0.139, check=False)
        ana = analytic_moments(exact_posterior(snow_ice_prior, 0.139))
        for name in ("e_mu", "e_var", "e_var2", "e_mu2var", "e_w", "e_w2"):
            np.testing.assert_allclose(
                getattr(ana, name), getattr(quad, name), rtol=1e-5, err_msg=name
            )
