import numpy as np
import pytest

from hssalt import datasets, model
from hssalt.em import (
    AlphaSolveError,
    EmConfig,
    e_step,
    fit_em,
    fit_homogeneous,
    m_step,
    solve_alpha_score,
)
from hssalt.types import CensoredSample, DegenerateDataError, MixtureParams

from conftest import draw_sample


class TestEStep:
    def test_rows_normalize(self, true_params, seeded_sample):
        eta = e_step(true_params, seeded_sample)
        assert eta.shape == (seeded_sample.r - seeded_sample.n1 + 1, 2)
        np.testing.assert_allclose(eta.sum(axis=1), 1.0, rtol=1e-12)
        assert np.all(eta >= 0)

    def test_censored_row_hand_value(self):
        # alpha=1, tau=1, stop time 2, rates (0.5, 1.0), equal weights:
        # posterior of the slow component is e^-0.5 / (e^-0.5 + e^-1)
        p = MixtureParams(alpha=1.0, lambda1=0.3, lambda2=(0.5, 1.0),
                          pi=(0.5, 0.5), tau=1.0)
        s = CensoredSample(times=np.array([0.5, 1.5, 2.0]), n=5, tau=1.0)
        eta = e_step(p, s)
        assert eta[-1, 0] == pytest.approx(0.622459331201855, rel=1e-12)

    def test_observed_row_hand_value(self):
        # exponential case: weight_j = pi_j * l2j * exp(-l2j*(t - tau))
        p = MixtureParams(alpha=1.0, lambda1=0.3, lambda2=(0.5, 1.0),
                          pi=(0.4, 0.6), tau=1.0)
        s = CensoredSample(times=np.array([0.5, 2.0]), n=3, tau=1.0)
        w0 = 0.4 * 0.5 * np.exp(-0.5)
        w1 = 0.6 * 1.0 * np.exp(-1.0)
        eta = e_step(p, s)
        assert eta[0, 0] == pytest.approx(w0 / (w0 + w1), rel=1e-12)

    def test_equal_rates_give_pi(self, seeded_sample):
        p = MixtureParams(alpha=1.2, lambda1=0.2, lambda2=(0.64, 0.64),
                          pi=(0.7, 0.3), tau=1.6)
        eta = e_step(p, seeded_sample)
        np.testing.assert_allclose(eta[:, 0], 0.7, rtol=1e-12)

    def test_rejects_no_stage2(self, true_params):
        s = CensoredSample(times=np.array([0.5, 1.0]), n=4, tau=1.6)
        with pytest.raises(DegenerateDataError):
            e_step(true_params, s)


class TestMStep:
    def test_single_component_hand_values(self, two_point_sample):
        # n=r=2, tau=1, times (0.5, 2.0), alpha fixed at 1:
        # lambda1 = 1/(0.5 + 1) = 2/3, lambda2 = 1/(2 - 1) = 1
        p = MixtureParams(alpha=1.0, lambda1=0.5, lambda2=(0.5,), pi=(1.0,),
                          tau=1.0)
        eta = np.ones((2, 1))
        cfg = EmConfig(m=1, alpha_fixed=1.0)
        out = m_step(p, eta, two_point_sample, cfg)
        assert out.lambda1 == pytest.approx(2.0 / 3.0, rel=1e-12)
        assert out.lambda2[0] == pytest.approx(1.0, rel=1e-12)
        assert out.pi == (1.0,)
        assert out.alpha == 1.0

    def test_pi_update_is_weighted_mean(self, true_params, seeded_sample):
        eta = e_step(true_params, seeded_sample)
        cfg = EmConfig(alpha_fixed=true_params.alpha)
        out = m_step(true_params, eta, seeded_sample, cfg)
        s = seeded_sample
        n_cens = s.n - s.r
        expect = (eta[:-1].sum(axis=0) + n_cens * eta[-1]) / (s.n - s.n1)
        # output is canonically ordered; compare as multisets of (lam2, pi)
        got = sorted(zip(out.lambda2, out.pi))
        assert got[0][1] + got[1][1] == pytest.approx(1.0, rel=1e-12)
        assert sorted(out.pi) == pytest.approx(sorted(expect), rel=1e-10)

    def test_output_canonical(self, seeded_sample):
        p = MixtureParams(alpha=1.2, lambda1=0.2, lambda2=(0.1, 1.0),
                          pi=(0.4, 0.6), tau=1.6)
        eta = e_step(p, seeded_sample)
        out = m_step(p, eta, seeded_sample, EmConfig())
        assert out.lambda2[0] < out.lambda2[1]


class TestAlphaScore:
    def test_root_has_small_score(self, true_params, seeded_sample):
        eta = e_step(true_params, seeded_sample)
        alpha = solve_alpha_score(true_params, eta, seeded_sample)
        # verify the postcondition directly through a finite-difference of
        # the expected complete-data objective
        from hssalt.em import _alpha_score_fn, _Arrays

        arr = _Arrays(seeded_sample)
        score = _alpha_score_fn(
            arr, true_params.lambda1, np.array(true_params.lambda2),
            eta[:-1], eta[-1],
        )
        assert abs(score(alpha)) <= 1e-10
        assert 0.3 < alpha < 5.0

    def test_all_stage1_reduces_to_one_stage_weibull(self):
        # if every unit fails before tau the score reduces to the classical
        # one-stage Weibull profile equation
        times = np.array([0.3, 0.6, 0.9, 1.2, 1.5])
        s = CensoredSample(times=times, n=5, tau=2.0)
        p = MixtureParams(alpha=1.0, lambda1=1.0, lambda2=(1.0,), pi=(1.0,),
                          tau=2.0)
        eta = np.ones((1, 1))
        alpha = solve_alpha_score(p, eta, s)

        def weibull_profile(a):
            ta = times**a
            return (5 / a + np.sum(np.log(times))
                    - 1.0 * np.sum(ta * np.log(times)))

        assert weibull_profile(alpha) == pytest.approx(0.0, abs=1e-9)

    def test_identical_times_unsolvable(self):
        # all failures at the same instant: the score has no root
        s = CensoredSample(times=np.array([1.0, 1.0, 1.0]), n=3, tau=0.5)
        p = MixtureParams(alpha=1.0, lambda1=1.0, lambda2=(1.0,), pi=(1.0,),
                          tau=0.5)
        eta = np.ones((4, 1))
        with pytest.raises(AlphaSolveError):
            solve_alpha_score(p, eta, s, bracket=(0.5, 2.0))


class TestFitHomogeneous:
    def test_closed_form_rates_at_fixed_alpha(self, seeded_sample):
        fit = fit_homogeneous(seeded_sample, alpha_fixed=1.0)
        s = seeded_sample
        l1 = s.n1 / (np.sum(s.stage1_times) + (s.n - s.n1) * s.tau)
        l2 = (s.r - s.n1) / (
            np.sum(s.stage2_times) + (s.n - s.r) * s.censor_time
            - (s.n - s.n1) * s.tau
        )
        assert fit.params.lambda1 == pytest.approx(l1, rel=1e-12)
        assert fit.params.lambda2[0] == pytest.approx(l2, rel=1e-12)
        assert fit.params.alpha == 1.0

    def test_free_alpha_is_profile_stationary(self, seeded_sample):
        fit = fit_homogeneous(seeded_sample)
        sc = model.score_eq8(fit.params, seeded_sample)
        assert abs(sc.d_alpha) < 1e-8
        assert abs(sc.d_lambda1) < 1e-8
        assert abs(sc.d_lambda2[0]) < 1e-8

    def test_matches_fit_em_m1(self, seeded_sample):
        hom = fit_homogeneous(seeded_sample)
        em = fit_em(seeded_sample, EmConfig(m=1, n_starts=1))
        assert em.params.alpha == pytest.approx(hom.params.alpha, rel=1e-6)
        assert em.params.lambda1 == pytest.approx(hom.params.lambda1, rel=1e-6)
        assert em.params.lambda2[0] == pytest.approx(hom.params.lambda2[0],
                                                    rel=1e-6)
        assert em.loglik == pytest.approx(hom.loglik, abs=1e-8)


class TestFitEm:
    def test_reference_complete_fit(self):
        s = datasets.complete_dataset()
        fit = fit_em(s, EmConfig(n_starts=6, seed=1))
        assert fit.converged
        assert fit.params.alpha == pytest.approx(1.0115, abs=0.02)
        assert fit.params.lambda1 == pytest.approx(0.0359, abs=0.002)
        assert fit.params.lambda2[0] == pytest.approx(0.1150, abs=0.005)
        assert fit.params.lambda2[1] == pytest.approx(1.6962, abs=0.05)
        assert fit.params.pi[0] == pytest.approx(0.5667, abs=0.02)
        assert fit.loglik_eq8 == pytest.approx(-172.56, abs=0.1)

    def test_reference_censored_fit(self):
        s = datasets.censored_dataset()
        fit = fit_em(s, EmConfig(n_starts=6, seed=1))
        assert fit.converged
        assert fit.params.alpha == pytest.approx(0.9804, abs=0.02)
        assert fit.params.lambda1 == pytest.approx(0.0389, abs=0.002)
        assert fit.params.lambda2[0] == pytest.approx(0.0979, abs=0.005)
        assert fit.params.lambda2[1] == pytest.approx(1.8004, abs=0.06)
        assert fit.params.pi[0] == pytest.approx(0.5329, abs=0.02)

    def test_ascent_and_trace(self, seeded_sample):
        fit = fit_em(seeded_sample, EmConfig(n_starts=3, seed=2))
        assert np.all(np.diff(fit.loglik_trace) >= -1e-8)
        assert fit.loglik == pytest.approx(fit.loglik_trace[-1])
        assert fit.iterations == len(fit.loglik_trace)

    def test_deterministic_given_seed(self, seeded_sample):
        a = fit_em(seeded_sample, EmConfig(n_starts=3, seed=5))
        b = fit_em(seeded_sample, EmConfig(n_starts=3, seed=5))
        assert a.params == b.params
        assert a.loglik == b.loglik

    def test_fixed_alpha_respected(self, seeded_sample):
        fit = fit_em(seeded_sample, EmConfig(n_starts=3, alpha_fixed=1.0))
        assert fit.params.alpha == 1.0

    def test_stationarity_of_mixture_score(self, seeded_sample):
        # at the EM fixed point the self-consistency equations hold:
        # an extra E+M step must not move the parameters
        fit = fit_em(seeded_sample, EmConfig(n_starts=3, seed=2,
                                             param_tol=1e-10,
                                             loglik_tol=1e-12))
        eta = e_step(fit.params, seeded_sample)
        nxt = m_step(fit.params, eta, seeded_sample, EmConfig())
        np.testing.assert_allclose(nxt.as_array(), fit.params.as_array(),
                                   rtol=1e-5)

    def test_zero_iterations_never_converged(self, seeded_sample):
        fit = fit_em(seeded_sample,
                     EmConfig(n_starts=1, max_iterations=0))
        assert not fit.converged
        assert fit.iterations == 0

    def test_loglik_matches_public_evaluator(self, seeded_sample):
        fit = fit_em(seeded_sample, EmConfig(n_starts=2, seed=3))
        assert fit.loglik == pytest.approx(
            model.loglik_mixture(fit.params, seeded_sample), rel=1e-10)
        assert fit.loglik_eq8 == pytest.approx(
            model.loglik_eq8(fit.params, seeded_sample), rel=1e-10)

    def test_recovers_truth_at_large_n(self, true_params):
        s = draw_sample(true_params, 4000, 3600, seed=424242)
        fit = fit_em(s, EmConfig(n_starts=4, seed=0))
        assert fit.params.alpha == pytest.approx(true_params.alpha, abs=0.08)
        assert fit.params.lambda1 == pytest.approx(true_params.lambda1,
                                                   abs=0.03)
        assert fit.params.lambda2[0] == pytest.approx(0.1, abs=0.05)
        assert fit.params.lambda2[1] == pytest.approx(1.0, abs=0.15)
        assert fit.params.pi[0] == pytest.approx(0.4, abs=0.1)

    @pytest.mark.parametrize("times,n,msg", [
        (np.array([0.5, 1.0]), 4, "stage-2"),        # no stage-2 failures
        (np.array([2.0, 3.0, 4.0]), 5, "stage-1"),   # no stage-1 failures
        (np.array([0.5]), 3, "two observed"),        # r < 2
        (np.array([0.5, 2.0]), 4, "stage-2"),        # only 1 stage-2, m=2
    ])
    def test_degenerate_inputs_rejected(self, times, n, msg):
        s = CensoredSample(times=times, n=n, tau=1.6)
        with pytest.raises(DegenerateDataError, match=msg):
            fit_em(s, EmConfig(n_starts=1))
