import json
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from cdmpoisson.arrival import InterArrivals
from cdmpoisson.errors import DomainError, EstimationError
from cdmpoisson.estimators import (FitConfig, FitReport, GammaHyperParams, PosteriorState,
                                   _Objective, baseline_predict, classical_rate,
                                   fit_prior_empirical_bayes, load_prior,
                                   marginal_log_likelihood, map_rate, moment_init,
                                   posterior_mean_rate, posterior_update)
from cdmpoisson.numerics import ln_gamma

gaps = st.floats(min_value=1e-3, max_value=10.0)
histories = st.lists(gaps, min_size=0, max_size=40)
priors = st.builds(GammaHyperParams, st.floats(0.05, 50.0), st.floats(0.05, 50.0))


def ia(*values):
    return InterArrivals(tuple(values))


def test_baseline():
    assert baseline_predict(ia(1.5, 0.5)) == 0.5
    assert baseline_predict(ia(3.0)) == 3.0
    with pytest.raises(EstimationError):
        baseline_predict(ia())


def test_classical():
    assert classical_rate(ia(0.5, 0.5, 0.5, 0.5)) == 2.0
    assert classical_rate(ia(0.5)) == 2.0
    with pytest.raises(EstimationError):
        classical_rate(ia())


def test_posterior_update_examples():
    prior = GammaHyperParams(2.0, 1.0)
    assert posterior_update(prior, ia()) == PosteriorState(2.0, 1.0, 0, 0.0)
    assert posterior_update(prior, ia(0.5, 1.5)) == PosteriorState(4.0, 3.0, 2, 2.0)
    seq = posterior_update(posterior_update(prior, ia(0.5)), ia(1.5))
    assert seq == posterior_update(prior, ia(0.5, 1.5))


def test_posterior_update_uses_censored_exposure():
    p = posterior_update(GammaHyperParams(2.0, 1.0), InterArrivals((0.5, 1.5), censored=0.25))
    assert p == PosteriorState(4.0, 3.25, 2, 2.25)


@given(priors, histories, st.randoms(use_true_random=False), st.integers(0, 40))
def test_order_and_partition_invariance(prior, values, rnd, cut):
    batch = posterior_update(prior, ia(*values))
    shuffled = list(values)
    rnd.shuffle(shuffled)
    cut = min(cut, len(shuffled))
    seq = posterior_update(posterior_update(prior, ia(*shuffled[:cut])), ia(*shuffled[cut:]))
    assert seq.n == batch.n and seq.alpha_post == batch.alpha_post
    assert seq.beta_post == pytest.approx(batch.beta_post, rel=1e-12)
    assert seq.T == pytest.approx(batch.T, rel=1e-12, abs=0)


def test_map_and_mean():
    assert map_rate(PosteriorState(2.0, 1.0, 0, 0)) == 1.0
    assert map_rate(PosteriorState(4.0, 3.0, 0, 0)) == 1.0
    with pytest.raises(EstimationError):
        map_rate(PosteriorState(1.0, 5.0, 0, 0))
    assert posterior_mean_rate(PosteriorState(2.0, 1.0, 0, 0)) == 2.0
    assert posterior_mean_rate(PosteriorState(1.0, 5.0, 0, 0)) == 0.2
    assert posterior_mean_rate(PosteriorState(4.0, 3.0, 0, 0)) == pytest.approx(4 / 3)


@given(priors, st.lists(gaps, min_size=1, max_size=40))
def test_map_below_mean_and_shrinkage(prior, values):
    post = posterior_update(prior, ia(*values))
    if post.alpha_post > 1:
        assert map_rate(post) < posterior_mean_rate(post)
    if prior.alpha > 1:
        prior_mode = (prior.alpha - 1) / prior.beta
        mle = classical_rate(ia(*values))
        assert abs(map_rate(post) - mle) <= abs(prior_mode - mle) * (1 + 1e-12) + 1e-12


def test_law_of_large_numbers():
    rng = np.random.default_rng(99)
    prior = GammaHyperParams(2.0, 0.5)
    for true_rate in (0.5, 4.0, 20.0):
        values = rng.exponential(1.0 / true_rate, 10_000)
        stream = ia(*values)
        post = posterior_update(prior, stream)
        assert map_rate(post) == pytest.approx(true_rate, rel=0.03)
        assert classical_rate(stream) == pytest.approx(true_rate, rel=0.03)


class TestMarginalLikelihood:
    def test_single_event_closed_form(self):
        a, b, t = 2.5, 0.7, 1.3
        expected = math.log(a) + a * math.log(b) - (a + 1) * math.log(b + t)
        got = marginal_log_likelihood(GammaHyperParams(a, b), [ia(t)])
        assert got == pytest.approx(expected, rel=1e-13)

    def test_unit_example(self):
        got = marginal_log_likelihood(GammaHyperParams(1.0, 1.0), [ia(1.0)])
        assert got == pytest.approx(-1.3862943611, abs=1e-10)

    @given(priors, st.lists(st.lists(gaps, min_size=1, max_size=10), min_size=1, max_size=8))
    def test_additive(self, hyper, corpus):
        events = [ia(*v) for v in corpus]
        total = marginal_log_likelihood(hyper, events)
        parts = sum(marginal_log_likelihood(hyper, [e]) for e in events)
        assert total == pytest.approx(parts, rel=1e-10, abs=1e-9)

    def test_matches_numeric_integral(self):
        # oracle: integrate likelihood x prior density over the rate
        from scipy import integrate
        a, b = 1.7, 0.6
        values = (0.3, 1.1, 0.4)
        n, T = len(values), sum(values)

        def integrand(lam):
            log_prior = a * math.log(b) - ln_gamma(a) + (a - 1) * math.log(lam) - b * lam
            return math.exp(log_prior + n * math.log(lam) - lam * T)

        value, _ = integrate.quad(integrand, 0, np.inf, epsabs=1e-14, epsrel=1e-12)
        got = marginal_log_likelihood(GammaHyperParams(a, b), [ia(*values)])
        assert got == pytest.approx(math.log(value), abs=1e-9)

    def test_rejects_empty_event(self):
        with pytest.raises(DomainError):
            marginal_log_likelihood(GammaHyperParams(1.0, 1.0), [ia()])


def test_objective_derivatives_match_finite_differences():
    rng = np.random.default_rng(5)
    events = [ia(*rng.exponential(0.4, rng.integers(1, 20))) for _ in range(50)]
    n = np.array([e.count for e in events], float)
    T = np.array([e.total for e in events])
    obj = _Objective(n, T)
    theta = np.array([0.4, -0.3])
    grad, hess = obj.derivatives(theta)
    h = 1e-5
    for i in range(2):
        e = np.zeros(2)
        e[i] = h
        fd = (obj.value(theta + e) - obj.value(theta - e)) / (2 * h)
        assert grad[i] == pytest.approx(fd, rel=1e-6)
        g_plus, _ = obj.derivatives(theta + e)
        g_minus, _ = obj.derivatives(theta - e)
        assert hess[:, i] == pytest.approx((g_plus - g_minus) / (2 * h), rel=1e-5)


class TestFit:
    def _corpus(self, alpha=2.0, beta=0.5, k=3000, m=6, seed=11):
        rng = np.random.default_rng(seed)
        lam = rng.gamma(alpha, 1.0 / beta, k)
        return [ia(*rng.exponential(1.0 / l, m)) for l in lam]

    def test_moment_init_rule(self):
        events = self._corpus()
        init, degenerate = moment_init(events)
        r = np.array([e.count / e.total for e in events])
        assert not degenerate
        assert init.alpha == pytest.approx(r.mean() ** 2 / r.var())
        assert init.beta == pytest.approx(r.mean() / r.var())

    def test_converges_and_improves(self):
        events = self._corpus()
        rep = fit_prior_empirical_bayes(events)
        assert rep.converged and rep.grad_norm < 1e-8
        assert rep.log_marginal >= rep.initial_log_marginal
        assert rep.n_events == len(events)
        # the maximum beats nearby points
        for da, db in [(1.01, 1), (0.99, 1), (1, 1.01), (1, 0.99)]:
            other = GammaHyperParams(rep.hyper.alpha * da, rep.hyper.beta * db)
            assert marginal_log_likelihood(other, events) < rep.log_marginal

    def test_recovers_generating_prior(self):
        rep = fit_prior_empirical_bayes(self._corpus(k=20_000, m=10, seed=3))
        assert rep.hyper.alpha == pytest.approx(2.0, rel=0.05)
        assert rep.hyper.beta == pytest.approx(0.5, rel=0.05)

    def test_single_event_rejected(self):
        with pytest.raises(EstimationError):
            fit_prior_empirical_bayes([ia(1.0, 2.0)])

    def test_degenerate_corpus_flagged(self):
        rep = fit_prior_empirical_bayes([ia(1.0, 1.0)] * 10, FitConfig(max_iters=50))
        assert rep.degenerate and not rep.converged

    def test_iteration_cap_reports_nonconvergence(self):
        rep = fit_prior_empirical_bayes(self._corpus(), FitConfig(max_iters=1))
        assert rep.iterations == 1 and not rep.converged


def test_prior_json_document(tmp_path):
    rep = FitReport(GammaHyperParams(2.0, 0.5), -12.5, 4, True, 10)
    doc = json.loads(rep.to_json())
    assert list(doc) == ["alpha", "beta", "log_marginal", "iterations", "converged",
                         "n_events", "tool_version"]
    path = tmp_path / "prior.json"
    path.write_text(rep.to_json())
    assert load_prior(path) == GammaHyperParams(2.0, 0.5)
