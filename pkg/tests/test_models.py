"""Conjugate updates, predictive laws, exchangeability, and sampling."""

import math

import numpy as np
import pytest

from bayesmerge import (
    BaseLaw,
    ConfigError,
    DeterminingClass,
    DiscreteMeasure,
    DPModel,
    FiniteDirichletModel,
    FiniteLabeled,
    InvalidInput,
    PosteriorState,
    RealLine,
    TupleClass,
    Unsupported,
    bayes_estimator,
    dW,
    empirical,
    initial_state,
    marginal,
    mean_of,
    posterior_sample,
    posterior_update,
    posterior_update_batch,
    predictive_m,
    predictive_one,
    sample_sequence,
)
from bayesmerge.models import model_from_config, parse_kv


@pytest.fixture
def dirichlet3(labels3):
    return FiniteDirichletModel(labels3, (1.0, 1.0, 1.0))


@pytest.fixture
def dp_model():
    return DPModel(alpha=1.0, truncation_T=200)


class TestValidation:
    def test_dirichlet_guards(self, labels3):
        with pytest.raises(ConfigError):
            FiniteDirichletModel(labels3, (1.0, 1.0))
        with pytest.raises(ConfigError):
            FiniteDirichletModel(labels3, (1.0, 0.0, 1.0))
        with pytest.raises(ConfigError):
            FiniteDirichletModel(FiniteLabeled.unit(("only",)), (1.0,))

    def test_dp_guards(self):
        with pytest.raises(ConfigError):
            DPModel(alpha=0.0)
        with pytest.raises(ConfigError):
            # residual (1/2)^4 far above the default bound
            DPModel(alpha=1.0, truncation_T=4)
        ok = DPModel(alpha=1.0, truncation_T=64, residual_bound=1e-6)
        assert ok.residual_expectation == pytest.approx(0.5**64)


class TestSampling:
    def test_seed_determinism(self, dirichlet3, dp_model):
        p1, o1 = sample_sequence(dirichlet3, 50, 99)
        p2, o2 = sample_sequence(dirichlet3, 50, 99)
        assert p1 == p2 and o1 == o2
        q1, x1 = sample_sequence(dp_model, 50, 99)
        q2, x2 = sample_sequence(dp_model, 50, 99)
        assert q1 == q2
        np.testing.assert_array_equal(x1, x2)

    def test_symmetric_prior_marginal_uniform(self, labels3):
        # z-test on the first-draw marginal at 4 sigma
        model = FiniteDirichletModel(labels3, (1.0, 1.0, 1.0))
        n_rep = 20000
        firsts = [
            sample_sequence(model, 1, int(seed))[1][0] for seed in range(n_rep)
        ]
        count_a = sum(1 for x in firsts if x == "a")
        p = 1.0 / 3.0
        sigma = math.sqrt(p * (1 - p) * n_rep)
        assert abs(count_a - p * n_rep) <= 4.0 * sigma

    def test_empirical_approaches_directing(self, dirichlet3, labels3):
        p, obs = sample_sequence(dirichlet3, 20000, 3)
        cls = DeterminingClass.for_space(labels3, truncation_K=9)
        d_small = dW(empirical(obs[:200], labels3), p, cls)
        d_big = dW(empirical(obs, labels3), p, cls)
        assert d_big < d_small

    def test_dp_residual_and_mass(self, dp_model):
        p, xs = sample_sequence(dp_model, 10, 5)
        assert abs(p.weights.sum() - 1.0) <= 1e-12
        assert len(xs) == 10


class TestPosterior:
    def test_conjugate_count_update(self, labels3):
        model = FiniteDirichletModel(labels3, (1.0, 1.0, 1.0))
        st = posterior_update(initial_state(model), "b")
        assert st.counts == (0, 1, 0)
        assert st.n == 1

    def test_permutation_invariance(self, dirichlet3, dp_model, rng):
        obs = ["a", "b", "b", "c", "a", "a"]
        perm = list(rng.permutation(obs))
        s1 = posterior_update_batch(initial_state(dirichlet3), obs)
        s2 = posterior_update_batch(initial_state(dirichlet3), perm)
        assert s1.counts == s2.counts
        assert predictive_one(s1) == predictive_one(s2)
        xs = rng.normal(size=6)
        d1 = posterior_update_batch(initial_state(dp_model), xs)
        d2 = posterior_update_batch(initial_state(dp_model), rng.permutation(xs))
        assert predictive_one(d1) == predictive_one(d2)

    def test_dp_posterior_composition(self, dp_model, rng):
        xs = rng.normal(size=5)
        st = posterior_update_batch(initial_state(dp_model), xs)
        p1 = predictive_one(st)
        # the predictive is (alpha P0 + sum of deltas) / (alpha + n)
        want_data_mass = 5.0 / (dp_model.alpha + 5.0)
        data_mass = sum(w for a, w in p1.as_dict().items() if a in set(float(x) for x in xs))
        assert data_mass == pytest.approx(want_data_mass, abs=1e-12)

    def test_posterior_sample_mean(self, labels3):
        model = FiniteDirichletModel(labels3, (2.0, 1.0, 1.0))
        st = posterior_update_batch(initial_state(model), ["a", "a", "b"])
        count = 10000
        mm = posterior_sample(st, count, 7)
        rows = np.stack([q.weights if q.support_size == 3 else _full(q) for q in mm.support])
        a = np.array([2.0, 1.0, 1.0]) + np.array([2.0, 1.0, 0.0])
        mean = a / a.sum()
        var = mean * (1 - mean) / (a.sum() + 1)
        err = np.abs(rows.mean(axis=0) - mean)
        assert np.all(err <= 4.0 * np.sqrt(var / count))

    def test_posterior_sample_single(self, dirichlet3):
        mm = posterior_sample(initial_state(dirichlet3), 1, 0)
        assert mm.support_size == 1
        assert mm.weights[0] == 1.0

    def test_posterior_sample_determinism(self, dp_model, rng):
        st = posterior_update_batch(initial_state(dp_model), rng.normal(size=4))
        m1 = posterior_sample(st, 3, 11)
        m2 = posterior_sample(st, 3, 11)
        assert all(a == b for a, b in zip(m1.support, m2.support))


def _full(q):
    d = q.as_dict()
    return np.array([d.get(lab, 0.0) for lab in q.space.labels])


class TestPredictive:
    def test_no_data_uniform(self):
        space = FiniteLabeled.unit(("1", "2"))
        model = FiniteDirichletModel(space, (1.0, 1.0))
        p1 = predictive_one(initial_state(model))
        assert p1.as_dict() == {"1": 0.5, "2": 0.5}

    def test_one_observation(self):
        space = FiniteLabeled.unit(("1", "2"))
        model = FiniteDirichletModel(space, (1.0, 1.0))
        st = posterior_update(initial_state(model), "1")
        assert predictive_one(st).as_dict() == {
            "1": pytest.approx(2 / 3),
            "2": pytest.approx(1 / 3),
        }

    def test_two_step_urn(self):
        # no data, uniform prior on two labels: ordered (1,1) has weight
        # (1/2)(2/3) = 1/3 and the mixed class collects 2 * (1/2)(1/3)
        space = FiniteLabeled.unit(("1", "2"))
        model = FiniteDirichletModel(space, (1.0, 1.0))
        pm = predictive_m(initial_state(model), 2)
        want = {
            TupleClass(space, ("1", "1")): 1 / 3,
            TupleClass(space, ("1", "2")): 1 / 3,
            TupleClass(space, ("2", "2")): 1 / 3,
        }
        assert pm.as_dict() == pytest.approx(want)

    def test_m1_is_predictive_one(self, dirichlet3, rng):
        st = posterior_update_batch(initial_state(dirichlet3), ["a", "c", "c"])
        pm = predictive_m(st, 1)
        assert marginal(pm) == predictive_one(st)

    def test_mass_one(self, rng):
        for k in (2, 3, 4):
            space = FiniteLabeled.unit(tuple(str(i) for i in range(k)))
            model = FiniteDirichletModel(space, tuple(rng.uniform(0.5, 2.0, size=k)))
            st = posterior_update_batch(
                initial_state(model), [str(int(i)) for i in rng.integers(0, k, size=6)]
            )
            for m in (1, 2, 3):
                pm = predictive_m(st, m)
                assert pm.weights.sum() == pytest.approx(1.0, abs=1e-12)

    def test_marginal_consistency(self, dirichlet3):
        st = posterior_update_batch(initial_state(dirichlet3), ["a", "b"])
        p1 = predictive_one(st).as_dict()
        for m in (2, 3):
            got = marginal(predictive_m(st, m)).as_dict()
            assert got == pytest.approx(p1, abs=1e-14)

    def test_dp_unsupported(self, dp_model):
        with pytest.raises(Unsupported):
            predictive_m(initial_state(dp_model), 2)

    def test_martingale_coherence(self, dirichlet3):
        # averaging the one-step-ahead predictive over the predictive
        # itself returns the current predictive, exactly
        st = posterior_update_batch(initial_state(dirichlet3), ["a", "a", "b"])
        p1 = predictive_one(st)
        mix = np.zeros(3)
        for lab, w in p1.as_dict().items():
            nxt = predictive_one(posterior_update(st, lab))
            mix += w * _full(nxt)
        np.testing.assert_allclose(mix, _full(p1), atol=1e-14)

    def test_predictive_is_posterior_mean(self, dirichlet3):
        st = posterior_update_batch(initial_state(dirichlet3), ["b", "b", "c"])
        count = 20000
        mm = posterior_sample(st, count, 13)
        rows = np.stack([_full(q) for q in mm.support])
        p1 = _full(predictive_one(st))
        err = np.abs(rows.mean(axis=0) - p1)
        sigma = np.sqrt(p1 * (1 - p1) / count)
        assert np.all(err <= 4.5 * sigma)

    def test_posterior_mean_approaches_predictive_in_series_metric(self, dirichlet3, labels3):
        # the mixture mean of posterior draws converges to the one-step
        # predictive as the draw count grows
        st = posterior_update_batch(initial_state(dirichlet3), ["a", "c", "c", "c"])
        cls = DeterminingClass.for_space(labels3, truncation_K=9)
        p1 = predictive_one(st)
        dists = []
        for count in (50, 5000):
            mm = posterior_sample(st, count, 99)
            mean_w = np.stack([_full(q) for q in mm.support]).mean(axis=0)
            mean_meas = DiscreteMeasure(labels3, labels3.labels, mean_w / mean_w.sum())
            dists.append(dW(mean_meas, p1, cls))
        assert dists[1] < dists[0]


class TestBayesEstimator:
    def test_constant(self, dirichlet3):
        st = posterior_update_batch(initial_state(dirichlet3), ["a"])
        assert bayes_estimator(st, lambda x: 2.5) == pytest.approx(2.5)

    def test_label_indicator(self, labels3):
        model = FiniteDirichletModel(labels3, (1.0, 2.0, 3.0))
        st = posterior_update_batch(initial_state(model), ["b", "b"])
        val = bayes_estimator(st, lambda lab: 1.0 if lab == "b" else 0.0)
        assert val == pytest.approx((2.0 + 2.0) / (6.0 + 2.0))

    def test_dp_linearity(self, dp_model, rng):
        xs = rng.normal(size=8)
        st = posterior_update_batch(initial_state(dp_model), xs)
        g = np.tanh
        mg0 = mean_of(dp_model.base_measure(), g)
        want = (dp_model.alpha * mg0 + float(np.tanh(xs).sum())) / (dp_model.alpha + 8)
        assert bayes_estimator(st, g) == pytest.approx(want, abs=1e-12)


class TestConfig:
    def test_parse_kv(self):
        cfg = parse_kv("a = 1\n# comment\nb = x,y\n\nc = 2  # trailing\n")
        assert cfg == {"a": "1", "b": "x,y", "c": "2"}
        with pytest.raises(ConfigError):
            parse_kv("not a pair\n")

    def test_dirichlet_from_config(self):
        cfg = parse_kv("model = dirichlet\nlabels = a,b,c\nconcentration = 1,1,2\n")
        model = model_from_config(cfg)
        assert isinstance(model, FiniteDirichletModel)
        assert model.concentration == (1.0, 1.0, 2.0)

    def test_dp_from_config(self):
        cfg = parse_kv("model = dp\nalpha = 0.5\ntruncation = 100\n")
        model = model_from_config(cfg)
        assert isinstance(model, DPModel)
        assert model.alpha == 0.5
        bad = parse_kv("model = nosuch\n")
        with pytest.raises(ConfigError):
            model_from_config(bad)
