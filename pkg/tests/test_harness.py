"""Harness: configuration, seeding, fast paths vs module operations,
coverage statistics, and output files."""

import csv
import math
import os

import numpy as np
import pytest

from bayesmerge import (
    ConfigError,
    DiscreteMeasure,
    DPModel,
    ExperimentConfig,
    FiniteDirichletModel,
    FiniteLabeled,
    InvalidInput,
    MeasureOnMeasures,
    RealLine,
    Trajectory,
    dW_product,
    emit_outputs,
    evaluate_acceptance,
    finitary_statistic,
    level2_dist,
    ot_cost,
    predictive_m,
    prokhorov,
    run_experiment,
    run_posterior_rate,
    run_predictive_rate,
    w1_real,
)
from bayesmerge.harness import (
    G_REGISTRY,
    _anchor_measures,
    _level2_w_value,
    _predictive_tensor,
    _w1_mixed,
    _w_context,
    coverage_vs_bound,
    replicate_stream,
)
from bayesmerge.measures import TupleClass, empirical
from bayesmerge.models import initial_state, posterior_update_batch
from conftest import random_label_measure


@pytest.fixture
def model3():
    return FiniteDirichletModel(FiniteLabeled.unit(("a", "b", "c")), (1.0, 1.0, 1.0))


def small_config(model, **kw):
    base = dict(
        model=model,
        experiment="posterior",
        metric="W",
        n_min=32,
        n_hi=600,
        replicates=3,
        posterior_count=150,
        seed=17,
        out_dir="unused",
    )
    base.update(kw)
    return ExperimentConfig(**base)


class TestConfig:
    def test_zero_replicates_rejected(self, model3):
        with pytest.raises(ConfigError):
            small_config(model3, replicates=0)

    def test_schedule_span_rule(self, model3):
        with pytest.raises(ConfigError):
            small_config(model3, n_min=100, n_hi=500)

    def test_schedule_shape(self, model3):
        cfg = small_config(model3, n_min=32, n_hi=1000, ratio=1.3)
        ns = cfg.n_schedule()
        assert ns[0] == 32 and ns[-1] == 1000
        assert np.all(np.diff(ns) > 0)

    def test_metric_model_compatibility(self):
        dp = DPModel()
        with pytest.raises(ConfigError):
            small_config(dp, metric="W")
        with pytest.raises(ConfigError):
            small_config(dp, experiment="predictive", metric="W")

    def test_from_file(self, tmp_path, model3):
        text = (
            "model = dirichlet\nlabels = a,b,c\nconcentration = 1,1,1\n"
            "experiment = posterior\nmetric = W\nn_min = 32\nn_hi = 600\n"
            "replicates = 2\nposterior_count = 50\nseed = 3\n"
        )
        path = tmp_path / "cfg.txt"
        path.write_text(text)
        cfg = ExperimentConfig.from_file(path)
        assert cfg.model == model3
        assert cfg.replicates == 2

    def test_unknown_key_rejected(self, tmp_path):
        path = tmp_path / "cfg.txt"
        path.write_text("model = dp\nalpha = 1\nnosuchkey = 7\n")
        with pytest.raises(ConfigError):
            ExperimentConfig.from_file(path)


class TestFastPathsAgainstModules:
    def test_w1_mixed_kernel(self, rng):
        # the merged-grid kernel equals the public transport distance
        for _ in range(25):
            n = int(rng.integers(2, 30))
            data = np.sort(rng.normal(size=n))
            w_data = rng.dirichlet(np.ones(n)) * 0.7
            extra = np.sort(rng.normal(size=5))
            w_extra = rng.dirichlet(np.ones(5)) * 0.3
            sp = RealLine()
            draw = DiscreteMeasure(
                sp, np.concatenate([data, extra]), np.concatenate([w_data, w_extra])
            )
            emp = empirical(data, sp)
            got = _w1_mixed(data, w_data, extra, w_extra)
            assert got == pytest.approx(w1_real(draw, emp), abs=1e-12)

    def test_level2_w_stat_matches_module(self, rng, model3):
        cfg = small_config(model3)
        ground, cls2, gmat = _w_context(cfg)
        space = model3.space
        for _ in range(5):
            draws = rng.dirichlet(np.ones(3), size=12)
            e_vec = rng.dirichlet(np.ones(3))
            fast = _level2_w_value(cls2, gmat, draws, e_vec)
            nu = MeasureOnMeasures.uniform(
                space, [DiscreteMeasure(space, space.labels, row) for row in draws]
            )
            target = MeasureOnMeasures.dirac(DiscreteMeasure(space, space.labels, e_vec))
            slow = level2_dist(nu, target, "W", "W", cls=ground, cls2=cls2)
            assert fast == pytest.approx(slow, abs=1e-12)

    def test_predictive_tensor_matches_module(self, rng, model3):
        from bayesmerge.determining import DeterminingClass
        from bayesmerge.harness import _product_tensor, _series_value
        from bayesmerge.measures import product_power
        from bayesmerge.metrics import dW

        space = model3.space
        ground = DeterminingClass.for_space(space, truncation_K=9)
        gmat = ground.values_at(np.arange(3, dtype=np.intp))
        sw = ground.series_weights
        for m in (1, 2, 3):
            counts = rng.integers(0, 20, size=3)
            st = posterior_update_batch(
                initial_state(model3),
                [space.labels[i] for i in np.repeat(np.arange(3), counts)],
            )
            a_post = model3.conc_array + counts
            tensor = _predictive_tensor(a_post, m)
            # fold the ordered tensor onto tuple classes and compare
            pm = predictive_m(st, m)
            folded = {}
            for idx in np.ndindex(*tensor.shape):
                key = TupleClass(space, [space.labels[i] for i in idx])
                folded[key] = folded.get(key, 0.0) + float(tensor[idx])
            assert folded == pytest.approx(pm.as_dict(), abs=1e-12)
            # and the contracted series value matches the module metric
            n = int(counts.sum())
            e_vec = counts / n
            emp = _product_tensor(e_vec, m)
            weight = sw
            for _ in range(m - 1):
                weight = np.multiply.outer(weight, sw)
            fast = float(
                np.sum(weight * np.abs(_series_value(gmat, tensor, m) - _series_value(gmat, emp, m)))
            )
            e_meas = DiscreteMeasure(space, space.labels, e_vec)
            slow = dW_product(pm, product_power(e_meas, m), ground, m)
            assert fast == pytest.approx(slow, abs=1e-12)

    def test_unit_metric_shortcuts(self, rng):
        # on the discrete label metric, transport = total variation and
        # the Prokhorov radius is min(1, TV)
        space = FiniteLabeled.unit(("a", "b", "c", "d"))
        for _ in range(10):
            mu = random_label_measure(rng, space)
            nu = random_label_measure(rng, space)
            tv = 0.5 * float(np.abs(_full(mu, space) - _full(nu, space)).sum())
            assert ot_cost(mu, nu, 1.0) == pytest.approx(tv, abs=1e-9)
            assert prokhorov(mu, nu) == pytest.approx(min(1.0, tv), abs=1e-9)

    def test_dp_posterior_sampler_mean(self, rng):
        # aggregation-decomposition draws must average to the predictive CDF
        from bayesmerge.models import posterior_sample, predictive_one
        from bayesmerge.measures import cdf

        dp = DPModel(alpha=1.0, truncation_T=200)
        xs = rng.normal(size=30)
        st = posterior_update_batch(initial_state(dp), xs)
        count = 400
        mm = posterior_sample(st, count, 123)
        p1 = predictive_one(st)
        for probe in (-0.5, 0.0, 0.8):
            want = cdf(p1, probe)
            got = float(np.mean([cdf(q, probe) for q in mm.support]))
            assert abs(got - want) <= 6.0 * math.sqrt(want * (1 - want) / count)


def _full(mu, space):
    d = mu.as_dict()
    return np.array([d.get(lab, 0.0) for lab in space.labels])


class TestRuns:
    def test_posterior_distances_decrease(self, model3):
        cfg = small_config(model3, n_hi=2000)
        trajs = run_posterior_rate(cfg)
        assert len(trajs) == cfg.replicates
        for t in trajs:
            assert t.raw[-1] < t.raw[0]

    def test_seed_streams_differ_by_replicate(self):
        a = replicate_stream(5, 0).random(4)
        b = replicate_stream(5, 1).random(4)
        assert not np.allclose(a, b)
        c = replicate_stream(5, 0).random(4)
        np.testing.assert_array_equal(a, c)

    def test_workers_parity(self, model3):
        cfg1 = small_config(model3, workers=1)
        cfg2 = small_config(model3, workers=2)
        t1 = run_posterior_rate(cfg1)
        t2 = run_posterior_rate(cfg2)
        for a, b in zip(t1, t2):
            np.testing.assert_array_equal(a.raw, b.raw)

    def test_predictive_m1_identity_gap(self, model3):
        cfg = small_config(model3, experiment="predictive", m=1, n_hi=600)
        trajs = run_predictive_rate(cfg)
        assert all(t.bounds["m1_identity_gap"] <= 1e-12 for t in trajs)

    def test_predictive_below_posterior_transport(self, rng, model3):
        # transport lift: the one-step predictive (the posterior mean) is
        # at most the expected posterior distance from the empirical law
        from bayesmerge.models import posterior_sample, predictive_one

        space = model3.space
        st = posterior_update_batch(
            initial_state(model3), [space.labels[i] for i in rng.integers(0, 3, size=40)]
        )
        counts = np.array(st.counts, dtype=float)
        e_vec = counts / counts.sum()
        p1 = _full(predictive_one(st), space)
        tv_pred = 0.5 * float(np.abs(p1 - e_vec).sum())
        mm = posterior_sample(st, 600, 5)
        tvs = [0.5 * float(np.abs(_full(q, space) - e_vec).sum()) for q in mm.support]
        assert tv_pred <= float(np.mean(tvs)) + 3.0 * float(np.std(tvs)) / math.sqrt(len(tvs))

    def test_eb_checks_hold_small(self):
        dp = DPModel(alpha=1.0, truncation_T=200)
        cfg = ExperimentConfig(
            model=dp, experiment="eb", metric="G1", n_min=32, n_hi=600,
            replicates=2, seed=4, g_name="arctan",
        )
        trajs = run_experiment(cfg)
        for t in trajs:
            assert t.bounds["pointwise_violation"] <= 1e-9
            assert t.bounds["oracle_violation"] <= 1e-9
            np.testing.assert_allclose(
                t.extras["normalized_gap"],
                t.extras["gap"] * cfg.rate_schedule().rates(t.ns),
                atol=1e-15,
            )


class TestFinitaryStatistic:
    def _trajs(self):
        ns = np.array([100, 200, 400])
        return [
            Trajectory(0, ns, np.ones(3), np.array([0.5, 0.4, 0.3])),
            Trajectory(1, ns, np.ones(3), np.array([1.5, 0.2, 0.1])),
        ]

    def test_huge_threshold_full_coverage(self):
        assert finitary_statistic(self._trajs(), 1e9, 0.0, (100, 400)) == 1.0

    def test_zero_threshold_zero_coverage(self):
        assert finitary_statistic(self._trajs(), 0.0, 0.0, (100, 400)) == 0.0

    def test_window_selects(self):
        # windowing past the first point drops the 1.5 spike
        assert finitary_statistic(self._trajs(), 0.4, 0.0, (200, 400)) == 1.0

    def test_empty_window(self):
        with pytest.raises(InvalidInput):
            finitary_statistic(self._trajs(), 1.0, 0.0, (401, 500))

    def test_coverage_vs_bound(self):
        trajs = self._trajs()
        trajs[0].bounds["b"] = 1.0
        trajs[1].bounds["b"] = 1.0
        assert coverage_vs_bound(trajs, "b", 1.0, (100, 400)) == 0.5


class TestOutputs:
    def test_csv_shapes_and_determinism(self, tmp_path, model3):
        cfg = small_config(model3, out_dir=str(tmp_path / "o1"))
        trajs = run_experiment(cfg)
        paths = emit_outputs(trajs, cfg, "exp")
        with open(paths["trajectories"]) as fh:
            rows = list(csv.DictReader(fh))
        assert len(rows) == cfg.replicates * len(cfg.n_schedule())
        # rerun into a second directory: byte identical CSVs
        cfg2 = small_config(model3, out_dir=str(tmp_path / "o2"))
        paths2 = emit_outputs(run_experiment(cfg2), cfg2, "exp")
        for key in ("trajectories", "summary"):
            with open(paths[key], "rb") as fh:
                b1 = fh.read()
            with open(paths2[key], "rb") as fh:
                b2 = fh.read()
            assert b1 == b2
        assert os.path.exists(paths["plot"])

    def test_summary_coverage_recompute(self, tmp_path, model3):
        # the coverage column must equal a recomputation from the emitted
        # trajectory rows
        cfg = small_config(model3, out_dir=str(tmp_path))
        trajs = run_experiment(cfg)
        paths = emit_outputs(trajs, cfg, "exp")
        with open(paths["summary"]) as fh:
            srows = list(csv.DictReader(fh))
        within = [int(r["within_bound"]) for r in srows]
        coverage = float(srows[0]["coverage"])
        assert coverage == pytest.approx(sum(within) / len(within))
        with open(paths["trajectories"]) as fh:
            trows = list(csv.DictReader(fh))
        lo, hi = cfg.window()
        maxima = {}
        for r in trows:
            if lo <= int(r["n"]) <= hi:
                key = int(r["replicate"])
                maxima[key] = max(maxima.get(key, 0.0), float(r["normalized"]))
        L = np.sqrt(2.0) + 0.1
        recomputed = sum(v <= L for v in maxima.values()) / len(maxima)
        assert coverage == pytest.approx(recomputed)
        verdict = evaluate_acceptance(cfg, trajs)
        assert coverage == pytest.approx(verdict["coverage"])
        assert os.path.exists(paths["config"])

    def test_g_registry_vectorized(self):
        for name, g in G_REGISTRY.items():
            out = np.asarray(g(np.array([-1.0, 0.0, 2.0])), dtype=float)
            assert out.shape == (3,)

    def test_anchor_measures_fixed_by_seed(self, model3):
        a1 = _anchor_measures(small_config(model3))
        a2 = _anchor_measures(small_config(model3))
        assert all(x == y for x, y in zip(a1, a2))
