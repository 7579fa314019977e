import csv
import math

import numpy as np
import pytest

from latentrel.errors import EmptyInputError, NonFinitePredictionError
from latentrel.mathcore import RandomSource
from latentrel.problem import InputSpec, parse_limit_state, sample_inputs
from latentrel.reliability import (
    McsConfig,
    classify_batch,
    classify_sample,
    estimate_reliability,
    estimate_reliability_detailed,
    export_latent_scatter,
    oracle_reliability,
    pipeline_predict,
)
from latentrel.semisup import EaConfig, PipelineConfig, run_pipeline

from conftest import REFERENCE_PF


def _fast_cfg():
    return PipelineConfig(
        ae_hidden=(3,),
        latent_dim=2,
        ae_max_epochs=200,
        dfn_hidden=(3,),
        gp_restarts=2,
        gp_max_iterations=60,
        ea=EaConfig(population_size=10, elite_count=2, max_generations=8,
                    stall_window=5, stall_tolerance=1e-9),
    )


def _constant_pipeline(value_text: str, seed=11):
    spec = InputSpec.iid_normal(2, 0.0, 1.0)
    expr = parse_limit_state(value_text, 2)
    pipeline, _ = run_pipeline(expr, spec, 15, 0, _fast_cfg(), master_seed=seed)
    return pipeline, spec, expr


class TestClassify:
    def test_failure_branch(self):
        assert classify_sample(-0.001) == 1

    def test_safe_branch(self):
        assert classify_sample(5.0) == 0

    def test_tie_is_safe(self):
        assert classify_sample(0.0) == 0

    def test_non_finite(self):
        with pytest.raises(NonFinitePredictionError):
            classify_sample(float("nan"))
        with pytest.raises(NonFinitePredictionError):
            classify_batch(np.array([1.0, np.inf]))

    def test_batch(self):
        out = classify_batch(np.array([-1.0, 0.0, 2.0, -0.5]))
        assert out.tolist() == [1, 0, 0, 1]


class TestEstimate:
    def test_constant_safe_is_exactly_one(self):
        pipeline, spec, _ = _constant_pipeline("1.0")
        for n in (1, 10, 500):
            rep = estimate_reliability(pipeline, spec, McsConfig(sample_count=n, seed=3))
            assert rep.reliability == 1.0
            assert rep.failure_probability == 0.0
            assert rep.failure_count == 0

    def test_constant_fail_is_exactly_zero(self):
        pipeline, spec, _ = _constant_pipeline("-1.0")
        rep = estimate_reliability(pipeline, spec, McsConfig(sample_count=200, seed=3))
        assert rep.reliability == 0.0
        assert rep.failure_count == 200

    def test_single_sample_is_binary(self):
        pipeline, spec, _ = _constant_pipeline("1.0")
        rep = estimate_reliability(pipeline, spec, McsConfig(sample_count=1, seed=1))
        assert rep.reliability in (0.0, 1.0)

    def test_report_arithmetic(self):
        pipeline, spec, _ = _constant_pipeline("1.0")
        rep = estimate_reliability(pipeline, spec, McsConfig(sample_count=64, seed=9))
        assert rep.reliability + rep.failure_probability == 1.0
        assert rep.mc_standard_error == math.sqrt(
            rep.reliability * (1 - rep.reliability) / rep.n_samples
        )
        assert rep.n_samples == 64 and rep.seed == 9

    def test_deterministic_under_seed(self):
        pipeline, spec, _ = _constant_pipeline("1.0")
        r1 = estimate_reliability(pipeline, spec, McsConfig(sample_count=100, seed=5))
        r2 = estimate_reliability(pipeline, spec, McsConfig(sample_count=100, seed=5))
        assert r1 == r2

    def test_batching_invariance(self):
        pipeline, spec, _ = _constant_pipeline("1.0")
        big = estimate_reliability(pipeline, spec, McsConfig(sample_count=300, batch_size=300, seed=2))
        small = estimate_reliability(pipeline, spec, McsConfig(sample_count=300, batch_size=7, seed=2))
        assert big == small

    def test_invalid_config(self):
        with pytest.raises(EmptyInputError):
            McsConfig(sample_count=0)
        with pytest.raises(EmptyInputError):
            McsConfig(sample_count=10, batch_size=0)


class TestPipelinePredict:
    def test_batched_equals_unbatched(self):
        pipeline, spec, _ = _constant_pipeline("1.0")
        x = sample_inputs(spec, 50, RandomSource(1))
        t1, m1 = pipeline_predict(pipeline, x, batch_size=50)
        t2, m2 = pipeline_predict(pipeline, x, batch_size=6)
        assert np.array_equal(t1, t2) and np.array_equal(m1, m2)


class TestOracle:
    def test_standard_normal_half(self):
        expr = parse_limit_state("x1", 1)
        spec = InputSpec.iid_normal(1, 0.0, 1.0)
        n = 10_000
        rep = oracle_reliability(expr, spec, n, RandomSource(123))
        assert abs(rep.reliability - 0.5) < 3.0 / (2.0 * math.sqrt(n))

    def test_constant_fail(self):
        expr = parse_limit_state("-1.0", 1)
        spec = InputSpec.iid_normal(1, 0.0, 1.0)
        rep = oracle_reliability(expr, spec, 100, RandomSource(5))
        assert rep.reliability == 0.0

    def test_benchmark_matches_frozen_reference(self, benchmark_expr, benchmark_spec):
        n = 200_000
        rep = oracle_reliability(benchmark_expr, benchmark_spec, n, RandomSource(31))
        # 4 combined-MC sigmas around the independently frozen value
        bound = 4.0 * math.sqrt(REFERENCE_PF * (1 - REFERENCE_PF) / n)
        assert abs(rep.failure_probability - REFERENCE_PF) < bound
        assert abs(rep.reliability - (1.0 - REFERENCE_PF)) < bound

    def test_convergence_between_sample_sizes(self, benchmark_expr, benchmark_spec):
        # estimates at N and 4N agree within 3 sigma for nearly all seeds
        n = 2500
        hits = 0
        for seed in range(20):
            small = oracle_reliability(benchmark_expr, benchmark_spec, n, RandomSource(1000 + seed))
            big = oracle_reliability(benchmark_expr, benchmark_spec, 4 * n, RandomSource(2000 + seed))
            r = small.reliability
            if abs(small.reliability - big.reliability) < 3.0 * math.sqrt(r * (1 - r) / n):
                hits += 1
        assert hits >= 18

    def test_batching_invariance(self, benchmark_expr, benchmark_spec):
        a = oracle_reliability(benchmark_expr, benchmark_spec, 5000, RandomSource(7), batch_size=5000)
        b = oracle_reliability(benchmark_expr, benchmark_spec, 5000, RandomSource(7), batch_size=512)
        assert a.failure_count == b.failure_count

    def test_needs_samples(self):
        expr = parse_limit_state("x1", 1)
        spec = InputSpec.iid_normal(1, 0.0, 1.0)
        with pytest.raises(EmptyInputError):
            oracle_reliability(expr, spec, 0, RandomSource(1))


class TestScatterExport:
    def test_empty_input_writes_header_only(self, tmp_path):
        pipeline, spec, _ = _constant_pipeline("1.0")
        path = tmp_path / "scatter.csv"
        export_latent_scatter(pipeline, np.empty((0, 2)), path)
        assert path.read_text() == "theta1,theta2,pred_y,pred_class\n"

    def test_columns_consistent(self, tmp_path):
        pipeline, spec, expr = _constant_pipeline("1.0")
        x = sample_inputs(spec, 40, RandomSource(2))
        path = tmp_path / "scatter.csv"
        export_latent_scatter(pipeline, x, path, true_expr=expr)
        with open(path) as fh:
            rows = list(csv.DictReader(fh))
        assert len(rows) == 40
        for row in rows:
            assert set(row) == {
                "theta1", "theta2", "pred_y", "pred_class",
                "true_y", "true_class", "true_theta1", "true_theta2",
            }
            assert int(row["pred_class"]) == (1 if float(row["pred_y"]) < 0 else 0)
            assert int(row["true_class"]) == (1 if float(row["true_y"]) < 0 else 0)
            assert 0.0 < float(row["theta1"]) < 1.0

    def test_matches_pipeline_predictions(self, tmp_path):
        pipeline, spec, _ = _constant_pipeline("1.0")
        cfg = McsConfig(sample_count=30, seed=4)
        report, x, theta, mu = estimate_reliability_detailed(pipeline, spec, cfg)
        path = tmp_path / "scatter.csv"
        export_latent_scatter(pipeline, x, path)
        with open(path) as fh:
            rows = list(csv.DictReader(fh))
        got_mu = np.array([float(r["pred_y"]) for r in rows])
        assert np.array_equal(got_mu, mu)
        assert sum(int(r["pred_class"]) for r in rows) == report.failure_count


class TestCaseStudyClassification:
    def test_confident_predictions_agree_with_truth(self, case_run, benchmark_expr, benchmark_spec):
        # where |mean| > 3 sqrt(var), the predicted class should almost
        # always match the true class
        pipeline = case_run.pipeline
        x = sample_inputs(benchmark_spec, 20_000, RandomSource(444))
        theta = pipeline.dfn.forward_batch(x)
        mu = pipeline.gp.predict_mean_batch(theta)
        var = pipeline.gp.predict_var_batch(theta)
        from latentrel.problem import eval_limit_state_batch

        g = eval_limit_state_batch(benchmark_expr, x)
        confident = np.abs(mu) > 3.0 * np.sqrt(var)
        assert confident.sum() > 1000
        agree = (mu[confident] < 0) == (g[confident] < 0)
        assert agree.mean() >= 0.95
