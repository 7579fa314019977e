"""Shared fixtures: the 20-D benchmark problem and its trained pipelines.

The five full training runs are expensive, so they are built once per
session (lazily) and shared between the module tests and the acceptance
suite. Each run snapshots the autoencoder/GP parameters around the
evolutionary stage so freeze guarantees can be asserted bit-for-bit.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import pytest

from latentrel import (
    AdamState,
    EaConfig,
    InputSpec,
    McsConfig,
    Pipeline,
    PipelineConfig,
    RandomSource,
    TrainingTrace,
    build_labeled_dataset,
    estimate_reliability,
    fit_gp,
    fuse_dataset,
    parse_limit_state,
    sample_inputs,
    train_autoencoder,
    train_dfn_ea,
)
from latentrel.reliability import ReliabilityReport

CASE_EXPR_TEXT = "160.5 - (x1^2 + 4)*(x2 - 1)/20 + cos(5*x1) - sum(i=1..20, x_i^2)"
CASE_NR = 20
CASE_MEAN = 2.86
CASE_STD = 0.7
CASE_N_LABELED = 150
CASE_Q_UNLABELED = 1000
CASE_MCS_SAMPLES = 100_000

# Failure fraction of the benchmark limit state under its input law,
# frozen from a 1e7-sample brute-force run (MC s.e. 1.3e-4) and
# cross-checked against the noncentral chi-square tail of the dominant
# sum-of-squares term.
REFERENCE_PF = 0.77467
REFERENCE_RELIABILITY = 1.0 - REFERENCE_PF

ACCEPTANCE_SEEDS = (101, 202, 303, 404, 505)


def case_expr():
    return parse_limit_state(CASE_EXPR_TEXT, CASE_NR)


def case_spec():
    return InputSpec.iid_normal(CASE_NR, CASE_MEAN, CASE_STD)


@pytest.fixture(scope="session")
def benchmark_expr():
    return case_expr()


@pytest.fixture(scope="session")
def benchmark_spec():
    return case_spec()


def _net_bytes(weights, biases) -> bytes:
    return b"".join(np.ascontiguousarray(a).tobytes() for a in weights + biases)


def _gp_bytes(gp) -> bytes:
    return b"".join(
        np.ascontiguousarray(a).tobytes()
        for a in (
            gp.latents,
            gp.y_standardized,
            gp.chol,
            gp.alpha,
            np.array([gp.y_mean, gp.y_std, gp.hyper.signal_std,
                      gp.hyper.length_scale, gp.hyper.noise_std]),
        )
    )


@dataclass
class CaseRun:
    seed: int
    pipeline: Pipeline
    trace: TrainingTrace
    report: ReliabilityReport
    ae_frozen: bool  # autoencoder bytes identical before/after the EA
    gp_frozen: bool


def train_case_run(seed: int, cfg: PipelineConfig | None = None) -> CaseRun:
    """One full benchmark training run, staged so freezes can be checked.

    Mirrors run_pipeline stage-for-stage (same seed derivation labels);
    test_semisup asserts the equivalence once.
    """
    cfg = cfg or PipelineConfig()
    expr = case_expr()
    spec = case_spec()
    master = RandomSource(seed)
    labeled = build_labeled_dataset(expr, spec, CASE_N_LABELED, master.derive("labeled-data"))
    x_u = sample_inputs(spec, CASE_Q_UNLABELED, master.derive("unlabeled-data"))

    fused = fuse_dataset(labeled, cfg.input_range, cfg.response_range)
    dims, latent_index = cfg.ae_layer_dims(fused.width)
    ae, _ = train_autoencoder(
        fused,
        dims,
        latent_index,
        rng=master.derive("autoencoder-init"),
        adam=AdamState(step_size=cfg.adam_step, beta1=cfg.adam_beta1,
                       beta2=cfg.adam_beta2, eps=cfg.adam_eps),
        max_epochs=cfg.ae_max_epochs,
        stall_window=cfg.ae_stall_window,
        stall_tolerance=cfg.ae_stall_tolerance,
    )
    theta_t = ae.encode(fused.data)
    gp = fit_gp(theta_t, labeled.y, restarts=cfg.gp_restarts,
                max_iterations=cfg.gp_max_iterations, tolerance=cfg.gp_tolerance)

    ae_before = _net_bytes(ae.weights, ae.biases)
    gp_before = _gp_bytes(gp)
    dfn_net, trace = train_dfn_ea(
        ae, gp, labeled.x, theta_t, x_u, cfg.dfn_layer_dims(labeled.nr), cfg.ea,
        master.derive("ea"), input_range=cfg.dfn_input_range,
    )
    ae_frozen = _net_bytes(ae.weights, ae.biases) == ae_before
    gp_frozen = _gp_bytes(gp) == gp_before

    pipeline = Pipeline(autoencoder=ae, gp=gp, dfn=dfn_net, master_seed=seed)
    report = estimate_reliability(
        pipeline, spec, McsConfig(sample_count=CASE_MCS_SAMPLES, seed=master.derive("mcs").seed)
    )
    return CaseRun(seed=seed, pipeline=pipeline, trace=trace, report=report,
                   ae_frozen=ae_frozen, gp_frozen=gp_frozen)


@pytest.fixture(scope="session")
def case_runs() -> dict[int, CaseRun]:
    """Five full training runs on the benchmark problem (slow, built once)."""
    return {seed: train_case_run(seed) for seed in ACCEPTANCE_SEEDS}


@pytest.fixture(scope="session")
def case_run(case_runs) -> CaseRun:
    return case_runs[ACCEPTANCE_SEEDS[0]]


@pytest.fixture(scope="session")
def oracle_report():
    """High-N brute-force reference for the benchmark problem."""
    from latentrel import oracle_reliability

    return oracle_reliability(case_expr(), case_spec(), 1_000_000, RandomSource(987654321))
