"""Monte Carlo reliability estimation.

``estimate_reliability`` pushes sampled inputs through the trained
pipeline (latent estimates, then GP posterior means) and counts predicted
failures; ``oracle_reliability`` evaluates the true limit state directly
and serves as the independent reference. A sample fails when its
(predicted) response is strictly negative; reliability is the complement
of the failure fraction.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import EmptyInputError, NonFinitePredictionError
from .mathcore import RandomSource
from .problem import InputSpec, LimitStateExpr, eval_limit_state_batch, sample_inputs
from .semisup import Pipeline


@dataclass
class McsConfig:
    sample_count: int = 100_000
    batch_size: int = 4096
    seed: int = 0

    def __post_init__(self):
        if self.sample_count < 1:
            raise EmptyInputError("sample_count must be at least 1")
        if self.batch_size < 1:
            raise EmptyInputError("batch_size must be at least 1")


@dataclass(frozen=True)
class ReliabilityReport:
    n_samples: int
    failure_count: int
    reliability: float
    failure_probability: float
    mc_standard_error: float
    seed: int
    config_hash: str = ""

    def to_dict(self) -> dict:
        return {
            "n_samples": self.n_samples,
            "failure_count": self.failure_count,
            "reliability": self.reliability,
            "failure_probability": self.failure_probability,
            "mc_standard_error": self.mc_standard_error,
            "seed": self.seed,
            "config_hash": self.config_hash,
        }


def classify_sample(pred_mean: float) -> int:
    """1 for a failure (strictly negative response), 0 otherwise."""
    if not math.isfinite(pred_mean):
        raise NonFinitePredictionError(f"prediction is not finite: {pred_mean!r}")
    return 1 if pred_mean < 0.0 else 0


def classify_batch(preds: np.ndarray) -> np.ndarray:
    preds = np.asarray(preds, dtype=float)
    if not np.all(np.isfinite(preds)):
        raise NonFinitePredictionError("predictions contain non-finite values")
    return (preds < 0.0).astype(np.int64)


def _make_report(
    n: int, failure_count: int, seed: int, config_hash: str
) -> ReliabilityReport:
    failure_probability = failure_count / n
    reliability = 1.0 - failure_probability
    return ReliabilityReport(
        n_samples=n,
        failure_count=failure_count,
        reliability=reliability,
        failure_probability=failure_probability,
        mc_standard_error=math.sqrt(reliability * (1.0 - reliability) / n),
        seed=seed,
        config_hash=config_hash,
    )


def pipeline_predict(
    pipeline: Pipeline, x: np.ndarray, batch_size: int = 4096
) -> tuple[np.ndarray, np.ndarray]:
    """Latent estimates and GP mean responses for raw inputs, batched."""
    x = np.asarray(x, dtype=float)
    theta = np.empty((x.shape[0], pipeline.nz))
    mu = np.empty(x.shape[0])
    for start in range(0, x.shape[0], batch_size):
        block = x[start : start + batch_size]
        t = pipeline.dfn.forward_batch(block)
        theta[start : start + block.shape[0]] = t
        mu[start : start + block.shape[0]] = pipeline.gp.predict_mean_batch(t)
    return theta, mu


def estimate_reliability_detailed(
    pipeline: Pipeline, spec: InputSpec, cfg: McsConfig, config_hash: str = ""
) -> tuple[ReliabilityReport, np.ndarray, np.ndarray, np.ndarray]:
    """As :func:`estimate_reliability`, also returning (x, theta, mu)."""
    rng = RandomSource(cfg.seed)
    x = sample_inputs(spec, cfg.sample_count, rng)
    theta, mu = pipeline_predict(pipeline, x, batch_size=cfg.batch_size)
    failures = int(classify_batch(mu).sum())
    report = _make_report(cfg.sample_count, failures, cfg.seed, config_hash)
    return report, x, theta, mu


def estimate_reliability(
    pipeline: Pipeline, spec: InputSpec, cfg: McsConfig, config_hash: str = ""
) -> ReliabilityReport:
    """Reliability of the surrogate chain under the input randomness.

    Inputs are drawn in one pass from the configured seed; predictions run
    in ``batch_size`` blocks to bound peak memory.
    """
    report, _, _, _ = estimate_reliability_detailed(pipeline, spec, cfg, config_hash)
    return report


# sampling is chunked at a fixed width so the draw sequence (hence the
# sample set) depends only on the seed, never on the evaluation batch size
_SAMPLE_CHUNK = 1_000_000


def oracle_reliability(
    expr: LimitStateExpr,
    spec: InputSpec,
    n_samples: int,
    rng: RandomSource,
    config_hash: str = "",
    batch_size: int = 100_000,
) -> ReliabilityReport:
    """Direct Monte Carlo on the true limit state (no surrogate)."""
    if n_samples < 1:
        raise EmptyInputError("n_samples must be at least 1")
    seed = rng.seed
    failures = 0
    remaining = n_samples
    while remaining > 0:
        chunk = min(remaining, _SAMPLE_CHUNK)
        x = sample_inputs(spec, chunk, rng)
        for start in range(0, chunk, batch_size):
            g = eval_limit_state_batch(expr, x[start : start + batch_size])
            failures += int((g < 0.0).sum())
        remaining -= chunk
    return _make_report(n_samples, failures, seed, config_hash)


def export_latent_scatter(
    pipeline: Pipeline,
    x: np.ndarray,
    path,
    true_expr: LimitStateExpr | None = None,
    batch_size: int = 4096,
) -> None:
    """Write a plot-ready CSV of latent estimates and predictions.

    Columns are ``theta1..theta<nz>, pred_y, pred_class``. When the true
    limit state is supplied, ``true_y, true_class`` plus the encoder
    latents of the true-response fusion (``true_theta1..``) are appended,
    giving the estimated-versus-actual picture for the same inputs.
    """
    x = np.asarray(x, dtype=float)
    nz = pipeline.nz
    header = [f"theta{i + 1}" for i in range(nz)] + ["pred_y", "pred_class"]
    if true_expr is not None:
        header += ["true_y", "true_class"] + [f"true_theta{i + 1}" for i in range(nz)]

    columns: list[np.ndarray]
    if x.shape[0] == 0:
        columns = []
    else:
        theta, mu = pipeline_predict(pipeline, x, batch_size=batch_size)
        pred_class = classify_batch(mu)
        columns = [theta[:, i] for i in range(nz)] + [mu, pred_class]
        if true_expr is not None:
            true_y = eval_limit_state_batch(true_expr, x)
            fused = np.hstack([x, true_y[:, None]])
            true_theta = pipeline.autoencoder.encode(pipeline.autoencoder.scaler.apply(fused))
            columns += [true_y, classify_batch(true_y)]
            columns += [true_theta[:, i] for i in range(nz)]

    with open(path, "w", newline="") as fh:
        fh.write(",".join(header) + "\n")
        if columns:
            rows = np.column_stack(columns)
            int_cols = {nz + 1} | ({nz + 3} if true_expr is not None else set())
            for row in rows:
                cells = [
                    str(int(v)) if j in int_cols else repr(float(v))
                    for j, v in enumerate(row)
                ]
                fh.write(",".join(cells) + "\n")
