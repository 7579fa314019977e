"""Latent-space reliability analysis.

Three frozen stages: an autoencoder compresses fused input-response data
into a low-dimensional latent space, a Gaussian process models the
response over those latents, and a feedforward estimator (trained by an
evolutionary algorithm on labeled plus unlabeled data) maps raw inputs to
latent coordinates. Reliability is then a Monte Carlo count of predicted
failures.
"""

from .autoencoder import (
    AdamState,
    AutoencoderNet,
    FusedMatrix,
    encode_latent,
    fuse_dataset,
    reconstruction_loss,
    train_autoencoder,
)
from .dfn import DfnNet, dfn_forward, genome_decode, genome_encode, genome_length
from .gpmodel import GpHyperparams, GpModel, fit_gp, kernel, kernel_matrix
from .mathcore import (
    ColumnScaler,
    RandomSource,
    cholesky_decompose,
    derive_seed,
    fit_scaler,
    sample_normal,
    sigmoid,
    solve_spd,
)
from .problem import (
    InputSpec,
    LabeledDataset,
    LimitStateExpr,
    UnlabeledDataset,
    build_labeled_dataset,
    eval_limit_state,
    eval_limit_state_batch,
    load_csv_dataset,
    parse_limit_state,
    sample_inputs,
    write_dataset_csv,
)
from .reliability import (
    McsConfig,
    ReliabilityReport,
    classify_sample,
    estimate_reliability,
    export_latent_scatter,
    oracle_reliability,
)
from .semisup import (
    EaConfig,
    Pipeline,
    PipelineConfig,
    TrainingTrace,
    aggregated_loss,
    consistency_loss,
    evolve_generation,
    labeled_mse,
    run_pipeline,
    train_dfn_ea,
    train_pipeline_from_data,
    unlabeled_roundtrip,
)

__version__ = "0.1.0"
