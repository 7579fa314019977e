"""Pipeline orchestration and evolutionary training of the latent estimator.

The autoencoder and GP are trained first and frozen. The feedforward
estimator is then trained by a generational evolutionary algorithm whose
fitness combines a labeled term (mean squared latent error on the training
sites) and an unlabeled consistency term: estimates for unlabeled inputs
are pushed through the GP and back through the encoder, and the mean
Euclidean gap between the two latent versions is penalized.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .autoencoder import AdamState, AutoencoderNet, fuse_dataset, train_autoencoder
from .dfn import DfnNet, genome_decode, genome_length
from .errors import DivergenceDetectedError, ShapeMismatchError
from .gpmodel import GpModel, fit_gp
from .mathcore import RandomSource, sigmoid
from .problem import InputSpec, LabeledDataset, LimitStateExpr, build_labeled_dataset, sample_inputs


@dataclass
class EaConfig:
    population_size: int = 60
    elite_count: int = 2
    tournament_size: int = 3
    crossover_rate: float = 0.5
    mutation_rate: float = 0.1
    mutation_std: float = 0.1
    max_generations: int = 500
    stall_window: int = 50
    stall_tolerance: float = 1e-5
    alpha_weight: float = 1.0  # labeled MSE coefficient
    beta_weight: float = 1.0  # consistency coefficient

    def __post_init__(self):
        if not 0 < self.elite_count < self.population_size:
            raise ValueError("need 0 < elite_count < population_size")
        for name in ("crossover_rate", "mutation_rate"):
            if not 0.0 <= getattr(self, name) <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1]")
        if self.mutation_std <= 0.0:
            raise ValueError("mutation_std must be positive")
        if self.alpha_weight < 0.0 or self.beta_weight < 0.0:
            raise ValueError("loss weights must be non-negative")
        if self.alpha_weight + self.beta_weight == 0.0:
            raise ValueError("at least one loss weight must be positive")


@dataclass
class TrainingTrace:
    """Per-generation progress of the evolutionary run."""

    best_loss: np.ndarray
    mean_loss: np.ndarray
    mse_term: np.ndarray  # labeled component of the generation's best genome
    consistency_term: np.ndarray  # unlabeled component of the same genome

    def __len__(self) -> int:
        return self.best_loss.shape[0]

    def rows(self):
        for g in range(len(self)):
            yield (
                g,
                float(self.best_loss[g]),
                float(self.mean_loss[g]),
                float(self.mse_term[g]),
                float(self.consistency_term[g]),
            )


@dataclass
class Pipeline:
    """Frozen three-stage model plus reproducibility metadata."""

    autoencoder: AutoencoderNet
    gp: GpModel
    dfn: DfnNet
    master_seed: int = 0
    config_hash: str = ""

    def __post_init__(self):
        if self.autoencoder.input_dim != self.dfn.input_dim + 1:
            raise ShapeMismatchError("autoencoder fused width must be input width + 1")
        if not (self.autoencoder.latent_dim == self.dfn.output_dim == self.gp.nz):
            raise ShapeMismatchError("latent dimensionality disagrees between stages")

    @property
    def nr(self) -> int:
        return self.dfn.input_dim

    @property
    def nz(self) -> int:
        return self.gp.nz


# -- loss terms --------------------------------------------------------------


def labeled_mse(net: DfnNet, x_t: np.ndarray, theta_t: np.ndarray) -> float:
    """Mean squared Euclidean distance between estimates and encoder latents."""
    x_t = np.asarray(x_t, dtype=float)
    theta_t = np.asarray(theta_t, dtype=float)
    if x_t.shape[0] != theta_t.shape[0]:
        raise ShapeMismatchError("input and latent row counts differ")
    est = net.forward_batch(x_t)
    if est.shape != theta_t.shape:
        raise ShapeMismatchError(f"latent shapes differ: {est.shape} vs {theta_t.shape}")
    diff = est - theta_t
    return float(np.mean(np.sum(diff * diff, axis=1)))


def consistency_loss(theta_u_i: np.ndarray, theta_u_e: np.ndarray) -> float:
    """Mean Euclidean distance (not squared) between the two latent versions."""
    theta_u_i = np.asarray(theta_u_i, dtype=float)
    theta_u_e = np.asarray(theta_u_e, dtype=float)
    if theta_u_i.shape != theta_u_e.shape:
        raise ShapeMismatchError(
            f"latent shapes differ: {theta_u_i.shape} vs {theta_u_e.shape}"
        )
    if theta_u_i.shape[0] == 0:
        return 0.0
    return float(np.mean(np.linalg.norm(theta_u_i - theta_u_e, axis=1)))


def unlabeled_roundtrip(
    ae: AutoencoderNet, gp: GpModel, net: DfnNet, x_u: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    """Estimate latents for unlabeled inputs two ways.

    Returns ``(theta_u_e, theta_u_i)``: the direct estimates, and the
    encoder latents of the inputs fused with GP-predicted responses.
    """
    x_u = np.asarray(x_u, dtype=float)
    if x_u.shape[0] == 0:
        nz = ae.latent_dim
        return np.empty((0, nz)), np.empty((0, nz))
    theta_u_e = net.forward_batch(x_u)
    y_u_e = gp.predict_mean_batch(theta_u_e)
    fused = np.hstack([x_u, y_u_e[:, None]])
    theta_u_i = ae.encode(ae.scaler.apply(fused))
    return theta_u_e, theta_u_i


def aggregated_loss(
    net: DfnNet,
    ae: AutoencoderNet,
    gp: GpModel,
    x_t: np.ndarray,
    theta_t: np.ndarray,
    x_u: np.ndarray,
    alpha_weight: float = 1.0,
    beta_weight: float = 1.0,
) -> float:
    """alpha * labeled MSE + beta * unlabeled consistency."""
    mse = labeled_mse(net, x_t, theta_t) if alpha_weight != 0.0 else 0.0
    if beta_weight != 0.0:
        theta_u_e, theta_u_i = unlabeled_roundtrip(ae, gp, net, x_u)
        cons = consistency_loss(theta_u_i, theta_u_e)
    else:
        cons = 0.0
    return alpha_weight * mse + beta_weight * cons


class _FitnessEvaluator:
    """Per-genome loss evaluation with all input scaling precomputed."""

    def __init__(
        self,
        ae: AutoencoderNet,
        gp: GpModel,
        x_t: np.ndarray,
        theta_t: np.ndarray,
        x_u: np.ndarray,
        layer_dims: list[int],
        alpha_weight: float,
        beta_weight: float,
        dfn_scaler,
    ):
        self.ae = ae
        self.gp = gp
        self.layer_dims = list(layer_dims)
        self.alpha_weight = alpha_weight
        self.beta_weight = beta_weight
        nr = layer_dims[0]
        self.scaler = dfn_scaler  # wide input window, EA-searchable weights
        self.enc_scaler = ae.scaler.head(nr)
        self.theta_t = theta_t
        self.x_t_scaled = self.scaler.apply(x_t)
        self.q = x_u.shape[0]
        if self.q:
            self.x_u_scaled = self.scaler.apply(x_u)
            self.x_u_enc_scaled = self.enc_scaler.apply(x_u)
            self.y_scaler = ae.scaler.tail(1)

    def evaluate(self, genome: np.ndarray) -> tuple[float, float, float]:
        """Returns (aggregated, labeled mse, consistency) for one genome."""
        net = genome_decode(genome, self.layer_dims, self.scaler)
        est = net.forward_scaled(self.x_t_scaled)
        diff = est - self.theta_t
        mse = float(np.mean(np.sum(diff * diff, axis=1)))
        cons = 0.0
        if self.q and self.beta_weight != 0.0:
            theta_u_e = net.forward_scaled(self.x_u_scaled)
            y_u_e = self.gp.predict_mean_batch(theta_u_e)
            y_scaled = self.y_scaler.apply(y_u_e[:, None])
            fused_scaled = np.hstack([self.x_u_enc_scaled, y_scaled])
            theta_u_i = self.ae.encode(fused_scaled)
            cons = float(np.mean(np.linalg.norm(theta_u_i - theta_u_e, axis=1)))
        return self.alpha_weight * mse + self.beta_weight * cons, mse, cons

    def _stacked_params(self, pop: np.ndarray):
        """Genome matrix -> per-layer stacked (W^T, b) ready for matmul."""
        p = pop.shape[0]
        dims = self.layer_dims
        w_t, biases = [], []
        offset = 0
        for fan_in, fan_out in zip(dims[:-1], dims[1:]):
            count = fan_out * fan_in
            block = pop[:, offset : offset + count].reshape(p, fan_out, fan_in)
            w_t.append(np.ascontiguousarray(block.transpose(0, 2, 1)))
            offset += count
        for fan_in, fan_out in zip(dims[:-1], dims[1:]):
            biases.append(pop[:, offset : offset + fan_out][:, None, :])
            offset += fan_out
        return w_t, biases

    def _stacked_forward(self, w_t, biases, a: np.ndarray) -> np.ndarray:
        for w, b in zip(w_t, biases):
            a = sigmoid(np.matmul(a, w) + b)
        return a

    def evaluate_population(self, pop: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Vectorized over genomes: one batched matmul chain per layer."""
        pop = np.asarray(pop, dtype=float)
        p = pop.shape[0]
        w_t, biases = self._stacked_params(pop)

        est = self._stacked_forward(w_t, biases, self.x_t_scaled)  # (p, n, nz)
        diff = est - self.theta_t
        mse = np.mean(np.sum(diff * diff, axis=2), axis=1)

        cons = np.zeros(p)
        if self.q and self.beta_weight != 0.0:
            theta_u_e = self._stacked_forward(w_t, biases, self.x_u_scaled)  # (p, q, nz)
            nz = theta_u_e.shape[2]
            y_u_e = self.gp.predict_mean_batch(theta_u_e.reshape(p * self.q, nz))
            y_scaled = self.y_scaler.apply(y_u_e[:, None]).reshape(p, self.q, 1)
            fused = np.concatenate(
                [
                    np.broadcast_to(
                        self.x_u_enc_scaled, (p, self.q, self.x_u_enc_scaled.shape[1])
                    ),
                    y_scaled,
                ],
                axis=2,
            )
            theta_u_i = fused
            for w, b in zip(self.ae.weights[: self.ae.latent_index],
                            self.ae.biases[: self.ae.latent_index]):
                theta_u_i = sigmoid(np.matmul(theta_u_i, w.T) + b)
            cons = np.mean(np.linalg.norm(theta_u_i - theta_u_e, axis=2), axis=1)

        return self.alpha_weight * mse + self.beta_weight * cons, mse, cons


# -- evolutionary operators ---------------------------------------------------


def _tournament(fitnesses: np.ndarray, contestants: np.ndarray) -> np.ndarray:
    # ties resolve to the earliest contestant listed, keeping runs reproducible
    vals = fitnesses[contestants]
    winners = np.argmin(vals, axis=1)
    return contestants[np.arange(contestants.shape[0]), winners]


def evolve_generation(
    pop: np.ndarray, fitnesses: np.ndarray, cfg: EaConfig, rng: RandomSource
) -> np.ndarray:
    """One generation: elitism, tournament selection, uniform crossover,
    per-gene Gaussian mutation."""
    pop = np.asarray(pop, dtype=float)
    fitnesses = np.asarray(fitnesses, dtype=float)
    n, length = pop.shape
    order = np.argsort(fitnesses, kind="stable")
    elites = pop[order[: cfg.elite_count]].copy()
    n_children = n - cfg.elite_count

    c1 = rng.integers(n, size=(n_children, cfg.tournament_size))
    c2 = rng.integers(n, size=(n_children, cfg.tournament_size))
    parents1 = pop[_tournament(fitnesses, c1)]
    parents2 = pop[_tournament(fitnesses, c2)]

    cross_mask = rng.random((n_children, length)) < cfg.crossover_rate
    children = np.where(cross_mask, parents2, parents1)

    mut_mask = rng.random((n_children, length)) < cfg.mutation_rate
    noise = rng.normal(0.0, cfg.mutation_std, n_children * length).reshape(n_children, length)
    children = children + mut_mask * noise
    return np.vstack([elites, children])


def train_dfn_ea(
    ae: AutoencoderNet,
    gp: GpModel,
    x_t: np.ndarray,
    theta_t: np.ndarray,
    x_u: np.ndarray,
    layer_dims: list[int],
    cfg: EaConfig,
    rng: RandomSource,
    input_range: tuple[float, float] = (-2.0, 2.0),
) -> tuple[DfnNet, TrainingTrace]:
    """Evolve the latent estimator against the aggregated loss.

    The estimator sees inputs through the autoencoder's fitted column
    bounds but mapped onto the wide symmetric ``input_range``; compressed
    inputs would demand first-layer weights far outside the genome
    initialization and mutation scales. The autoencoder and GP are
    read-only throughout. Stops when the best loss has improved by less
    than ``stall_tolerance`` (relative) across ``stall_window``
    generations, or at ``max_generations``.
    """
    dfn_scaler = ae.scaler.head(layer_dims[0]).retarget(*input_range)
    evaluator = _FitnessEvaluator(
        ae, gp, x_t, theta_t, x_u, layer_dims, cfg.alpha_weight, cfg.beta_weight, dfn_scaler
    )
    length = genome_length(layer_dims)
    pop = rng.uniform(-1.0, 1.0, size=(cfg.population_size, length))

    best_hist: list[float] = []
    mean_hist: list[float] = []
    mse_hist: list[float] = []
    cons_hist: list[float] = []
    best_loss = np.inf
    best_genome = None

    for gen in range(cfg.max_generations):
        agg, mse, cons = evaluator.evaluate_population(pop)
        finite = np.isfinite(agg)
        if not finite.any():
            raise DivergenceDetectedError(f"entire population non-finite at generation {gen}")
        fitness = np.where(finite, agg, np.inf)
        b = int(np.argmin(fitness))
        best_hist.append(float(fitness[b]))
        mean_hist.append(float(np.mean(agg[finite])))
        mse_hist.append(float(mse[b]))
        cons_hist.append(float(cons[b]))
        if fitness[b] < best_loss:
            best_loss = float(fitness[b])
            best_genome = pop[b].copy()

        w = cfg.stall_window
        if gen >= w:
            drop = best_hist[gen - w] - best_hist[gen]
            if drop < cfg.stall_tolerance * max(abs(best_hist[gen - w]), 1e-12):
                break
        if gen == cfg.max_generations - 1:
            break
        pop = evolve_generation(pop, fitness, cfg, rng)

    trace = TrainingTrace(
        best_loss=np.asarray(best_hist),
        mean_loss=np.asarray(mean_hist),
        mse_term=np.asarray(mse_hist),
        consistency_term=np.asarray(cons_hist),
    )
    net = genome_decode(best_genome.copy(), layer_dims, evaluator.scaler)
    return net, trace


# -- full pipeline -------------------------------------------------------------


@dataclass
class PipelineConfig:
    """Stage settings for a full training run (defaults sized for ~20-D
    problems with 150 labeled samples)."""

    ae_hidden: tuple[int, ...] = (12,)
    latent_dim: int = 2
    adam_step: float = 1e-3
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_eps: float = 1e-8
    ae_max_epochs: int = 5000
    ae_stall_window: int = 200
    ae_stall_tolerance: float = 1e-7
    input_range: tuple[float, float] = (0.35, 0.65)
    response_range: tuple[float, float] = (0.05, 0.95)
    dfn_hidden: tuple[int, ...] = (16, 8)
    dfn_input_range: tuple[float, float] = (-2.0, 2.0)
    gp_restarts: int = 8
    gp_max_iterations: int = 500
    gp_tolerance: float = 1e-8
    ea: EaConfig = field(default_factory=EaConfig)

    def ae_layer_dims(self, fused_width: int) -> tuple[list[int], int]:
        dims = (
            [fused_width]
            + list(self.ae_hidden)
            + [self.latent_dim]
            + list(reversed(self.ae_hidden))
            + [fused_width]
        )
        return dims, 1 + len(self.ae_hidden)

    def dfn_layer_dims(self, nr: int) -> list[int]:
        return [nr] + list(self.dfn_hidden) + [self.latent_dim]


def train_pipeline_from_data(
    labeled: LabeledDataset,
    x_unlabeled: np.ndarray,
    cfg: PipelineConfig,
    master_seed: int,
    config_hash: str = "",
) -> tuple[Pipeline, TrainingTrace]:
    """Train the three stages in order on explicit datasets."""
    master = RandomSource(master_seed)
    fused = fuse_dataset(labeled, cfg.input_range, cfg.response_range)
    dims, latent_index = cfg.ae_layer_dims(fused.width)
    adam = AdamState(
        step_size=cfg.adam_step, beta1=cfg.adam_beta1, beta2=cfg.adam_beta2, eps=cfg.adam_eps
    )
    ae, _ = train_autoencoder(
        fused,
        dims,
        latent_index,
        rng=master.derive("autoencoder-init"),
        adam=adam,
        max_epochs=cfg.ae_max_epochs,
        stall_window=cfg.ae_stall_window,
        stall_tolerance=cfg.ae_stall_tolerance,
    )
    theta_t = ae.encode(fused.data)
    gp = fit_gp(
        theta_t,
        labeled.y,
        restarts=cfg.gp_restarts,
        max_iterations=cfg.gp_max_iterations,
        tolerance=cfg.gp_tolerance,
    )
    x_u = np.asarray(x_unlabeled, dtype=float)
    if x_u.size == 0:
        x_u = np.empty((0, labeled.nr))
    dfn_net, trace = train_dfn_ea(
        ae,
        gp,
        labeled.x,
        theta_t,
        x_u,
        cfg.dfn_layer_dims(labeled.nr),
        cfg.ea,
        master.derive("ea"),
        input_range=cfg.dfn_input_range,
    )
    pipeline = Pipeline(
        autoencoder=ae,
        gp=gp,
        dfn=dfn_net,
        master_seed=int(master_seed),
        config_hash=config_hash,
    )
    return pipeline, trace


def run_pipeline(
    expr: LimitStateExpr,
    spec: InputSpec,
    n_labeled: int,
    q_unlabeled: int,
    cfg: PipelineConfig,
    master_seed: int,
    config_hash: str = "",
) -> tuple[Pipeline, TrainingTrace]:
    """Sample datasets from the problem and train the full pipeline."""
    master = RandomSource(master_seed)
    labeled = build_labeled_dataset(expr, spec, n_labeled, master.derive("labeled-data"))
    if q_unlabeled > 0:
        x_u = sample_inputs(spec, q_unlabeled, master.derive("unlabeled-data"))
    else:
        x_u = np.empty((0, spec.nr))
    return train_pipeline_from_data(labeled, x_u, cfg, master_seed, config_hash)
