"""Run configuration: TOML loading, validation, and hashing.

A run is fully determined by one file plus the master seed; stage seeds
are derived from the master via labeled splits (see
:func:`latentrel.mathcore.derive_seed`), so no stage ever touches the
wall clock.
"""

from __future__ import annotations

import hashlib
import json
import sys
from dataclasses import asdict, dataclass, field

import numpy as np

from .errors import ConfigError
from .problem import InputSpec, LimitStateExpr, parse_limit_state
from .semisup import EaConfig, PipelineConfig

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib


@dataclass
class ProblemConfig:
    expression: str
    nr: int
    means: list[float]
    stds: list[float]

    def parsed(self) -> LimitStateExpr:
        return parse_limit_state(self.expression, self.nr)

    def input_spec(self) -> InputSpec:
        return InputSpec(means=np.asarray(self.means), stds=np.asarray(self.stds))


@dataclass
class DataConfig:
    n_labeled: int = 150
    q_unlabeled: int = 1000
    labeled_csv: str = "labeled.csv"
    unlabeled_csv: str = "unlabeled.csv"


@dataclass
class McsSection:
    samples: int = 100_000
    batch_size: int = 4096
    oracle_samples: int = 1_000_000


@dataclass
class RunConfig:
    problem: ProblemConfig
    seed: int
    out_dir: str = "out"
    data: DataConfig = field(default_factory=DataConfig)
    pipeline: PipelineConfig = field(default_factory=PipelineConfig)
    mcs: McsSection = field(default_factory=McsSection)

    def to_dict(self) -> dict:
        return asdict(self)

    def hash(self) -> str:
        canonical = json.dumps(self.to_dict(), sort_keys=True)
        return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


def _take(table: dict, section: str, key: str, kind, default):
    """Pop a typed value out of a config table; ConfigError on bad types."""
    if key not in table:
        if default is _REQUIRED:
            raise ConfigError(f"{section}.{key}", "missing required value")
        return default
    value = table.pop(key)
    if kind is float and isinstance(value, int) and not isinstance(value, bool):
        value = float(value)
    if kind is int and isinstance(value, bool):
        raise ConfigError(f"{section}.{key}", "expected an integer")
    if not isinstance(value, kind):
        raise ConfigError(
            f"{section}.{key}", f"expected {kind.__name__}, got {type(value).__name__}"
        )
    return value


_REQUIRED = object()


def _reject_unknown(table: dict, section: str) -> None:
    if table:
        raise ConfigError(f"{section}.{sorted(table)[0]}", "unknown key")


def _int_list(table: dict, section: str, key: str, default: list[int]) -> list[int]:
    value = table.pop(key, None)
    if value is None:
        return list(default)
    if not isinstance(value, list) or not all(
        isinstance(v, int) and not isinstance(v, bool) for v in value
    ):
        raise ConfigError(f"{section}.{key}", "expected a list of integers")
    return list(value)


def _range_pair(table: dict, section: str, key: str, default: tuple[float, float]) -> tuple[float, float]:
    value = table.pop(key, None)
    if value is None:
        return default
    pair = _float_list(value, section, key)
    if len(pair) != 2 or not pair[0] < pair[1]:
        raise ConfigError(f"{section}.{key}", "expected [lo, hi] with lo < hi")
    return (pair[0], pair[1])


def _float_list(value, section: str, key: str) -> list[float]:
    if not isinstance(value, list) or not all(
        isinstance(v, (int, float)) and not isinstance(v, bool) for v in value
    ):
        raise ConfigError(f"{section}.{key}", "expected a list of numbers")
    return [float(v) for v in value]


def _problem_from_table(table: dict) -> ProblemConfig:
    expression = _take(table, "problem", "expression", str, _REQUIRED)
    nr = _take(table, "problem", "nr", int, _REQUIRED)
    if nr < 1:
        raise ConfigError("problem.nr", "must be at least 1")

    if "means" in table:
        means = _float_list(table.pop("means"), "problem", "means")
    elif "mean" in table:
        means = [float(_take(table, "problem", "mean", float, _REQUIRED))] * nr
    else:
        raise ConfigError("problem.mean", "missing distribution entry (mean or means)")
    if "stds" in table:
        stds = _float_list(table.pop("stds"), "problem", "stds")
    elif "std" in table:
        stds = [float(_take(table, "problem", "std", float, _REQUIRED))] * nr
    else:
        raise ConfigError("problem.std", "missing distribution entry (std or stds)")
    if len(means) != nr or len(stds) != nr:
        raise ConfigError("problem.means", f"need exactly nr={nr} entries")
    if any(s <= 0.0 for s in stds):
        raise ConfigError("problem.std", "standard deviations must be positive")
    _reject_unknown(table, "problem")
    return ProblemConfig(expression=expression, nr=nr, means=means, stds=stds)


def load_config(path, seed_override: int | None = None, out_override: str | None = None) -> RunConfig:
    """Parse and validate a TOML run configuration."""
    try:
        with open(path, "rb") as fh:
            doc = tomllib.load(fh)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError("<file>", f"invalid TOML: {exc}") from None

    run = dict(doc.pop("run", {}))
    seed = _take(run, "run", "seed", int, _REQUIRED if seed_override is None else 0)
    out_dir = _take(run, "run", "out_dir", str, "out")
    _reject_unknown(run, "run")
    if seed_override is not None:
        seed = int(seed_override)
    if out_override is not None:
        out_dir = out_override

    if "problem" not in doc:
        raise ConfigError("problem", "missing [problem] section")
    problem = _problem_from_table(dict(doc.pop("problem")))

    data_t = dict(doc.pop("data", {}))
    data = DataConfig(
        n_labeled=_take(data_t, "data", "n_labeled", int, 150),
        q_unlabeled=_take(data_t, "data", "q_unlabeled", int, 1000),
        labeled_csv=_take(data_t, "data", "labeled_csv", str, "labeled.csv"),
        unlabeled_csv=_take(data_t, "data", "unlabeled_csv", str, "unlabeled.csv"),
    )
    _reject_unknown(data_t, "data")
    if data.n_labeled < 2:
        raise ConfigError("data.n_labeled", "need at least 2 labeled samples")
    if data.q_unlabeled < 0:
        raise ConfigError("data.q_unlabeled", "must be non-negative")

    ae_t = dict(doc.pop("autoencoder", {}))
    dfn_t = dict(doc.pop("dfn", {}))
    gp_t = dict(doc.pop("gp", {}))
    ea_t = dict(doc.pop("ea", {}))
    try:
        ea = EaConfig(
            population_size=_take(ea_t, "ea", "population_size", int, 60),
            elite_count=_take(ea_t, "ea", "elite_count", int, 2),
            tournament_size=_take(ea_t, "ea", "tournament_size", int, 3),
            crossover_rate=_take(ea_t, "ea", "crossover_rate", float, 0.5),
            mutation_rate=_take(ea_t, "ea", "mutation_rate", float, 0.1),
            mutation_std=_take(ea_t, "ea", "mutation_std", float, 0.1),
            max_generations=_take(ea_t, "ea", "max_generations", int, 500),
            stall_window=_take(ea_t, "ea", "stall_window", int, 50),
            stall_tolerance=_take(ea_t, "ea", "stall_tolerance", float, 1e-5),
            alpha_weight=_take(ea_t, "ea", "alpha_weight", float, 1.0),
            beta_weight=_take(ea_t, "ea", "beta_weight", float, 1.0),
        )
    except ValueError as exc:
        raise ConfigError("ea", str(exc)) from None
    _reject_unknown(ea_t, "ea")

    pipeline = PipelineConfig(
        ae_hidden=tuple(_int_list(ae_t, "autoencoder", "hidden", [12])),
        latent_dim=_take(ae_t, "autoencoder", "latent_dim", int, 2),
        adam_step=_take(ae_t, "autoencoder", "step_size", float, 1e-3),
        adam_beta1=_take(ae_t, "autoencoder", "beta1", float, 0.9),
        adam_beta2=_take(ae_t, "autoencoder", "beta2", float, 0.999),
        adam_eps=_take(ae_t, "autoencoder", "eps", float, 1e-8),
        ae_max_epochs=_take(ae_t, "autoencoder", "max_epochs", int, 5000),
        ae_stall_window=_take(ae_t, "autoencoder", "stall_window", int, 200),
        ae_stall_tolerance=_take(ae_t, "autoencoder", "stall_tolerance", float, 1e-7),
        input_range=_range_pair(ae_t, "autoencoder", "input_range", (0.35, 0.65)),
        response_range=_range_pair(ae_t, "autoencoder", "response_range", (0.05, 0.95)),
        dfn_hidden=tuple(_int_list(dfn_t, "dfn", "hidden", [16, 8])),
        dfn_input_range=_range_pair(dfn_t, "dfn", "input_range", (-2.0, 2.0)),
        gp_restarts=_take(gp_t, "gp", "restarts", int, 8),
        gp_max_iterations=_take(gp_t, "gp", "max_iterations", int, 500),
        gp_tolerance=_take(gp_t, "gp", "tolerance", float, 1e-8),
        ea=ea,
    )
    _reject_unknown(ae_t, "autoencoder")
    _reject_unknown(dfn_t, "dfn")
    _reject_unknown(gp_t, "gp")
    if pipeline.latent_dim < 1 or pipeline.latent_dim > problem.nr:
        raise ConfigError("autoencoder.latent_dim", "must lie in 1..nr")

    mcs_t = dict(doc.pop("mcs", {}))
    mcs = McsSection(
        samples=_take(mcs_t, "mcs", "samples", int, 100_000),
        batch_size=_take(mcs_t, "mcs", "batch_size", int, 4096),
        oracle_samples=_take(mcs_t, "mcs", "oracle_samples", int, 1_000_000),
    )
    _reject_unknown(mcs_t, "mcs")
    if mcs.samples < 1:
        raise ConfigError("mcs.samples", "must be at least 1")
    if mcs.batch_size < 1:
        raise ConfigError("mcs.batch_size", "must be at least 1")
    if mcs.oracle_samples < 1:
        raise ConfigError("mcs.oracle_samples", "must be at least 1")

    _reject_unknown(doc, "<root>")
    return RunConfig(
        problem=problem, seed=seed, out_dir=out_dir, data=data, pipeline=pipeline, mcs=mcs
    )
