"""Command-line surface: generate, train, analyze, oracle.

Exit codes: 0 success, 1 user/config error, 2 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import artifact, errors
from .config import RunConfig, load_config
from .mathcore import RandomSource, derive_seed
from .problem import (
    LabeledDataset,
    UnlabeledDataset,
    build_labeled_dataset,
    load_csv_dataset,
    sample_inputs,
    write_dataset_csv,
)
from .reliability import (
    McsConfig,
    estimate_reliability_detailed,
    export_latent_scatter,
    oracle_reliability,
)
from .semisup import train_pipeline_from_data

_USER_ERRORS = (
    errors.ConfigError,
    errors.ArtifactVersionMismatchError,
    errors.ExprSyntaxError,
    errors.UnknownFunctionError,
    errors.IndexOutOfRangeError,
    errors.MalformedRowError,
    errors.NonNumericCellError,
    errors.EmptyInputError,
    errors.NonPositiveStdError,
    errors.ShapeMismatchError,
    errors.LengthMismatchError,
    errors.DimensionMismatchError,
    OSError,
)

_NUMERICAL_ERRORS = (
    errors.NotPositiveDefiniteError,
    errors.DivergenceDetectedError,
    errors.OptimizerFailedError,
    errors.DivisionByZeroError,
    errors.NonFiniteResultError,
    errors.NonFinitePredictionError,
)


def _write_json(path: Path, payload: dict) -> None:
    with open(path, "w") as fh:
        json.dump(payload, fh, sort_keys=True, indent=1)
        fh.write("\n")


def cmd_generate(cfg: RunConfig) -> None:
    expr = cfg.problem.parsed()
    spec = cfg.problem.input_spec()
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    master = RandomSource(cfg.seed)

    labeled = build_labeled_dataset(expr, spec, cfg.data.n_labeled, master.derive("labeled-data"))
    write_dataset_csv(out / cfg.data.labeled_csv, labeled.x, labeled.y)
    if cfg.data.q_unlabeled > 0:
        x_u = sample_inputs(spec, cfg.data.q_unlabeled, master.derive("unlabeled-data"))
    else:
        x_u = np.empty((0, spec.nr))
    write_dataset_csv(out / cfg.data.unlabeled_csv, x_u)
    print(
        f"wrote {cfg.data.labeled_csv} ({labeled.n}x{labeled.nr}+y) and "
        f"{cfg.data.unlabeled_csv} ({x_u.shape[0]}x{spec.nr}) to {out}"
    )


def cmd_train(cfg: RunConfig) -> None:
    out = Path(cfg.out_dir)
    labeled = load_csv_dataset(out / cfg.data.labeled_csv, has_response=True)
    if not isinstance(labeled, LabeledDataset):
        raise errors.ConfigError("data.labeled_csv", "expected a response column")
    unlabeled_path = out / cfg.data.unlabeled_csv
    if unlabeled_path.exists():
        ds = load_csv_dataset(unlabeled_path, has_response=False)
        x_u = ds.x if isinstance(ds, UnlabeledDataset) else ds.x
    else:
        x_u = np.empty((0, labeled.nr))
    if labeled.nr != cfg.problem.nr:
        raise errors.ConfigError(
            "problem.nr", f"config says {cfg.problem.nr} inputs, {cfg.data.labeled_csv} has {labeled.nr}"
        )

    pipeline, trace = train_pipeline_from_data(
        labeled, x_u, cfg.pipeline, cfg.seed, config_hash=cfg.hash()
    )
    artifact.save_pipeline(out / "artifact.json", pipeline)
    with open(out / "trace.csv", "w", newline="") as fh:
        fh.write("generation,best_loss,mean_loss,mse_term,consistency_term\n")
        for gen, best, mean, mse, cons in trace.rows():
            fh.write(f"{gen},{best!r},{mean!r},{mse!r},{cons!r}\n")
    print(
        f"trained pipeline in {len(trace)} generations: "
        f"best_loss={trace.best_loss[-1]:.6g} "
        f"(mse={trace.mse_term[-1]:.6g}, consistency={trace.consistency_term[-1]:.6g}); "
        f"artifact.json and trace.csv written to {out}"
    )


def cmd_analyze(cfg: RunConfig, artifact_path: str | None) -> None:
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    path = Path(artifact_path) if artifact_path else out / "artifact.json"
    pipeline = artifact.load_pipeline(path)
    if pipeline.nr != cfg.problem.nr:
        raise errors.ArtifactVersionMismatchError(
            f"artifact expects {pipeline.nr} inputs, config problem has {cfg.problem.nr}"
        )
    spec = cfg.problem.input_spec()
    mcs = McsConfig(
        sample_count=cfg.mcs.samples,
        batch_size=cfg.mcs.batch_size,
        seed=derive_seed(cfg.seed, "mcs"),
    )
    report, x, _, _ = estimate_reliability_detailed(pipeline, spec, mcs, config_hash=cfg.hash())
    _write_json(out / "report.json", report.to_dict())
    export_latent_scatter(
        pipeline, x, out / "latent_scatter.csv", true_expr=cfg.problem.parsed(),
        batch_size=cfg.mcs.batch_size,
    )
    print(
        f"reliability={report.reliability:.6f} failure_probability={report.failure_probability:.6f} "
        f"(N={report.n_samples}, mc_se={report.mc_standard_error:.2e}); "
        f"report.json and latent_scatter.csv written to {out}"
    )


def cmd_oracle(cfg: RunConfig) -> None:
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    expr = cfg.problem.parsed()
    spec = cfg.problem.input_spec()
    rng = RandomSource(derive_seed(cfg.seed, "oracle"))
    report = oracle_reliability(expr, spec, cfg.mcs.oracle_samples, rng, config_hash=cfg.hash())
    _write_json(out / "oracle_report.json", report.to_dict())
    print(
        f"oracle reliability={report.reliability:.6f} "
        f"failure_probability={report.failure_probability:.6f} "
        f"(N={report.n_samples}, mc_se={report.mc_standard_error:.2e}); "
        f"oracle_report.json written to {out}"
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="latentrel",
        description="Latent-space reliability analysis pipeline",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_text in [
        ("generate", "sample labeled/unlabeled datasets to CSV"),
        ("train", "train the pipeline from generated datasets"),
        ("analyze", "Monte Carlo reliability through a trained artifact"),
        ("oracle", "direct Monte Carlo on the true limit state"),
    ]:
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", required=True, help="TOML run configuration")
        p.add_argument("--out", default=None, help="override the output directory")
        p.add_argument("--seed", type=int, default=None, help="override the master seed")
        if name == "analyze":
            p.add_argument("--artifact", default=None, help="path to a trained artifact")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config, seed_override=args.seed, out_override=args.out)
        if args.command == "generate":
            cmd_generate(cfg)
        elif args.command == "train":
            cmd_train(cfg)
        elif args.command == "analyze":
            cmd_analyze(cfg, args.artifact)
        else:
            cmd_oracle(cfg)
    except _NUMERICAL_ERRORS as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 2
    except _USER_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
