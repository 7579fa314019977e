"""Versioned JSON persistence for trained pipelines.

Floats are serialized with shortest round-trip repr, so a save/load cycle
reproduces every parameter bit-for-bit. The GP's Cholesky factor and
weight vector are rebuilt from the stored pieces on load.
"""

from __future__ import annotations

import json

import numpy as np

from .autoencoder import AutoencoderNet
from .dfn import DfnNet
from .errors import ArtifactVersionMismatchError
from .gpmodel import GpHyperparams, GpModel, kernel_matrix
from .mathcore import ColumnScaler, cholesky_decompose, solve_spd
from .semisup import Pipeline

FORMAT_VERSION = 1
_KIND = "latentrel-pipeline"


def _net_to_doc(weights, biases) -> dict:
    return {
        "weights": [w.tolist() for w in weights],
        "biases": [b.tolist() for b in biases],
    }


def save_pipeline(path, pipeline: Pipeline) -> None:
    ae = pipeline.autoencoder
    gp = pipeline.gp
    doc = {
        "kind": _KIND,
        "format_version": FORMAT_VERSION,
        "master_seed": pipeline.master_seed,
        "config_hash": pipeline.config_hash,
        "scaler": {
            "lo": ae.scaler.lo.tolist(),
            "hi": ae.scaler.hi.tolist(),
            "a": np.broadcast_to(np.asarray(ae.scaler.a, dtype=float), ae.scaler.lo.shape).tolist(),
            "b": np.broadcast_to(np.asarray(ae.scaler.b, dtype=float), ae.scaler.lo.shape).tolist(),
        },
        "autoencoder": {
            "layer_dims": list(ae.layer_dims),
            "latent_index": ae.latent_index,
            "encoder_activation": ae.encoder_activation,
            "decoder_activation": ae.decoder_activation,
            **_net_to_doc(ae.weights, ae.biases),
        },
        "gp": {
            "latents": gp.latents.tolist(),
            "y_mean": gp.y_mean,
            "y_std": gp.y_std,
            "y_standardized": gp.y_standardized.tolist(),
            "signal_std": gp.hyper.signal_std,
            "length_scale": gp.hyper.length_scale,
            "noise_std": gp.hyper.noise_std,
        },
        "dfn": {
            "layer_dims": list(pipeline.dfn.layer_dims),
            "input_range": [float(np.asarray(pipeline.dfn.scaler.a).ravel()[0]),
                            float(np.asarray(pipeline.dfn.scaler.b).ravel()[0])],
            **_net_to_doc(pipeline.dfn.weights, pipeline.dfn.biases),
        },
    }
    with open(path, "w") as fh:
        json.dump(doc, fh, sort_keys=True, indent=1)
        fh.write("\n")


def load_pipeline(path) -> Pipeline:
    with open(path) as fh:
        doc = json.load(fh)
    if doc.get("kind") != _KIND or doc.get("format_version") != FORMAT_VERSION:
        raise ArtifactVersionMismatchError(
            f"{path}: expected {_KIND} format {FORMAT_VERSION}, "
            f"found kind={doc.get('kind')!r} version={doc.get('format_version')!r}"
        )

    s = doc["scaler"]
    scaler = ColumnScaler(
        lo=np.asarray(s["lo"], dtype=float),
        hi=np.asarray(s["hi"], dtype=float),
        a=np.asarray(s["a"], dtype=float),
        b=np.asarray(s["b"], dtype=float),
    )

    a = doc["autoencoder"]
    ae = AutoencoderNet(
        layer_dims=[int(d) for d in a["layer_dims"]],
        latent_index=int(a["latent_index"]),
        weights=[np.asarray(w, dtype=float) for w in a["weights"]],
        biases=[np.asarray(b, dtype=float) for b in a["biases"]],
        scaler=scaler,
        encoder_activation=a["encoder_activation"],
        decoder_activation=a["decoder_activation"],
    )

    g = doc["gp"]
    hyper = GpHyperparams(
        signal_std=float(g["signal_std"]),
        length_scale=float(g["length_scale"]),
        noise_std=float(g["noise_std"]),
    )
    latents = np.asarray(g["latents"], dtype=float)
    y_standardized = np.asarray(g["y_standardized"], dtype=float)
    k = kernel_matrix(latents, latents, hyper)
    k[np.diag_indices_from(k)] += hyper.noise_std**2
    chol = cholesky_decompose(k, 0.0)
    gp = GpModel(
        latents=latents,
        y_mean=float(g["y_mean"]),
        y_std=float(g["y_std"]),
        y_standardized=y_standardized,
        hyper=hyper,
        chol=chol,
        alpha=solve_spd(chol, y_standardized),
    )

    d = doc["dfn"]
    dfn_dims = [int(v) for v in d["layer_dims"]]
    dfn = DfnNet(
        layer_dims=dfn_dims,
        weights=[np.asarray(w, dtype=float) for w in d["weights"]],
        biases=[np.asarray(b, dtype=float) for b in d["biases"]],
        scaler=scaler.head(dfn_dims[0]).retarget(*d["input_range"]),
    )

    return Pipeline(
        autoencoder=ae,
        gp=gp,
        dfn=dfn,
        master_seed=int(doc["master_seed"]),
        config_hash=str(doc["config_hash"]),
    )
