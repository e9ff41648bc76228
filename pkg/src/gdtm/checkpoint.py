"""JSON checkpoints for trained surrogates.

Arrays are stored flattened in row-major order, layer by layer. Floats are
written with ``repr`` precision, so write -> read -> write is byte-identical.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .nn import GatLayer, MlpModel
from .surrogate import NormalizationScalers, SurrogateModel

SCHEMA_VERSION = 1


class CheckpointError(ValueError):
    pass


def to_dict(model: SurrogateModel, training_seed: int = 0) -> dict:
    gat = None
    if model.gat is not None:
        gat = {
            "in_features": int(model.gat.transform.shape[0]),
            "hidden": int(model.gat.hidden_dim),
            "transform": model.gat.transform.ravel().tolist(),
            "attention_vector": model.gat.attention_vector.tolist(),
            "leaky_slope": float(model.gat.leaky_slope),
        }
    sc = model.scalers
    return {
        "schema_version": SCHEMA_VERSION,
        "kind": model.kind,
        "layer_dims": model.mlp.layer_dims,
        "hidden_activation": "relu",
        "weights": [w.ravel().tolist() for w in model.mlp.weights],
        "biases": [b.tolist() for b in model.mlp.biases],
        "attention": gat,
        "scalers": {
            "acceleration": sc.acceleration,
            "velocity": sc.velocity,
            "displacement": sc.displacement,
            "excitation": sc.excitation,
        },
        "dt": model.dt,
        "beta": model.beta,
        "gamma": model.gamma,
        "training_seed": int(training_seed),
        "adjacency": {"kind": model.layout_kind, "N": model.layout_n},
        "parameter_count": model.parameter_count,
    }


def from_dict(data: dict) -> SurrogateModel:
    if data.get("schema_version") != SCHEMA_VERSION:
        raise CheckpointError(f"unsupported checkpoint schema {data.get('schema_version')!r}")
    try:
        dims = [int(d) for d in data["layer_dims"]]
        weights, biases = [], []
        for i, (a, b) in enumerate(zip(dims[:-1], dims[1:])):
            w = np.array(data["weights"][i], dtype=float)
            bias = np.array(data["biases"][i], dtype=float)
            if w.size != a * b or bias.size != b:
                raise CheckpointError(f"layer {i} arrays do not match dims {a}x{b}")
            weights.append(w.reshape(a, b))
            biases.append(bias)
        if len(data["weights"]) != len(dims) - 1:
            raise CheckpointError("layer count does not match layer_dims")
        gat = None
        if data["attention"] is not None:
            g = data["attention"]
            t = np.array(g["transform"], dtype=float)
            if t.size != g["in_features"] * g["hidden"]:
                raise CheckpointError("attention transform size mismatch")
            gat = GatLayer(t.reshape(g["in_features"], g["hidden"]),
                           np.array(g["attention_vector"], dtype=float), float(g["leaky_slope"]))
        return SurrogateModel(
            data["kind"], MlpModel(weights, biases), NormalizationScalers(**data["scalers"]),
            float(data["dt"]), float(data["beta"]), float(data["gamma"]),
            data["adjacency"]["kind"], int(data["adjacency"]["N"]), gat)
    except (KeyError, TypeError) as exc:
        raise CheckpointError(f"malformed checkpoint: {exc}") from exc


def dumps(model: SurrogateModel, training_seed: int = 0) -> str:
    return json.dumps(to_dict(model, training_seed), indent=1, sort_keys=True) + "\n"


def save(model: SurrogateModel, path, training_seed: int = 0) -> None:
    Path(path).write_text(dumps(model, training_seed))


def load(path):
    """Return ``(model, training_seed)``."""
    data = json.loads(Path(path).read_text())
    return from_dict(data), int(data.get("training_seed", 0))
