"""Versioned JSON for datasets and trained parameters.

Matrices are stored as ``{"shape": [...], "data": nested row-major lists}``.
"""
from __future__ import annotations

import json

import numpy as np

from ..errors import ConfigError
from .graph import GraphSample
from .mlp import MlpParams
from .model import GnnParams

FORMAT_VERSION = 1


def _enc(a) -> dict:
    a = np.asarray(a)
    return {"shape": list(a.shape), "data": a.tolist()}


def _dec(obj, dtype=np.float64) -> np.ndarray:
    a = np.array(obj["data"], dtype=dtype)
    shape = tuple(obj["shape"])
    if a.size == 0:
        return a.reshape(shape)
    if a.shape != shape:
        raise ConfigError(f"matrix data has shape {a.shape}, header says {shape}")
    return a


def _check_version(doc, kind):
    if doc.get("version") != FORMAT_VERSION:
        raise ConfigError(f"unsupported {kind} version {doc.get('version')!r}")
    if doc.get("kind") != kind:
        raise ConfigError(f"expected kind {kind!r}, got {doc.get('kind')!r}")


def mlp_to_dict(p: MlpParams) -> dict:
    out = {
        "name": p.name,
        "activation": p.activation,
        "activate_final": p.activate_final,
        "use_layer_norm": p.use_layer_norm,
        "weights": [_enc(w) for w in p.weights],
        "biases": [_enc(b) for b in p.biases],
    }
    if p.use_layer_norm:
        out["ln_gain"] = _enc(p.ln_gain)
        out["ln_bias"] = _enc(p.ln_bias)
    return out


def mlp_from_dict(d: dict) -> MlpParams:
    ln = d["use_layer_norm"]
    return MlpParams([_dec(w) for w in d["weights"]], [_dec(b) for b in d["biases"]],
                     d["activation"], d["activate_final"], ln,
                     _dec(d["ln_gain"]) if ln else None, _dec(d["ln_bias"]) if ln else None,
                     d.get("name", "mlp"))


def params_to_dict(p: GnnParams) -> dict:
    return {
        "version": FORMAT_VERSION,
        "kind": "gnn_params",
        "d": p.d,
        "rounds": p.rounds,
        "W1": _enc(p.W1), "W2": _enc(p.W2), "W3": _enc(p.W3), "W4": _enc(p.W4),
        "encoder": mlp_to_dict(p.encoder),
        "edge_mlp": mlp_to_dict(p.edge_mlp),
        "node_mlp": mlp_to_dict(p.node_mlp),
    }


def params_from_dict(doc: dict) -> GnnParams:
    _check_version(doc, "gnn_params")
    return GnnParams(_dec(doc["W1"]), _dec(doc["W2"]), _dec(doc["W3"]), _dec(doc["W4"]),
                     mlp_from_dict(doc["encoder"]), mlp_from_dict(doc["edge_mlp"]),
                     mlp_from_dict(doc["node_mlp"]), int(doc["rounds"]))


def sample_to_dict(s: GraphSample) -> dict:
    return {
        "task": s.task,
        "n": s.n,
        "edges": _enc(s.edges),
        "node_features": _enc(s.node_features),
        "edge_features": _enc(s.edge_features),
        "node_labels": _enc(s.node_labels),
        "edge_labels": _enc(s.edge_labels),
    }


def sample_from_dict(d: dict) -> GraphSample:
    return GraphSample(int(d["n"]), _dec(d["edges"], np.int64).reshape(-1, 2),
                       _dec(d["node_features"]), _dec(d["edge_features"]),
                       _dec(d["node_labels"]), _dec(d["edge_labels"]), d["task"])


def dataset_to_dict(samples) -> dict:
    return {"version": FORMAT_VERSION, "kind": "gnn_dataset",
            "samples": [sample_to_dict(s) for s in samples]}


def dataset_from_dict(doc: dict) -> list:
    _check_version(doc, "gnn_dataset")
    return [sample_from_dict(s) for s in doc["samples"]]


def save_json(doc: dict, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh)
        fh.write("\n")


def load_json(path) -> dict:
    with open(path, encoding="utf-8") as fh:
        return json.load(fh)
