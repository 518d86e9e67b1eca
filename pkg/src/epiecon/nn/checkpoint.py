"""Versioned JSON checkpoints for parameter bundles.

Floats are serialized with Python's shortest round-trip repr (the json module
default), so save -> load reproduces every tensor bit-for-bit.
"""
from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from ..errors import DataFormatError

SCHEMA_VERSION = 1


def _encode_tensors(tensors: dict) -> dict:
    out = {}
    for name, arr in tensors.items():
        arr = np.asarray(arr, dtype=float)
        out[name] = {"shape": list(arr.shape), "data": arr.reshape(-1).tolist()}
    return out


def _decode_tensors(blob: dict) -> dict:
    out = {}
    for name, spec in blob.items():
        arr = np.array(spec["data"], dtype=float).reshape(spec["shape"])
        out[name] = arr
    return out


def save_checkpoint(path, kind: str, params: dict, norm_stats: dict | None = None,
                    config: dict | None = None, meta: dict | None = None) -> None:
    payload = {
        "schema_version": SCHEMA_VERSION,
        "kind": kind,
        "params": _encode_tensors(params),
        "norm_stats": _encode_tensors(norm_stats or {}),
        "config": config or {},
        "meta": meta or {},
    }
    Path(path).write_text(json.dumps(payload))


def load_checkpoint(path) -> dict:
    payload = json.loads(Path(path).read_text())
    if payload.get("schema_version") != SCHEMA_VERSION:
        raise DataFormatError(
            f"{path}: unsupported checkpoint schema {payload.get('schema_version')!r}")
    return {
        "kind": payload["kind"],
        "params": _decode_tensors(payload["params"]),
        "norm_stats": _decode_tensors(payload["norm_stats"]),
        "config": payload["config"],
        "meta": payload["meta"],
    }
