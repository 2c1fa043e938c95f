"""Shared helpers: canonical JSON, fingerprints, float formatting."""

from __future__ import annotations

import base64
import hashlib
import json

import numpy as np


def canonical_json(obj) -> str:
    """Serialize ``obj`` to JSON with a stable key order and no whitespace."""
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


def fingerprint(obj) -> str:
    """Hex SHA-256 digest of the canonical JSON form of ``obj``."""
    return hashlib.sha256(canonical_json(obj).encode("utf-8")).hexdigest()


def fmt17(x: float) -> str:
    """Format a float with 17 significant digits (lossless for float64)."""
    return format(float(x), ".17g")


def encode_f64(arr: np.ndarray) -> str:
    """Base64 encoding of a float64 array in little-endian byte order."""
    return base64.b64encode(np.asarray(arr, dtype="<f8").tobytes()).decode("ascii")


def decode_f64(text: str, shape=None) -> np.ndarray:
    arr = np.frombuffer(base64.b64decode(text), dtype="<f8").astype(np.float64)
    if shape is not None:
        arr = arr.reshape(shape)
    return arr


def frozen_array(arr, dtype=np.float64) -> np.ndarray:
    """Copy ``arr`` into a contiguous read-only ndarray.

    Always copies so the caller's array never gets frozen in place.
    """
    out = np.array(arr, dtype=dtype, order="C", copy=True)
    out.setflags(write=False)
    return out
