"""Builtin coupling fields for agent dynamics.

Dynamics are declared in the scenario document rather than supplied as
arbitrary code, so declared Lipschitz and magnitude bounds can be audited.
Every field is batch-aware: ``x_i`` has shape ``(..., n)``, each neighbor
state ``(..., n_j)``, and the result matches ``x_i``.

Available kinds:

``zero``
    No coupling, ``f == 0``.
``linear``
    ``A @ x_i + sum_k B_k @ x_jk`` with explicit matrices.
``consensus``
    ``gain * sum_k (x_jk - x_i)``; neighbor dims must equal ``n``.
``saturated_consensus``
    Componentwise clamp of each disagreement before summing; globally bounded.
``sine``
    ``gain * sum_k sin(x_jk - x_i)`` componentwise; globally bounded.
"""

from __future__ import annotations

from typing import Callable, Sequence

import numpy as np

FieldFn = Callable[[np.ndarray, Sequence[np.ndarray]], np.ndarray]


def _require(cond: bool, msg: str):
    if not cond:
        raise ValueError(msg)


def _zero_field(config, dim, neighbor_dims) -> FieldFn:
    def field(x_i, neighbors):
        return np.zeros_like(np.asarray(x_i, dtype=float))

    return field


def _linear_field(config, dim, neighbor_dims) -> FieldFn:
    a = np.asarray(config.get("self", np.zeros((dim, dim))), dtype=float)
    _require(a.shape == (dim, dim), f"linear 'self' matrix must be {dim}x{dim}")
    raw = config.get("neighbors", [])
    _require(
        len(raw) == len(neighbor_dims),
        f"linear 'neighbors' needs {len(neighbor_dims)} matrices, got {len(raw)}",
    )
    mats = []
    for k, (m, nj) in enumerate(zip(raw, neighbor_dims)):
        b = np.asarray(m, dtype=float)
        _require(b.shape == (dim, nj), f"neighbor matrix {k} must be {dim}x{nj}")
        mats.append(b)

    def field(x_i, neighbors):
        out = np.asarray(x_i, dtype=float) @ a.T
        for b, x_j in zip(mats, neighbors):
            out = out + np.asarray(x_j, dtype=float) @ b.T
        return out

    return field


def _consensus_field(config, dim, neighbor_dims) -> FieldFn:
    gain = float(config.get("gain", 1.0))
    _require(
        all(nj == dim for nj in neighbor_dims),
        "consensus coupling requires neighbors of equal dimension",
    )

    def field(x_i, neighbors):
        x_i = np.asarray(x_i, dtype=float)
        out = np.zeros_like(x_i)
        for x_j in neighbors:
            out = out + (np.asarray(x_j, dtype=float) - x_i)
        return gain * out

    return field


def _saturated_consensus_field(config, dim, neighbor_dims) -> FieldFn:
    gain = float(config.get("gain", 1.0))
    limit = float(config.get("limit", 1.0))
    _require(limit > 0, "saturation limit must be positive")
    _require(
        all(nj == dim for nj in neighbor_dims),
        "saturated_consensus requires neighbors of equal dimension",
    )

    def field(x_i, neighbors):
        x_i = np.asarray(x_i, dtype=float)
        out = np.zeros_like(x_i)
        for x_j in neighbors:
            out = out + np.clip(np.asarray(x_j, dtype=float) - x_i, -limit, limit)
        return gain * out

    return field


def _sine_field(config, dim, neighbor_dims) -> FieldFn:
    gain = float(config.get("gain", 1.0))
    _require(
        all(nj == dim for nj in neighbor_dims),
        "sine coupling requires neighbors of equal dimension",
    )

    def field(x_i, neighbors):
        x_i = np.asarray(x_i, dtype=float)
        out = np.zeros_like(x_i)
        for x_j in neighbors:
            out = out + np.sin(np.asarray(x_j, dtype=float) - x_i)
        return gain * out

    return field


_BUILTINS = {
    "zero": _zero_field,
    "linear": _linear_field,
    "consensus": _consensus_field,
    "saturated_consensus": _saturated_consensus_field,
    "sine": _sine_field,
}


def build_field(config: dict, dim: int, neighbor_dims: Sequence[int]) -> FieldFn:
    """Construct the coupling field described by a dynamics config block."""
    if not isinstance(config, dict) or "kind" not in config:
        raise ValueError("dynamics config must be an object with a 'kind' key")
    kind = config["kind"]
    if kind not in _BUILTINS:
        known = ", ".join(sorted(_BUILTINS))
        raise ValueError(f"unknown dynamics kind {kind!r} (known: {known})")
    return _BUILTINS[kind](config, dim, tuple(neighbor_dims))
