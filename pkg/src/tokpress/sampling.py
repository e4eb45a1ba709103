"""Stride-based context sampling and assembly of the stage-one keep set."""

from __future__ import annotations

import math

import numpy as np

from .core import BinaryMask, ParameterError, index_set


def context_indices(n_tokens: int, fraction: float) -> np.ndarray:
    """Every-nth-token retention: floor(fraction * n_tokens) indices at uniform stride.

    Index t of the sample is floor(t * n_tokens / count), so the samples
    start at 0, are strictly increasing, and cover the sequence evenly.
    Deterministic, no rng involved.
    """
    if n_tokens < 0:
        raise ParameterError(f"n_tokens must be >= 0, got {n_tokens}")
    if not 0.0 <= fraction <= 1.0:
        raise ParameterError(f"context fraction must lie in [0, 1], got {fraction}")
    count = math.floor(fraction * n_tokens)
    if count == 0:
        return np.empty(0, dtype=np.int64)
    return (np.arange(count, dtype=np.int64) * n_tokens) // count


def keep_set(expanded: BinaryMask, context) -> np.ndarray:
    """Union of the expanded mask's token indices with the context samples."""
    context = index_set(context, limit=expanded.grid.total, name="context")
    return np.union1d(expanded.token_indices(), context)
