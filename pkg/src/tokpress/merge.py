"""Soft-bipartite token merging: fold target tokens into a chosen source set.

The token sequence is split into sources (kept) and targets (absorbed).
Every target spreads its content over the sources through a row-stochastic
matching matrix built from RMS-normalized dot products, and every source is
then renormalized by the total weight it received, so well-matched sources
move toward the targets they absorbed while poorly-matched ones stay put.

All matching arithmetic runs in float64 with fixed reduction order, then
results are cast back to float32; merged rows are convex combinations of
the source row and the target rows, so they stay inside the data's
coordinate-wise hull.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import ParameterError, ShapeError, index_set, token_matrix

MODES = ("soft", "hard")


@dataclass(frozen=True)
class MergeParams:
    """Merge knobs: source-set size, matching mode, and normalizer details.

    ``hidden_dim`` pins the width used by the 1/sqrt(d) logit scaling; leave
    it None to take the width from the inputs.
    """

    m: int = 80
    mode: str = "soft"
    epsilon: float = 1e-6
    hidden_dim: int | None = None

    def __post_init__(self) -> None:
        if self.m < 1:
            raise ParameterError(f"source-set size m must be >= 1, got {self.m}")
        if self.mode not in MODES:
            raise ParameterError(f"mode must be one of {MODES}, got {self.mode!r}")
        if not self.epsilon > 0.0:
            raise ParameterError("epsilon must be positive")
        if self.hidden_dim is not None and self.hidden_dim < 1:
            raise ParameterError("hidden_dim must be >= 1 when given")


@dataclass(frozen=True)
class MergeReport:
    """Bookkeeping for one merge: who survived and how much weight they took."""

    source_indices: np.ndarray
    absorbed_weight: np.ndarray
    tokens_before: int
    tokens_after: int


def rms_norm(x, epsilon: float = 1e-6) -> np.ndarray:
    """Scale by the reciprocal root-mean-square of the entries, no learned gain.

    Accepts a single vector or a matrix (normalized row by row). The epsilon
    keeps zero vectors at zero instead of dividing by zero. Returns float64.
    """
    x = np.asarray(x, dtype=np.float64)
    if x.ndim not in (1, 2) or x.shape[-1] < 1:
        raise ShapeError(f"rms_norm expects a non-empty vector or matrix, got shape {x.shape}")
    ms = np.mean(np.square(x), axis=-1, keepdims=True)
    return x / np.sqrt(ms + epsilon)


def split_source_target(tokens, source) -> tuple[np.ndarray, np.ndarray]:
    """Partition rows into (sources at the given indices, remaining targets).

    Both halves keep ascending original order.
    """
    tokens = token_matrix(tokens)
    source = index_set(source, limit=tokens.shape[0], name="source")
    rest = np.setdiff1d(np.arange(tokens.shape[0], dtype=np.int64), source, assume_unique=True)
    return tokens[source], tokens[rest]


def match_logits(sources, targets, *, epsilon: float = 1e-6, hidden_dim: int | None = None) -> np.ndarray:
    """Scaled similarity logits, one row per target: dot(rms(t_i), rms(s_j)) / sqrt(d)."""
    sources = token_matrix(sources, name="sources")
    targets = token_matrix(targets, name="targets")
    if sources.shape[1] != targets.shape[1]:
        raise ShapeError(f"embedding dims differ: {sources.shape[1]} vs {targets.shape[1]}")
    d = sources.shape[1]
    if hidden_dim is not None and hidden_dim != d:
        raise ShapeError(f"hidden_dim {hidden_dim} does not match embedding dim {d}")
    return (rms_norm(targets, epsilon) @ rms_norm(sources, epsilon).T) / np.sqrt(d)


def match_weights(logits, mode: str = "soft") -> np.ndarray:
    """Row-stochastic matching matrix from logits.

    Soft mode is a row-wise softmax; hard mode puts the full unit weight on
    each row's argmax column (ties to the lower index).
    """
    logits = np.asarray(logits, dtype=np.float64)
    if logits.ndim != 2:
        raise ShapeError(f"logits must be 2-D, got shape {logits.shape}")
    if mode == "soft":
        shifted = logits - logits.max(axis=1, keepdims=True)
        e = np.exp(shifted)
        return e / e.sum(axis=1, keepdims=True)
    if mode == "hard":
        w = np.zeros_like(logits)
        w[np.arange(logits.shape[0]), np.argmax(logits, axis=1)] = 1.0
        return w
    raise ParameterError(f"mode must be one of {MODES}, got {mode!r}")


def soft_bipartite_merge(
    sources,
    targets,
    params: MergeParams,
    *,
    source_indices=None,
) -> tuple[np.ndarray, MergeReport]:
    """Absorb every target row into the source rows.

    For each target i, a weight row W[i] distributes it over sources (softmax
    of the scaled RMS-dot logits, or one-hot at the argmax in hard mode). The
    absorbed mass A_j = sum_i W[i, j] * t_i and total weight s_j = sum_i
    W[i, j] update source j to (s_row_j + A_j) / (1 + s_j), a convex blend of
    the source with what it absorbed.

    ``params.m`` must equal the number of source rows; the report's
    ``tokens_after`` is then m by construction. With no targets the sources
    come back bitwise unchanged. ``source_indices``, when given, is recorded
    in the report (positions of the sources in the caller's sequence).
    """
    sources = token_matrix(sources, name="sources")
    targets = token_matrix(targets, name="targets")
    n_s, n_t = sources.shape[0], targets.shape[0]
    if n_s < 1:
        raise ParameterError("merge needs at least one source token")
    if params.m != n_s:
        raise ParameterError(f"params.m = {params.m} but {n_s} source rows were given")
    if source_indices is None:
        source_indices = np.arange(n_s, dtype=np.int64)
    else:
        source_indices = index_set(source_indices, name="source_indices")
        if source_indices.size != n_s:
            raise ShapeError(f"{source_indices.size} source indices for {n_s} source rows")

    if n_t == 0:
        report = MergeReport(source_indices, np.zeros(n_s), n_s, n_s)
        return sources.copy(), report

    logits = match_logits(sources, targets, epsilon=params.epsilon, hidden_dim=params.hidden_dim)
    w = match_weights(logits, params.mode)
    absorbed = w.T @ targets.astype(np.float64)
    s_vec = w.sum(axis=0)
    merged = (sources.astype(np.float64) + absorbed) / (1.0 + s_vec)[:, None]

    report = MergeReport(source_indices, s_vec, n_s + n_t, n_s)
    return merged.astype(np.float32), report
