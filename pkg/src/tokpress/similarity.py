"""Cosine-similarity scoring: anchor extraction and guidance-driven ranking.

Anchors seed the stage-one mask: each language token votes for the image
patch it is most similar to. The same machinery scores image tokens against
an arbitrary guidance set to pick merge sources.
"""

from __future__ import annotations

import numpy as np

from .core import (
    BinaryMask,
    GridRangeError,
    ParameterError,
    PatchGrid,
    ShapeError,
    index_set,
    token_matrix,
)


def _unit_rows(a: np.ndarray) -> np.ndarray:
    # float64 internally; zero-norm rows stay zero so they score 0 downstream
    a = a.astype(np.float64)
    norms = np.linalg.norm(a, axis=1, keepdims=True)
    return a / np.where(norms > 0.0, norms, 1.0)


def cosine_similarity_matrix(a, b) -> np.ndarray:
    """Pairwise cosine similarity; entry (i, j) compares row i of ``a`` with row j of ``b``.

    Rows with zero norm produce 0 for all their entries, so padded tokens are
    harmless. Returns float64, shape (a.rows, b.rows).
    """
    a = token_matrix(a, name="a")
    b = token_matrix(b, name="b")
    if a.shape[1] != b.shape[1]:
        raise ShapeError(f"embedding dims differ: {a.shape[1]} vs {b.shape[1]}")
    if a.shape[0] == 0 or b.shape[0] == 0:
        raise ShapeError("cosine similarity needs non-empty inputs")
    return _unit_rows(a) @ _unit_rows(b).T


def anchor_mask(e_lang, e_img, grid: PatchGrid, *, per_view: bool = False) -> BinaryMask:
    """Mark, for every language token, the grid cell of its most similar image token.

    Bits are the union over language tokens (set semantics, so at most
    ``e_lang.rows`` bits are set). Argmax ties resolve to the lower token
    index. With ``per_view=True`` the argmax is taken inside each camera view
    separately, one anchor per view per language token, instead of across the
    concatenated sequence.
    """
    e_lang = token_matrix(e_lang, name="e_lang")
    e_img = token_matrix(e_img, name="e_img")
    if e_img.shape[0] != grid.total:
        raise ShapeError(f"e_img has {e_img.shape[0]} rows, grid expects {grid.total}")
    if e_lang.shape[0] < 1:
        raise ShapeError("anchor_mask needs at least one language token")

    sims = cosine_similarity_matrix(e_lang, e_img)
    flat = np.zeros(grid.total, dtype=bool)
    if per_view:
        tpv = grid.tokens_per_view
        for v in range(grid.views):
            block = sims[:, v * tpv : (v + 1) * tpv]
            flat[np.argmax(block, axis=1) + v * tpv] = True
    else:
        flat[np.argmax(sims, axis=1)] = True
    return BinaryMask(grid, flat.reshape(grid.shape))


def relevance_scores(e_img, guides, *, aggregation: str = "max") -> np.ndarray:
    """Score each image token by cosine similarity to a set of guidance tokens.

    ``aggregation`` collapses the per-guide similarities: "max" (default,
    robust to irrelevant guides) or "mean". Returns float32, one score per
    image token.
    """
    sims = cosine_similarity_matrix(e_img, guides)
    if aggregation == "max":
        scores = sims.max(axis=1)
    elif aggregation == "mean":
        scores = sims.mean(axis=1)
    else:
        raise ParameterError(f"unknown aggregation {aggregation!r} (use 'max' or 'mean')")
    return scores.astype(np.float32)


def top_m(scores, m: int) -> np.ndarray:
    """Indices of the ``m`` largest scores as a sorted index set.

    Ties break toward the lower index; the selection is deterministic for a
    fixed input.
    """
    scores = np.asarray(scores, dtype=np.float32)
    if scores.ndim != 1:
        raise ShapeError(f"scores must be 1-D, got shape {scores.shape}")
    if scores.size and not np.isfinite(scores).all():
        raise ParameterError("scores must be finite")
    if not 0 <= m <= scores.size:
        raise GridRangeError(f"m {m} out of range [0, {scores.size}]")
    if m == 0:
        return np.empty(0, dtype=np.int64)
    order = np.argsort(-scores.astype(np.float64), kind="stable")
    return index_set(order[:m])
