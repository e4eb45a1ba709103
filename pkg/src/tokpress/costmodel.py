"""Analytic transformer FLOPs under a per-layer token schedule.

Counts one fixed convention and nothing else: per layer at sequence length
n, QKV plus output projections cost 8*n*d^2, attention scores and the
weighted sum cost 4*n^2*d, and the two feed-forward matrices cost
4*n*d*d_ff, with every multiply-accumulate counted as 2 flops. Absolute
numbers depend on this convention; ratios between schedules are the useful
output.

Embedding lookups, the final head, layer norms, and KV-cache decode are all
outside the count.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import ParameterError, ShapeError


@dataclass(frozen=True)
class BackboneSpec:
    """Transformer dimensions the cost formula needs."""

    layers: int = 32
    hidden_dim: int = 4096
    ff_dim: int = 11008
    heads: int = 32

    def __post_init__(self) -> None:
        for field in ("layers", "hidden_dim", "ff_dim", "heads"):
            if getattr(self, field) < 1:
                raise ParameterError(f"BackboneSpec.{field} must be >= 1")
        if self.hidden_dim % self.heads != 0:
            raise ParameterError(
                f"hidden_dim {self.hidden_dim} not divisible by heads {self.heads}"
            )


#: 7B-class decoder dimensions, the scale the compression targets
DEFAULT_BACKBONE = BackboneSpec()


@dataclass(frozen=True)
class TokenSchedule:
    """Visual token count per layer plus a fixed non-visual count.

    ``visual_counts[i]`` is the number of visual tokens entering layer i;
    non-visual tokens (language, state, readouts) ride along unreduced.
    """

    visual_counts: np.ndarray
    non_visual: int = 0

    def __post_init__(self) -> None:
        counts = np.asarray(self.visual_counts, dtype=np.int64)
        if counts.ndim != 1 or counts.size < 1:
            raise ShapeError("visual_counts must be a non-empty 1-D sequence")
        if counts.min() < 0 or self.non_visual < 0:
            raise ParameterError("token counts must be non-negative")
        if np.any(np.diff(counts) > 0):
            raise ParameterError("visual counts may only step down across layers")
        counts = counts.copy()
        counts.setflags(write=False)
        object.__setattr__(self, "visual_counts", counts)

    @property
    def layers(self) -> int:
        return int(self.visual_counts.size)

    def tokens_at(self, layer: int) -> int:
        return int(self.visual_counts[layer]) + self.non_visual

    @classmethod
    def flat(cls, visual: int, layers: int, non_visual: int = 0) -> "TokenSchedule":
        return cls(np.full(layers, visual, dtype=np.int64), non_visual)

    @classmethod
    def two_stage(
        cls, kept: int, merged: int, merge_layer: int, layers: int, non_visual: int = 0
    ) -> "TokenSchedule":
        """Kept count up to merge_layer, merged count from there on."""
        if not 0 <= merge_layer < layers:
            raise ParameterError(f"merge_layer {merge_layer} out of range [0, {layers})")
        counts = np.full(layers, merged, dtype=np.int64)
        counts[:merge_layer] = kept
        return cls(counts, non_visual)


def layer_flops(n: int, spec: BackboneSpec = DEFAULT_BACKBONE) -> int:
    """Flops of one layer at sequence length n (exact integer)."""
    if n < 0:
        raise ParameterError(f"token count must be >= 0, got {n}")
    n, d, d_ff = int(n), spec.hidden_dim, spec.ff_dim
    return 8 * n * d * d + 4 * n * n * d + 4 * n * d * d_ff


def schedule_flops(schedule: TokenSchedule, spec: BackboneSpec = DEFAULT_BACKBONE) -> int:
    """Total flops of running the schedule through every backbone layer."""
    if schedule.layers != spec.layers:
        raise ShapeError(f"schedule covers {schedule.layers} layers, backbone has {spec.layers}")
    return sum(layer_flops(schedule.tokens_at(i), spec) for i in range(spec.layers))


def relative_flops(
    candidate: TokenSchedule, baseline: TokenSchedule, spec: BackboneSpec = DEFAULT_BACKBONE
) -> float:
    """Cost of the candidate schedule as a fraction of the baseline's."""
    base = schedule_flops(baseline, spec)
    if base == 0:
        raise ParameterError("baseline schedule has zero flops")
    return schedule_flops(candidate, spec) / base
