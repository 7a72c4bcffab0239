"""The hierarchical token compression pipeline.

Two parallel pathways reduce a (T, N, d) volume to N + T*(K+M) tokens:

* global aggregation: a token-wise mixture-of-experts refines every slice,
  then a slice-wise mean collapses the stack to one (N, d) matrix;
* local selection: per slice, the K tokens with the highest summed
  CLS-attention are kept verbatim and the rest are merged into M contextual
  tokens by key-similarity assignment and average pooling.

The concatenated result is linearly projected into the language-model
embedding space. All reductions accumulate in f64 and emit f32; every
tie-break goes to the lowest index so results are platform-independent.
"""
from __future__ import annotations

import warnings

import numpy as np

from ..errors import (
    DimensionMismatchError,
    EmptyVolumeError,
    KTooLargeError,
    MTooLargeError,
)
from ..features import VolumeFeatures
from . import kernels
from .types import CompressedVision, CompressionConfig, MoeParams, Projection


def moe_gate(z: np.ndarray, p: MoeParams) -> np.ndarray:
    """Softmax gate weights for one token; an (E,) probability vector."""
    z = np.asarray(z, dtype=np.float64)
    if z.shape != (p.d,):
        raise DimensionMismatchError(f"token has shape {z.shape}, gate expects ({p.d},)")
    logits = p.gate_W @ z + p.gate_b
    logits = logits - logits.max()
    weights = np.exp(logits)
    return weights / weights.sum()


def moe_refine_slice(Z_t: np.ndarray, p: MoeParams) -> np.ndarray:
    """Route every token to its top-k experts and sum the weighted outputs.

    Gate weights are the raw softmax entries; they are deliberately not
    renormalized after top-k truncation, so with identity experts and k=E
    the slice passes through unchanged.
    """
    Z_t = np.ascontiguousarray(Z_t, dtype=np.float32)
    if Z_t.ndim != 2 or Z_t.shape[1] != p.d:
        raise DimensionMismatchError(f"slice shape {Z_t.shape} incompatible with d={p.d}")
    return kernels.active.moe_refine_slice(
        Z_t,
        p.gate_W,
        p.gate_b,
        p.expert_W1,
        p.expert_b1,
        p.expert_W2,
        p.expert_b2,
        p.activation_id,
        p.k,
    )


def aggregate_global(refined: np.ndarray) -> np.ndarray:
    """Slice-wise mean of the refined stack: (T, N, d) -> (N, d)."""
    refined = np.asarray(refined)
    if refined.ndim != 3 or refined.shape[0] < 1:
        raise EmptyVolumeError(f"need a (T>=1, N, d) stack, got shape {refined.shape}")
    total = refined.astype(np.float64).sum(axis=0)
    return (total / refined.shape[0]).astype(np.float32)


def score_dominant(cls_attn: np.ndarray) -> np.ndarray:
    """Per-token attention score: CLS attention summed over heads."""
    cls_attn = np.ascontiguousarray(cls_attn, dtype=np.float32)
    if cls_attn.ndim != 2:
        raise DimensionMismatchError(f"expected (H, N) attention rows, got {cls_attn.shape}")
    return kernels.active.sum_cls_attention(cls_attn)


def select_dominant(scores: np.ndarray, K: int, tie_break: str = "lowest_index") -> np.ndarray:
    """Indices of the K largest scores, ascending; ties keep the lowest index."""
    scores = np.asarray(scores, dtype=np.float64)
    if tie_break != "lowest_index":
        raise ValueError(f"unsupported tie-break rule {tie_break!r}")
    if K > scores.shape[0]:
        raise KTooLargeError(f"K={K} exceeds token count {scores.shape[0]}")
    return kernels.active.top_k_indices(scores, K)


def merge_contextual(
    remaining_tokens: np.ndarray,
    remaining_keys: np.ndarray,
    M: int,
    remaining_scores: np.ndarray,
) -> np.ndarray:
    """Compress the N-K non-dominant tokens into M contextual tokens.

    The M highest-scoring remaining tokens become targets (kept in ascending
    original order); each leftover token joins the target whose key it
    matches best by dot product, and every target emits the mean of itself
    plus its assigned tokens. Targets that attract nothing pass through
    unchanged. ``remaining_scores`` are the same attention scores used for
    dominant selection, restricted to these rows; the split is not derivable
    from tokens and keys alone.
    """
    remaining_tokens = np.ascontiguousarray(remaining_tokens, dtype=np.float32)
    remaining_keys = np.ascontiguousarray(remaining_keys, dtype=np.float32)
    remaining_scores = np.asarray(remaining_scores, dtype=np.float64)
    R = remaining_tokens.shape[0]
    if remaining_keys.shape[0] != R or remaining_scores.shape[0] != R:
        raise DimensionMismatchError(
            f"tokens/keys/scores row counts differ: {R}, {remaining_keys.shape[0]}, "
            f"{remaining_scores.shape[0]}"
        )
    if M > R:
        raise MTooLargeError(f"M={M} exceeds remaining token count {R}")
    if M == 0:
        return np.empty((0, remaining_tokens.shape[1]), dtype=np.float32)
    target_idx = kernels.active.top_k_indices(remaining_scores, M)
    merge_mask = np.ones(R, dtype=bool)
    merge_mask[target_idx] = False
    merge_idx = np.nonzero(merge_mask)[0]
    return kernels.active.assign_and_pool(
        remaining_tokens[target_idx],
        np.ascontiguousarray(remaining_tokens[merge_idx]),
        remaining_keys[target_idx],
        np.ascontiguousarray(remaining_keys[merge_idx]),
    )


def compress_slice(slice_idx: int, vf: VolumeFeatures, cfg: CompressionConfig) -> np.ndarray:
    """One slice's (K+M, d) local matrix: dominant rows then contextual rows."""
    if cfg.K + cfg.M > vf.N:
        raise KTooLargeError(f"K+M = {cfg.K + cfg.M} exceeds N = {vf.N}")
    tokens = vf.tokens[slice_idx]
    scores = score_dominant(vf.cls_attn[slice_idx])
    dominant_idx = select_dominant(scores, cfg.K, cfg.tie_break)
    remaining_mask = np.ones(vf.N, dtype=bool)
    remaining_mask[dominant_idx] = False
    remaining_idx = np.nonzero(remaining_mask)[0]
    contextual = merge_contextual(
        np.ascontiguousarray(tokens[remaining_idx]),
        np.ascontiguousarray(vf.keys[slice_idx][remaining_idx]),
        cfg.M,
        scores[remaining_idx],
    )
    return np.concatenate([tokens[dominant_idx], contextual], axis=0)


def compress_volume(
    vf: VolumeFeatures, moe: MoeParams, cfg: CompressionConfig, proj: Projection
) -> CompressedVision:
    """Full pipeline: global aggregation, local selection, projection."""
    if moe.d != vf.d:
        raise DimensionMismatchError(f"MoE d={moe.d} != volume d={vf.d}")
    if proj.d != vf.d:
        raise DimensionMismatchError(f"projection d={proj.d} != volume d={vf.d}")
    refined = np.stack([moe_refine_slice(vf.tokens[t], moe) for t in range(vf.T)])
    global_tokens = aggregate_global(refined)
    local_tokens = np.stack([compress_slice(t, vf, cfg) for t in range(vf.T)])
    vision = np.concatenate(
        [global_tokens, local_tokens.reshape(vf.T * (cfg.K + cfg.M), vf.d)], axis=0
    )
    projected = (vision.astype(np.float64) @ proj.W_p + proj.b_p).astype(np.float32)
    return CompressedVision(
        global_tokens=global_tokens,
        local_tokens=local_tokens,
        vision=vision,
        projected=projected,
    )


def compression_ratio(N: int, T: int, K: int, M: int) -> float:
    """Fraction of the raw T*N tokens removed by compression.

    The global pathway always contributes N extra rows, so degenerate
    configurations (K+M close to N with small T) can come out negative; those
    are reported as 0.0 with a warning since no compression happened.
    """
    if K + M > N:
        raise KTooLargeError(f"K+M = {K + M} exceeds N = {N}")
    ratio = 1.0 - (N + T * (K + M)) / (T * N)
    if ratio < 0.0:
        warnings.warn(
            f"configuration expands the token stream (ratio {ratio:.4f}); reporting 0",
            stacklevel=2,
        )
        return 0.0
    return ratio
