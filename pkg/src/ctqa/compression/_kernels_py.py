"""numpy implementation of the per-slice compression kernels.

This is the fallback backend; ``_kernels_cy`` implements the same four
functions with typed C loops. Both accumulate in f64 and emit f32, both
break every tie toward the lowest index, and outputs agree within normal
floating-point tolerance (they can legitimately diverge only if two gate
scores tie within rounding noise).

Kernel contract (shared by both backends):
  moe_refine_slice(tokens f32 (N,d), gate_W f64 (E,d), gate_b f64 (E,),
                   w1 f64 (E,h,d), b1 f64 (E,h), w2 f64 (E,d,h),
                   b2 f64 (E,d), activation_id, k) -> f32 (N,d)
  sum_cls_attention(cls_attn f32 (H,N)) -> f64 (N,)
  top_k_indices(scores f64 (N,), K) -> int64 (K,) ascending
  assign_and_pool(targets f32 (M,d), merge f32 (R,d),
                  target_keys f32 (M,dk), merge_keys f32 (R,dk)) -> f32 (M,d)
"""
from __future__ import annotations

import numpy as np

name = "numpy"


def _activate(x: np.ndarray, activation_id: int) -> np.ndarray:
    if activation_id == 0:  # linear
        return x
    if activation_id == 1:  # tanh
        return np.tanh(x)
    if activation_id == 2:  # relu
        return np.maximum(x, 0.0)
    raise ValueError(f"unknown activation id {activation_id}")


def moe_refine_slice(tokens, gate_W, gate_b, w1, b1, w2, b2, activation_id, k):
    z = tokens.astype(np.float64)
    logits = z @ gate_W.T + gate_b  # (N, E)
    logits -= logits.max(axis=1, keepdims=True)
    alpha = np.exp(logits)
    alpha /= alpha.sum(axis=1, keepdims=True)

    E = alpha.shape[1]
    # Stable sort of -alpha: among equal weights the lowest expert index wins.
    top = np.argsort(-alpha, axis=1, kind="stable")[:, :k]  # (N, k)
    out = np.zeros_like(z)
    for e in range(E):
        routed = (top == e).any(axis=1)
        if not routed.any():
            continue
        hidden = _activate(z[routed] @ w1[e].T + b1[e], activation_id)
        expert_out = hidden @ w2[e].T + b2[e]
        out[routed] += alpha[routed, e][:, None] * expert_out
    return out.astype(np.float32)


def sum_cls_attention(cls_attn):
    return cls_attn.astype(np.float64).sum(axis=0)


def top_k_indices(scores, K):
    order = np.argsort(-scores, kind="stable")[:K]
    return np.sort(order).astype(np.int64)


def assign_and_pool(targets, merge, target_keys, merge_keys):
    M = targets.shape[0]
    acc = targets.astype(np.float64)
    counts = np.ones(M)
    if merge.shape[0] and M:
        sim = merge_keys.astype(np.float64) @ target_keys.astype(np.float64).T  # (R, M)
        assigned = np.argmax(sim, axis=1)  # first occurrence -> lowest target index
        np.add.at(acc, assigned, merge.astype(np.float64))
        np.add.at(counts, assigned, 1.0)
    return (acc / counts[:, None]).astype(np.float32)
