# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Typed-loop implementation of the per-slice compression kernels.

Mirrors ``_kernels_py`` exactly in semantics: f64 accumulation, f32 output,
ties resolved toward the lowest index, experts summed in ascending index
order. See that module's docstring for the shared contract.
"""
import numpy as np

cimport numpy as cnp
from libc.math cimport exp, tanh

cnp.import_array()

name = "cython"


cdef inline double _activate(double x, int activation_id) nogil:
    if activation_id == 1:
        return tanh(x)
    if activation_id == 2:
        return x if x > 0.0 else 0.0
    return x


def moe_refine_slice(const float[:, ::1] tokens,
                     const double[:, ::1] gate_W, const double[::1] gate_b,
                     const double[:, :, ::1] w1, const double[:, ::1] b1,
                     const double[:, :, ::1] w2, const double[:, ::1] b2,
                     int activation_id, int k):
    cdef Py_ssize_t N = tokens.shape[0]
    cdef Py_ssize_t d = tokens.shape[1]
    cdef Py_ssize_t E = gate_W.shape[0]
    cdef Py_ssize_t h = w1.shape[1]
    cdef Py_ssize_t i, j, m, e, pick, best

    out_arr = np.empty((N, d), dtype=np.float32)
    cdef float[:, ::1] out = out_arr
    cdef double[::1] alpha = np.empty(E)
    cdef unsigned char[::1] selected = np.empty(E, dtype=np.uint8)
    cdef double[::1] hidden = np.empty(h)
    cdef double[::1] acc = np.empty(d)
    cdef double s, peak, total, best_val

    with nogil:
        for i in range(N):
            # gate: softmax(gate_W @ z + gate_b)
            peak = -1e308
            for e in range(E):
                s = gate_b[e]
                for j in range(d):
                    s += gate_W[e, j] * tokens[i, j]
                alpha[e] = s
                if s > peak:
                    peak = s
            total = 0.0
            for e in range(E):
                alpha[e] = exp(alpha[e] - peak)
                total += alpha[e]
            for e in range(E):
                alpha[e] /= total

            # top-k selection; strict > keeps the lowest index on ties
            for e in range(E):
                selected[e] = 0
            for pick in range(k):
                best = -1
                best_val = -1.0
                for e in range(E):
                    if not selected[e] and alpha[e] > best_val:
                        best_val = alpha[e]
                        best = e
                selected[best] = 1

            for j in range(d):
                acc[j] = 0.0
            for e in range(E):
                if not selected[e]:
                    continue
                for m in range(h):
                    s = b1[e, m]
                    for j in range(d):
                        s += w1[e, m, j] * tokens[i, j]
                    hidden[m] = _activate(s, activation_id)
                for j in range(d):
                    s = b2[e, j]
                    for m in range(h):
                        s += w2[e, j, m] * hidden[m]
                    acc[j] += alpha[e] * s
            for j in range(d):
                out[i, j] = <float> acc[j]
    return out_arr


def sum_cls_attention(const float[:, ::1] cls_attn):
    cdef Py_ssize_t H = cls_attn.shape[0]
    cdef Py_ssize_t N = cls_attn.shape[1]
    cdef Py_ssize_t hh, j
    out_arr = np.zeros(N)
    cdef double[::1] out = out_arr
    with nogil:
        for hh in range(H):
            for j in range(N):
                out[j] += cls_attn[hh, j]
    return out_arr


def top_k_indices(const double[::1] scores, Py_ssize_t K):
    cdef Py_ssize_t N = scores.shape[0]
    cdef Py_ssize_t pick, j, best
    cdef double best_val
    taken_arr = np.zeros(N, dtype=np.uint8)
    cdef unsigned char[::1] taken = taken_arr
    out_arr = np.empty(K, dtype=np.int64)
    cdef cnp.int64_t[::1] out = out_arr
    with nogil:
        for pick in range(K):
            best = -1
            best_val = -1e308
            for j in range(N):
                if not taken[j] and scores[j] > best_val:
                    best_val = scores[j]
                    best = j
            taken[best] = 1
            out[pick] = best
    out_arr.sort()
    return out_arr


def assign_and_pool(const float[:, ::1] targets, const float[:, ::1] merge,
                    const float[:, ::1] target_keys, const float[:, ::1] merge_keys):
    cdef Py_ssize_t M = targets.shape[0]
    cdef Py_ssize_t d = targets.shape[1]
    cdef Py_ssize_t R = merge.shape[0]
    cdef Py_ssize_t dk = target_keys.shape[1]
    cdef Py_ssize_t i, j, t, best

    acc_arr = np.zeros((M, d))
    cdef double[:, ::1] acc = acc_arr
    counts_arr = np.ones(M)
    cdef double[::1] counts = counts_arr
    out_arr = np.empty((M, d), dtype=np.float32)
    cdef float[:, ::1] out = out_arr
    cdef double s, best_val

    with nogil:
        for t in range(M):
            for j in range(d):
                acc[t, j] = targets[t, j]
        for i in range(R):
            best = 0
            best_val = -1e308
            for t in range(M):
                s = 0.0
                for j in range(dk):
                    s += (<double> merge_keys[i, j]) * (<double> target_keys[t, j])
                if s > best_val:
                    best_val = s
                    best = t
            counts[best] += 1.0
            for j in range(d):
                acc[best, j] += merge[i, j]
        for t in range(M):
            for j in range(d):
                out[t, j] = <float> (acc[t, j] / counts[t])
    return out_arr
