import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import oracles
from ctqa.compression import (
    CompressionConfig,
    aggregate_global,
    compress_slice,
    compress_volume,
    compression_ratio,
    identity_moe_params,
    identity_projection,
    load_params_bytes,
    merge_contextual,
    moe_gate,
    moe_refine_slice,
    save_params_bytes,
    score_dominant,
    seeded_moe_params,
    seeded_projection,
    select_dominant,
)
from ctqa.compression.types import MoeParams, _f32_exact
from ctqa.errors import (
    DimensionMismatchError,
    EmptyVolumeError,
    KTooLargeError,
    MTooLargeError,
)
from ctqa.features import generate_synthetic_volume
from ctqa.rng import bit_generator, normals, uniforms


def _rand(seed, *shape):
    return normals(bit_generator(seed), int(np.prod(shape))).reshape(shape)


# ---------------------------------------------------------------------------
# moe_gate


def test_gate_uniform_for_zero_weights():
    p = identity_moe_params(d=3, E=4)
    out = moe_gate(np.ones(3), p)
    np.testing.assert_allclose(out, [0.25, 0.25, 0.25, 0.25], atol=1e-12)


def test_gate_closed_form_two_experts():
    # logits (ln 2, 0) -> (2/3, 1/3)
    p = MoeParams(
        gate_W=np.zeros((2, 1)),
        gate_b=np.array([math.log(2.0), 0.0]),
        expert_W1=np.ones((2, 1, 1)),
        expert_b1=np.zeros((2, 1)),
        expert_W2=np.ones((2, 1, 1)),
        expert_b2=np.zeros((2, 1)),
        k=1,
        activation="linear",
    )
    out = moe_gate(np.array([5.0]), p)
    np.testing.assert_allclose(out, [2.0 / 3.0, 1.0 / 3.0], atol=1e-9)


def test_gate_sums_to_one_randomized():
    p = seeded_moe_params(0, d=16, E=8, k=3)
    for seed in range(50):
        z = _rand(seed + 100, 16)
        out = moe_gate(z, p)
        assert abs(out.sum() - 1.0) <= 1e-9
        assert np.all(out > 0) and np.all(out < 1)


def test_gate_dim_mismatch():
    p = seeded_moe_params(0, d=16, E=4, k=2)
    with pytest.raises(DimensionMismatchError):
        moe_gate(np.zeros(5), p)


# ---------------------------------------------------------------------------
# moe_refine_slice


def test_refine_identity_experts_full_routing_is_identity(kernel_backend):
    p = identity_moe_params(d=6, E=3)  # k = E, linear identity experts
    Z = _rand(1, 5, 6).astype(np.float32)
    out = moe_refine_slice(Z, p)
    assert out.shape == Z.shape
    np.testing.assert_allclose(out, Z, rtol=1e-6, atol=1e-7)


def test_refine_single_expert_scales_by_gate_weight(kernel_backend):
    # bias logits put alpha_0 = 0.9; identity expert => z' = 0.9 z
    d = 4
    eye = np.tile(np.eye(d), (2, 1, 1))
    p = MoeParams(
        gate_W=np.zeros((2, d)),
        gate_b=np.array([math.log(0.9), math.log(0.1)]),
        expert_W1=eye,
        expert_b1=np.zeros((2, d)),
        expert_W2=eye,
        expert_b2=np.zeros((2, d)),
        k=1,
        activation="linear",
    )
    Z = _rand(2, 3, d).astype(np.float32)
    out = moe_refine_slice(Z, p)
    np.testing.assert_allclose(out, 0.9 * Z, rtol=1e-6, atol=1e-7)


def test_refine_matches_straight_line_recompute(kernel_backend):
    p = seeded_moe_params(9, d=2, E=3, k=2, hidden=3)
    Z = _rand(3, 4, 2).astype(np.float32)
    expected = oracles.naive_moe_refine(
        Z, p.gate_W, p.gate_b, p.expert_W1, p.expert_b1, p.expert_W2, p.expert_b2,
        p.activation, p.k,
    )
    np.testing.assert_allclose(moe_refine_slice(Z, p), expected, rtol=1e-6, atol=1e-7)


def test_refine_backends_agree():
    from ctqa.compression import kernels

    if len(kernels.available_backends()) < 2:
        pytest.skip("compiled backend not built")
    p = seeded_moe_params(4, d=8, E=4, k=2)
    Z = _rand(5, 6, 8).astype(np.float32)
    outs = {}
    for name in kernels.available_backends():
        with kernels.use(name):
            outs[name] = moe_refine_slice(Z, p)
    np.testing.assert_allclose(outs["numpy"], outs["cython"], rtol=1e-6, atol=1e-7)


# ---------------------------------------------------------------------------
# aggregate_global


def test_aggregate_identical_slices():
    slice_ = _rand(3, 4, 5).astype(np.float32)
    out = aggregate_global(np.stack([slice_, slice_]))
    np.testing.assert_allclose(out, slice_, rtol=1e-7)


def test_aggregate_single_slice_identity():
    slice_ = _rand(4, 4, 5).astype(np.float32)
    np.testing.assert_array_equal(aggregate_global(slice_[None]), slice_)


def test_aggregate_matches_naive_loop():
    stack = _rand(5, 3, 4, 5).astype(np.float32)
    np.testing.assert_allclose(
        aggregate_global(stack), oracles.naive_mean_stack(stack), rtol=1e-6
    )


def test_aggregate_commutes_with_slice_permutation():
    stack = _rand(6, 5, 4, 3).astype(np.float32)
    permuted = stack[[3, 1, 4, 0, 2]]
    np.testing.assert_allclose(aggregate_global(stack), aggregate_global(permuted), rtol=1e-7)


def test_aggregate_empty_volume():
    with pytest.raises(EmptyVolumeError):
        aggregate_global(np.empty((0, 3, 4)))


# ---------------------------------------------------------------------------
# dominant scoring and selection


def test_score_dominant_two_heads(kernel_backend):
    attn = np.array([[0.1, 0.2, 0.7], [0.3, 0.3, 0.4]], dtype=np.float32)
    np.testing.assert_allclose(score_dominant(attn), [0.4, 0.5, 1.1], atol=1e-7)


def test_score_dominant_single_head_identity(kernel_backend):
    attn = np.array([[0.5, 0.1, 0.9]], dtype=np.float32)
    np.testing.assert_allclose(score_dominant(attn), attn[0], atol=1e-7)


def test_score_dominant_matches_naive_double_loop(kernel_backend):
    attn = (uniforms(bit_generator(8), 4 * 16).reshape(4, 16)).astype(np.float32)
    np.testing.assert_allclose(
        score_dominant(attn), oracles.naive_attention_scores(attn), rtol=1e-9
    )


def test_select_dominant_basic(kernel_backend):
    assert select_dominant(np.array([0.4, 0.5, 1.1]), 2).tolist() == [1, 2]


def test_select_dominant_tie_break(kernel_backend):
    assert select_dominant(np.ones(5), 3).tolist() == [0, 1, 2]


def test_select_dominant_matches_sort_oracle(kernel_backend):
    scores = uniforms(bit_generator(12), 64)
    assert select_dominant(scores, 54).tolist() == oracles.sort_select(scores, 54)


def test_select_dominant_k_too_large(kernel_backend):
    with pytest.raises(KTooLargeError):
        select_dominant(np.ones(4), 5)


@given(st.integers(0, 10_000), st.integers(2, 32), st.data())
@settings(max_examples=60, deadline=None)
def test_select_dominant_equals_sort_oracle_property(seed, n, data):
    k = data.draw(st.integers(1, n))
    scores = uniforms(bit_generator(seed), n)
    # quantize to force frequent ties
    scores = np.round(scores * 8) / 8
    assert select_dominant(scores, k).tolist() == oracles.sort_select(scores, k)


# ---------------------------------------------------------------------------
# contextual merging


def test_merge_single_target_mean(kernel_backend):
    tokens = np.array([[1.0, 0.0], [2.0, 0.0], [0.0, 2.0]], dtype=np.float32)
    keys = np.ones((3, 2), dtype=np.float32)
    scores = np.array([3.0, 2.0, 1.0])  # row 0 is the target
    out = merge_contextual(tokens, keys, 1, scores)
    np.testing.assert_allclose(out, [[1.0, 2.0 / 3.0]], rtol=1e-6)


def test_merge_empty_merge_set_is_identity(kernel_backend):
    tokens = _rand(3, 4, 5).astype(np.float32)
    keys = _rand(4, 4, 3).astype(np.float32)
    scores = uniforms(bit_generator(5), 4)
    out = merge_contextual(tokens, keys, 4, scores)
    order = oracles.sort_select(scores, 4)
    np.testing.assert_array_equal(out, tokens[order])


def test_merge_matches_brute_force(kernel_backend):
    tokens = _rand(6, 6, 4).astype(np.float32)
    keys = _rand(7, 6, 3).astype(np.float32)
    scores = uniforms(bit_generator(9), 6)
    out = merge_contextual(tokens, keys, 2, scores)
    expected = oracles.brute_force_merge(tokens, keys, 2, scores)
    np.testing.assert_allclose(out, expected, rtol=1e-6, atol=1e-7)


def test_merge_mass_conservation_single_target(kernel_backend):
    # with M=1 the merged token is the mean of every remaining token
    tokens = _rand(10, 8, 3).astype(np.float32)
    keys = _rand(11, 8, 2).astype(np.float32)
    scores = uniforms(bit_generator(13), 8)
    out = merge_contextual(tokens, keys, 1, scores)
    np.testing.assert_allclose(out[0], tokens.astype(np.float64).mean(axis=0), rtol=1e-6)


def test_merge_m_too_large(kernel_backend):
    with pytest.raises(MTooLargeError):
        merge_contextual(np.ones((2, 3), np.float32), np.ones((2, 2), np.float32), 3, np.ones(2))


def test_merge_output_row_count(kernel_backend):
    for M in range(0, 6):
        tokens = _rand(20 + M, 6, 4).astype(np.float32)
        keys = _rand(30 + M, 6, 3).astype(np.float32)
        scores = uniforms(bit_generator(40 + M), 6)
        assert merge_contextual(tokens, keys, M, scores).shape == (M, 4)


# ---------------------------------------------------------------------------
# compress_slice / compress_volume


def test_compress_slice_no_compression_returns_full_slice(kernel_backend):
    vf = generate_synthetic_volume(seed=2, T=2, N=6, d=4, H=2, d_k=3)
    out = compress_slice(0, vf, CompressionConfig(K=6, M=0))
    order = oracles.sort_select(oracles.naive_attention_scores(vf.cls_attn[0]), 6)
    np.testing.assert_array_equal(out, vf.tokens[0][order])
    np.testing.assert_array_equal(out, vf.tokens[0])  # ascending order = identity


def test_compress_slice_paper_counts(kernel_backend):
    vf = generate_synthetic_volume(seed=1, T=1, N=256, d=8, H=2, d_k=4)
    out = compress_slice(0, vf, CompressionConfig(K=54, M=10))
    assert out.shape == (64, 8)


def test_compress_slice_matches_component_oracles(kernel_backend):
    vf = generate_synthetic_volume(seed=6, T=1, N=10, d=4, H=3, d_k=3)
    cfg = CompressionConfig(K=4, M=3)
    out = compress_slice(0, vf, cfg)

    scores = oracles.naive_attention_scores(vf.cls_attn[0])
    dom = oracles.sort_select(scores, 4)
    rem = [i for i in range(10) if i not in dom]
    merged = oracles.brute_force_merge(
        vf.tokens[0][rem], vf.keys[0][rem], 3, scores[rem]
    )
    expected = np.concatenate([vf.tokens[0][dom], merged])
    np.testing.assert_allclose(out, expected, rtol=1e-6, atol=1e-7)


def test_compress_volume_row_arithmetic(kernel_backend):
    # T=240, N=256, K=54, M=10 -> L = 256 + 240*64 = 15,616 (checked via the formula
    # at full scale and via an actual run at desk scale)
    assert 256 + 240 * (54 + 10) == 15_616
    vf = generate_synthetic_volume(seed=3, T=5, N=12, d=6, H=2, d_k=4)
    moe = seeded_moe_params(1, d=6, E=3, k=2)
    proj = seeded_projection(2, 6, 10)
    cfg = CompressionConfig(K=3, M=2)
    cv = compress_volume(vf, moe, cfg, proj)
    assert cv.L == 12 + 5 * 5
    assert cv.vision.shape == (cv.L, 6)
    assert cv.projected.shape == (cv.L, 10)
    assert cv.local_tokens.shape == (5, 5, 6)


def test_compress_volume_identity_padded_projection(kernel_backend):
    vf = generate_synthetic_volume(seed=4, T=2, N=6, d=4, H=2, d_k=3)
    moe = identity_moe_params(d=4, E=2)
    proj = identity_projection(4, 7)
    cv = compress_volume(vf, moe, CompressionConfig(K=2, M=1), proj)
    np.testing.assert_allclose(cv.projected[:, :4], cv.vision, rtol=1e-6, atol=1e-7)
    assert np.all(cv.projected[:, 4:] == 0)


def test_compress_volume_projection_matches_naive_gemm(kernel_backend):
    vf = generate_synthetic_volume(seed=5, T=2, N=5, d=3, H=2, d_k=2)
    moe = seeded_moe_params(6, d=3, E=2, k=1)
    proj = seeded_projection(7, 3, 4)
    cv = compress_volume(vf, moe, CompressionConfig(K=2, M=1), proj)
    expected = oracles.naive_matmul(cv.vision, proj.W_p, proj.b_p)
    np.testing.assert_allclose(cv.projected, expected, rtol=1e-6, atol=1e-6)


def test_compress_volume_dim_mismatch(kernel_backend):
    vf = generate_synthetic_volume(seed=5, T=2, N=5, d=3, H=2, d_k=2)
    with pytest.raises(DimensionMismatchError):
        compress_volume(vf, seeded_moe_params(0, d=4), CompressionConfig(K=2, M=1),
                        seeded_projection(1, 3, 4))


# ---------------------------------------------------------------------------
# compression_ratio


def test_ratio_paper_constants():
    ratio = compression_ratio(N=256, T=240, K=54, M=10)
    assert ratio == pytest.approx(1 - 15_616 / 61_440, abs=1e-12)
    assert ratio == pytest.approx(0.7458, abs=1e-4)  # "approximately 75%"


def test_ratio_no_compression_boundary_warns():
    with pytest.warns(UserWarning):
        assert compression_ratio(N=8, T=1000, K=6, M=2) == 0.0


def test_ratio_single_slice_boundary_warns():
    with pytest.warns(UserWarning):
        assert compression_ratio(N=8, T=1, K=6, M=2) == 0.0


def test_ratio_k_plus_m_bound():
    with pytest.raises(KTooLargeError):
        compression_ratio(N=8, T=2, K=8, M=1)


# ---------------------------------------------------------------------------
# CTPW parameter container


def test_params_round_trip_bitwise():
    moe = seeded_moe_params(21, d=6, E=3, k=2, hidden=4)
    proj = seeded_projection(22, 6, 9)
    raw = save_params_bytes(moe, proj)
    moe2, proj2 = load_params_bytes(raw)
    assert save_params_bytes(moe2, proj2) == raw
    assert moe2.k == moe.k and moe2.activation == moe.activation
    np.testing.assert_array_equal(moe2.gate_W, moe.gate_W)
    np.testing.assert_array_equal(proj2.W_p, proj.W_p)


def test_params_header_corruption_rejected():
    raw = save_params_bytes(seeded_moe_params(0, d=4, E=2, k=1), seeded_projection(1, 4, 5))
    from ctqa.errors import MagicMismatchError

    with pytest.raises(MagicMismatchError):
        load_params_bytes(b"XXXX" + raw[4:])
    mutated = raw[:8] + (7).to_bytes(4, "little") + raw[12:]  # E=7 desyncs payload
    with pytest.raises(DimensionMismatchError):
        load_params_bytes(mutated)


def test_f32_exact_freezes_and_rounds():
    vals = np.array([1 / 3], dtype=np.float64)
    out = _f32_exact(vals, (1,))
    assert out.dtype == np.float64
    assert out[0] == np.float32(1 / 3)
    with pytest.raises(ValueError):
        out[0] = 2.0
