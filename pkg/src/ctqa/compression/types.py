"""Parameter and result containers for the token compression pipeline.

Weights live as f64 in memory (all arithmetic is done in double precision)
but always carry f32-representable values: seeded constructors round through
f32, and the CTPW container stores f32, so save -> load round-trips are
bit-exact.

CTPW layout: magic ``CTPW``, u32 LE version=1, u32 LE E, k, d, d', hidden,
activation id, then f32 LE arrays gate_W[E][d], gate_b[E],
expert_W1[E][hidden][d], expert_b1[E][hidden], expert_W2[E][d][hidden],
expert_b2[E][d], proj_W[d][d'], proj_b[d'].
"""
from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .. import rng
from ..binio import Reader, Writer
from ..errors import DimensionMismatchError, InvalidDimsError

MAGIC = b"CTPW"
VERSION = 1

ACTIVATIONS = ("linear", "tanh", "relu")


def _f32_exact(values: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    """Round to f32 precision, keep f64 dtype, freeze."""
    out = values.astype(np.float32).astype(np.float64).reshape(shape)
    out.setflags(write=False)
    return out


@dataclass(frozen=True)
class MoeParams:
    """Token-wise mixture gate plus E one-hidden-layer expert MLPs (d -> d)."""

    gate_W: np.ndarray  # (E, d)
    gate_b: np.ndarray  # (E,)
    expert_W1: np.ndarray  # (E, hidden, d)
    expert_b1: np.ndarray  # (E, hidden)
    expert_W2: np.ndarray  # (E, d, hidden)
    expert_b2: np.ndarray  # (E, d)
    k: int
    activation: str = "tanh"

    @property
    def E(self) -> int:
        return self.gate_W.shape[0]

    @property
    def d(self) -> int:
        return self.gate_W.shape[1]

    @property
    def hidden(self) -> int:
        return self.expert_W1.shape[1]

    @property
    def activation_id(self) -> int:
        return ACTIVATIONS.index(self.activation)

    def __post_init__(self):
        E, d = self.gate_W.shape
        h = self.expert_W1.shape[1]
        if not (1 <= self.k <= E):
            raise InvalidDimsError(f"top-k must satisfy 1 <= k <= E, got k={self.k}, E={E}")
        if self.activation not in ACTIVATIONS:
            raise InvalidDimsError(f"unknown activation {self.activation!r}")
        expected = {
            "gate_b": (E,),
            "expert_W1": (E, h, d),
            "expert_b1": (E, h),
            "expert_W2": (E, d, h),
            "expert_b2": (E, d),
        }
        for name, shape in expected.items():
            arr = getattr(self, name)
            if arr.shape != shape:
                raise DimensionMismatchError(f"{name} shape {arr.shape}, expected {shape}")


@dataclass(frozen=True)
class Projection:
    """Linear map from the encoder token space (d) into the LLM space (d')."""

    W_p: np.ndarray  # (d, d')
    b_p: np.ndarray  # (d',)

    @property
    def d(self) -> int:
        return self.W_p.shape[0]

    @property
    def d_prime(self) -> int:
        return self.W_p.shape[1]

    def __post_init__(self):
        if self.b_p.shape != (self.W_p.shape[1],):
            raise DimensionMismatchError(
                f"b_p shape {self.b_p.shape} does not match W_p {self.W_p.shape}"
            )
        if not (np.all(np.isfinite(self.W_p)) and np.all(np.isfinite(self.b_p))):
            raise InvalidDimsError("projection weights must be finite")


@dataclass(frozen=True)
class CompressionConfig:
    """K dominant + M contextual tokens per slice; K + M <= N of the volume."""

    K: int = 54
    M: int = 10
    attn_layer_note: str = ""  # provenance of the ingested attention maps
    tie_break: str = "lowest_index"

    def __post_init__(self):
        if self.K < 1 or self.M < 0:
            raise InvalidDimsError(f"need K >= 1 and M >= 0, got K={self.K}, M={self.M}")
        if self.tie_break != "lowest_index":
            raise InvalidDimsError(f"unsupported tie-break rule {self.tie_break!r}")


@dataclass(frozen=True)
class CompressedVision:
    """Output of the full pipeline for one study.

    global_tokens: (N, d)        volume-level matrix from MoE + slice mean
    local_tokens:  (T, K+M, d)   per-slice dominant + contextual rows
    vision:        (L, d)        global rows then per-slice locals, L = N + T*(K+M)
    projected:     (L, d')       vision mapped into the LLM embedding space
    """

    global_tokens: np.ndarray
    local_tokens: np.ndarray
    vision: np.ndarray
    projected: np.ndarray

    @property
    def L(self) -> int:
        return self.vision.shape[0]

    def __post_init__(self):
        T, per_slice, d = self.local_tokens.shape
        expected_L = self.global_tokens.shape[0] + T * per_slice
        if self.vision.shape != (expected_L, d):
            raise DimensionMismatchError(
                f"vision shape {self.vision.shape}, expected ({expected_L}, {d})"
            )
        if self.projected.shape[0] != expected_L:
            raise DimensionMismatchError(
                f"projected rows {self.projected.shape[0]} != L {expected_L}"
            )


def seeded_moe_params(
    seed: int, d: int, E: int = 4, k: int = 2, hidden: int | None = None, activation: str = "tanh"
) -> MoeParams:
    """Untrained but reproducible weights, scaled like standard fan-in init."""
    h = hidden if hidden is not None else d
    bit_gen = rng.bit_generator(seed)
    scale_in = 1.0 / np.sqrt(d)
    scale_h = 1.0 / np.sqrt(h)
    return MoeParams(
        gate_W=_f32_exact(rng.normals(bit_gen, E * d) * scale_in, (E, d)),
        gate_b=_f32_exact(rng.normals(bit_gen, E) * 0.01, (E,)),
        expert_W1=_f32_exact(rng.normals(bit_gen, E * h * d) * scale_in, (E, h, d)),
        expert_b1=_f32_exact(rng.normals(bit_gen, E * h) * 0.01, (E, h)),
        expert_W2=_f32_exact(rng.normals(bit_gen, E * d * h) * scale_h, (E, d, h)),
        expert_b2=_f32_exact(rng.normals(bit_gen, E * d) * 0.01, (E, d)),
        k=k,
        activation=activation,
    )


def identity_moe_params(d: int, E: int = 2, k: int | None = None) -> MoeParams:
    """Every expert is the identity map; with k=E the whole MoE is identity."""
    eye = np.tile(np.eye(d), (E, 1, 1))
    return MoeParams(
        gate_W=_f32_exact(np.zeros(E * d), (E, d)),
        gate_b=_f32_exact(np.zeros(E), (E,)),
        expert_W1=_f32_exact(eye, (E, d, d)),
        expert_b1=_f32_exact(np.zeros(E * d), (E, d)),
        expert_W2=_f32_exact(eye, (E, d, d)),
        expert_b2=_f32_exact(np.zeros(E * d), (E, d)),
        k=k if k is not None else E,
        activation="linear",
    )


def seeded_projection(seed: int, d: int, d_prime: int) -> Projection:
    bit_gen = rng.bit_generator(seed)
    return Projection(
        W_p=_f32_exact(rng.normals(bit_gen, d * d_prime) / np.sqrt(d), (d, d_prime)),
        b_p=_f32_exact(rng.normals(bit_gen, d_prime) * 0.01, (d_prime,)),
    )


def identity_projection(d: int, d_prime: int | None = None) -> Projection:
    """Identity extended with zero padding columns, zero bias."""
    dp = d_prime if d_prime is not None else d
    W = np.zeros((d, dp))
    np.fill_diagonal(W, 1.0)
    return Projection(W_p=_f32_exact(W, (d, dp)), b_p=_f32_exact(np.zeros(dp), (dp,)))


def save_params_bytes(moe: MoeParams, proj: Projection) -> bytes:
    if proj.d != moe.d:
        raise DimensionMismatchError(f"projection d={proj.d} != MoE d={moe.d}")
    w = Writer()
    w.magic(MAGIC)
    w.u32(VERSION)
    for dim in (moe.E, moe.k, moe.d, proj.d_prime, moe.hidden, moe.activation_id):
        w.u32(dim)
    for arr in (
        moe.gate_W,
        moe.gate_b,
        moe.expert_W1,
        moe.expert_b1,
        moe.expert_W2,
        moe.expert_b2,
        proj.W_p,
        proj.b_p,
    ):
        w.f32_array(arr)
    return w.getvalue()


def save_params(moe: MoeParams, proj: Projection, path: str | Path) -> None:
    Path(path).write_bytes(save_params_bytes(moe, proj))


def load_params_bytes(data: bytes, source: str = "<bytes>") -> tuple[MoeParams, Projection]:
    r = Reader(data, source=source)
    r.expect_magic(MAGIC)
    r.expect_version(VERSION)
    E, k, d, d_prime, hidden, activation_id = (r.u32() for _ in range(6))
    if E < 1 or d < 1 or d_prime < 1 or hidden < 1 or not (1 <= k <= E):
        raise InvalidDimsError(f"bad CTPW dims: E={E}, k={k}, d={d}, d'={d_prime}, hidden={hidden}")
    if activation_id >= len(ACTIVATIONS):
        raise InvalidDimsError(f"unknown activation id {activation_id}")
    payload = E * d + E + E * hidden * d + E * hidden + E * d * hidden + E * d + d * d_prime + d_prime
    r.expect_payload_bytes(4 * payload)
    moe = MoeParams(
        gate_W=r.f32_array(E, d).astype(np.float64),
        gate_b=r.f32_array(E).astype(np.float64),
        expert_W1=r.f32_array(E, hidden, d).astype(np.float64),
        expert_b1=r.f32_array(E, hidden).astype(np.float64),
        expert_W2=r.f32_array(E, d, hidden).astype(np.float64),
        expert_b2=r.f32_array(E, d).astype(np.float64),
        k=k,
        activation=ACTIVATIONS[activation_id],
    )
    proj = Projection(
        W_p=r.f32_array(d, d_prime).astype(np.float64),
        b_p=r.f32_array(d_prime).astype(np.float64),
    )
    r.expect_eof()
    return moe, proj


def load_params(path: str | Path) -> tuple[MoeParams, Projection]:
    p = Path(path)
    return load_params_bytes(p.read_bytes(), source=str(p))
