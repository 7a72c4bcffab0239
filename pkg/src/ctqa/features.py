"""Per-study visual feature volumes: the CTFV container and a synthetic source.

A study is stored as the frozen encoder would have produced it: per-slice
token matrices, the CLS attention row of every head (only the CLS row is
kept; full attention maps would blow the file up N-fold for data the
compressor never reads), and per-token key vectors used by contextual
merging, which cannot be recomputed without the encoder itself.

CTFV layout (bit-exact): magic ``CTFV``, u32 LE version=1, u32 LE T, N, d,
H, d_k, then f32 LE arrays ``tokens[T][N][d]``, ``cls_attn[T][H][N]``,
``keys[T][N][d_k]``. No padding; trailing bytes are an error.
"""
from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import rng
from .binio import F32, Reader, Writer
from .errors import InvalidDimsError

MAGIC = b"CTFV"
VERSION = 1

# Paper-scale defaults for one CLIP ViT-B/16 slice encoder.
DEFAULT_T = 240
DEFAULT_N = 256
DEFAULT_D = 1024


@dataclass(frozen=True)
class VolumeFeatures:
    """Immutable feature tensors for one CT study.

    tokens:   (T, N, d)   f32 per-slice visual tokens
    cls_attn: (T, H, N)   f32 nonnegative CLS-attention rows per head
    keys:     (T, N, d_k) f32 encoder key vectors
    """

    study_id: str
    tokens: np.ndarray
    cls_attn: np.ndarray
    keys: np.ndarray

    @property
    def T(self) -> int:
        return self.tokens.shape[0]

    @property
    def N(self) -> int:
        return self.tokens.shape[1]

    @property
    def d(self) -> int:
        return self.tokens.shape[2]

    @property
    def H(self) -> int:
        return self.cls_attn.shape[1]

    @property
    def d_k(self) -> int:
        return self.keys.shape[2]

    def __post_init__(self):
        validate(self)


def _check_dims(T: int, N: int, d: int, H: int, d_k: int) -> None:
    if T < 1 or N < 2 or d < 1 or H < 1 or d_k < 1:
        raise InvalidDimsError(
            f"dims out of bounds: T={T} (>=1), N={N} (>=2), d={d} (>=1), H={H} (>=1), d_k={d_k} (>=1)"
        )


def validate(vf: VolumeFeatures) -> None:
    """Raise if tensors are inconsistent with each other or the invariants."""
    if vf.tokens.ndim != 3 or vf.cls_attn.ndim != 3 or vf.keys.ndim != 3:
        raise InvalidDimsError("tokens, cls_attn, keys must be 3-dimensional")
    T, N, d = vf.tokens.shape
    _check_dims(T, N, d, vf.cls_attn.shape[1], vf.keys.shape[2])
    if vf.cls_attn.shape[0] != T or vf.cls_attn.shape[2] != N:
        raise InvalidDimsError(
            f"cls_attn shape {vf.cls_attn.shape} inconsistent with tokens {vf.tokens.shape}"
        )
    if vf.keys.shape[0] != T or vf.keys.shape[1] != N:
        raise InvalidDimsError(
            f"keys shape {vf.keys.shape} inconsistent with tokens {vf.tokens.shape}"
        )
    for name, arr in (("tokens", vf.tokens), ("cls_attn", vf.cls_attn), ("keys", vf.keys)):
        if arr.dtype != F32:
            raise InvalidDimsError(f"{name} must be little-endian f32, got {arr.dtype}")
    if np.any(vf.cls_attn < 0):
        raise InvalidDimsError("cls_attn entries must be nonnegative")


def _frozen(arr: np.ndarray) -> np.ndarray:
    out = np.ascontiguousarray(arr, dtype=F32)
    out.setflags(write=False)
    return out


def save_volume_bytes(vf: VolumeFeatures) -> bytes:
    validate(vf)
    w = Writer()
    w.magic(MAGIC)
    w.u32(VERSION)
    for dim in (vf.T, vf.N, vf.d, vf.H, vf.d_k):
        w.u32(dim)
    w.f32_array(vf.tokens)
    w.f32_array(vf.cls_attn)
    w.f32_array(vf.keys)
    return w.getvalue()


def save_volume(vf: VolumeFeatures, path: str | Path) -> None:
    Path(path).write_bytes(save_volume_bytes(vf))


def load_volume_bytes(data: bytes, study_id: str, source: str = "<bytes>") -> VolumeFeatures:
    r = Reader(data, source=source)
    r.expect_magic(MAGIC)
    r.expect_version(VERSION)
    T, N, d, H, d_k = (r.u32() for _ in range(5))
    _check_dims(T, N, d, H, d_k)
    r.expect_payload_bytes(4 * (T * N * d + T * H * N + T * N * d_k))
    tokens = r.f32_array(T, N, d)
    cls_attn = r.f32_array(T, H, N)
    keys = r.f32_array(T, N, d_k)
    r.expect_eof()
    return VolumeFeatures(study_id=study_id, tokens=tokens, cls_attn=cls_attn, keys=keys)


def load_volume(path: str | Path) -> VolumeFeatures:
    """Load a CTFV file; the study id is the file stem (not stored in-file)."""
    p = Path(path)
    return load_volume_bytes(p.read_bytes(), study_id=p.stem, source=str(p))


def generate_synthetic_volume(
    seed: int,
    T: int = 4,
    N: int = 16,
    d: int = 32,
    H: int = 4,
    d_k: int = 32,
    study_id: str | None = None,
) -> VolumeFeatures:
    """Deterministic stand-in for the frozen slice encoder's output.

    Tokens and keys are unit normals, CLS attention is uniform in [0, 1)
    (nonnegative by construction). Values are a pure function of (seed, dims)
    via the portable generator in :mod:`ctqa.rng`; same seed and dims give
    an identical volume on every platform.
    """
    _check_dims(T, N, d, H, d_k)
    bit_gen = rng.bit_generator(seed)
    tokens = rng.normals(bit_gen, T * N * d).reshape(T, N, d)
    cls_attn = rng.uniforms(bit_gen, T * H * N).reshape(T, H, N) % 1.0
    keys = rng.normals(bit_gen, T * N * d_k).reshape(T, N, d_k)
    return VolumeFeatures(
        study_id=study_id or f"synthetic-{seed}",
        tokens=_frozen(tokens),
        cls_attn=_frozen(cls_attn),
        keys=_frozen(keys),
    )
