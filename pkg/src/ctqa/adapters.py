"""Per-region low-rank adapters and the activation-traced registry.

Each anatomical region owns one (B, A) pair applied additively to a frozen
weight matrix, scaled by alpha/rank (the usual inference convention; fixtures
depend on it, so it is pinned here). Dropout is a training-time artifact kept
only as metadata and never applied.

CTLA layout: magic ``CTLA``, u32 LE version=1, length-prefixed UTF-8 region
id, u32 LE d1, d2, d_r, f32 LE alpha, then f32 LE arrays B[d1][d_r] and
A[d_r][d2].
"""
from __future__ import annotations

import threading
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import rng
from .binio import Reader, Writer
from .errors import AdapterMissingError, DimensionMismatchError, InvalidDimsError
from .regions import RegionId, canonicalize_region

MAGIC = b"CTLA"
VERSION = 1

DEFAULT_RANK = 16
DEFAULT_ALPHA = 16.0
DEFAULT_DROPOUT = 0.05


@dataclass(frozen=True)
class LoraAdapter:
    region: RegionId
    rank: int
    alpha: float
    B: np.ndarray  # (d1, rank)
    A: np.ndarray  # (rank, d2)
    dropout: float = DEFAULT_DROPOUT  # metadata only; inference never applies it

    @property
    def d1(self) -> int:
        return self.B.shape[0]

    @property
    def d2(self) -> int:
        return self.A.shape[1]

    @property
    def scale(self) -> float:
        return self.alpha / self.rank

    def __post_init__(self):
        if self.B.ndim != 2 or self.A.ndim != 2 or self.B.shape[1] != self.rank or self.A.shape[0] != self.rank:
            raise DimensionMismatchError(
                f"B {self.B.shape} / A {self.A.shape} inconsistent with rank {self.rank}"
            )
        if self.rank > min(self.d1, self.d2):
            raise InvalidDimsError(f"rank {self.rank} exceeds min(d1={self.d1}, d2={self.d2})")
        if self.alpha <= 0:
            raise InvalidDimsError(f"alpha must be positive, got {self.alpha}")


def lora_apply(W0: np.ndarray, ad: LoraAdapter, x: np.ndarray) -> np.ndarray:
    """Adapted forward pass: W0 x + (alpha/rank) * B (A x), without merging."""
    W0 = np.asarray(W0, dtype=np.float64)
    x = np.asarray(x, dtype=np.float64)
    if W0.shape != (ad.d1, ad.d2) or x.shape != (ad.d2,):
        raise DimensionMismatchError(
            f"W0 {W0.shape}, x {x.shape} incompatible with adapter ({ad.d1}, {ad.d2})"
        )
    return W0 @ x + ad.scale * (ad.B @ (ad.A @ x))


def lora_merge(W0: np.ndarray, ad: LoraAdapter) -> np.ndarray:
    """Fold the update into the frozen weights: W0 + (alpha/rank) * B A."""
    W0 = np.asarray(W0, dtype=np.float64)
    if W0.shape != (ad.d1, ad.d2):
        raise DimensionMismatchError(f"W0 {W0.shape} incompatible with adapter ({ad.d1}, {ad.d2})")
    return W0 + ad.scale * (ad.B @ ad.A)


def seeded_adapter(
    seed: int,
    region: RegionId,
    d1: int,
    d2: int,
    rank: int = DEFAULT_RANK,
    alpha: float = DEFAULT_ALPHA,
) -> LoraAdapter:
    """Reproducible nonzero adapter weights (f32-representable values)."""
    bit_gen = rng.bit_generator(seed)
    B = (rng.normals(bit_gen, d1 * rank) / np.sqrt(rank)).astype(np.float32)
    A = (rng.normals(bit_gen, rank * d2) / np.sqrt(d2)).astype(np.float32)
    return LoraAdapter(
        region=region,
        rank=rank,
        alpha=alpha,
        B=B.astype(np.float64).reshape(d1, rank),
        A=A.astype(np.float64).reshape(rank, d2),
    )


def save_adapter_bytes(ad: LoraAdapter) -> bytes:
    w = Writer()
    w.magic(MAGIC)
    w.u32(VERSION)
    w.utf8(ad.region.value)
    w.u32(ad.d1)
    w.u32(ad.d2)
    w.u32(ad.rank)
    w.f32(ad.alpha)
    w.f32_array(ad.B)
    w.f32_array(ad.A)
    return w.getvalue()


def save_adapter(ad: LoraAdapter, path: str | Path) -> None:
    Path(path).write_bytes(save_adapter_bytes(ad))


def load_adapter_bytes(data: bytes, source: str = "<bytes>") -> LoraAdapter:
    r = Reader(data, source=source)
    r.expect_magic(MAGIC)
    r.expect_version(VERSION)
    region = canonicalize_region(r.utf8())
    d1, d2, rank = r.u32(), r.u32(), r.u32()
    alpha = r.f32()
    if rank < 1 or rank > min(d1, d2):
        raise InvalidDimsError(f"bad CTLA rank {rank} for dims ({d1}, {d2})")
    r.expect_payload_bytes(4 * (d1 * rank + rank * d2))
    B = r.f32_array(d1, rank).astype(np.float64)
    A = r.f32_array(rank, d2).astype(np.float64)
    r.expect_eof()
    return LoraAdapter(region=region, rank=rank, alpha=alpha, B=B, A=A)


def load_adapter(path: str | Path) -> LoraAdapter:
    p = Path(path)
    return load_adapter_bytes(p.read_bytes(), source=str(p))


@dataclass
class AdapterRegistry:
    """Exactly one adapter per region plus an append-only activation trace."""

    adapters: dict[RegionId, LoraAdapter] = field(default_factory=dict)
    _activations: list[RegionId] = field(default_factory=list)
    _lock: threading.Lock = field(default_factory=threading.Lock, repr=False)

    def register(self, ad: LoraAdapter) -> None:
        self.adapters[ad.region] = ad

    def get(self, region: RegionId) -> LoraAdapter:
        """Lookup without recording an activation (for request assembly)."""
        try:
            return self.adapters[region]
        except KeyError:
            raise AdapterMissingError(f"no adapter registered for region {region}") from None

    def select(self, region: RegionId) -> LoraAdapter:
        """Lookup that records one activation event in the trace."""
        adapter = self.get(region)
        with self._lock:
            self._activations.append(region)
        return adapter

    @property
    def activations(self) -> list[RegionId]:
        with self._lock:
            return list(self._activations)

    def reset_activations(self) -> None:
        with self._lock:
            self._activations.clear()

    def missing_regions(self) -> list[RegionId]:
        return [region for region in RegionId if region not in self.adapters]

    def load_directory(self, directory: str | Path) -> int:
        count = 0
        for path in sorted(Path(directory).glob("*.ctla")):
            self.register(load_adapter(path))
            count += 1
        return count


def select_adapter(reg: AdapterRegistry, region: RegionId) -> LoraAdapter:
    return reg.select(region)


def build_default_registry(
    seed: int, d1: int, d2: int, rank: int = 4, alpha: float = DEFAULT_ALPHA
) -> AdapterRegistry:
    """A full ten-region registry with seeded weights, for tests and --mock runs."""
    registry = AdapterRegistry()
    for offset, region in enumerate(RegionId):
        registry.register(seeded_adapter(seed + offset, region, d1, d2, rank=rank, alpha=alpha))
    return registry
