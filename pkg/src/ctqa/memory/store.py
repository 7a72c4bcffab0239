"""Exemplar store: anatomy-decomposed historical reports with semantic keys.

Search is an exact brute-force cosine scan; at the corpus sizes this engine
targets (tens of thousands of records) that is milliseconds, and exactness is
what the retrieval tests pin down. Keys are kept as f32 (matching the on-disk
format) and similarity is computed in f64.

CTES layout: magic ``CTES``, u32 LE version=1, u32 LE dim, u32 LE count,
f32 LE keys[count][dim], then per record ten length-prefixed UTF-8 finding
strings followed by one length-prefixed UTF-8 report string.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ..binio import Reader, Writer
from ..errors import DimensionMismatchError, InvalidDimsError, ZeroVectorError
from .embedder import FINDINGS_PER_REPORT

logger = logging.getLogger(__name__)

MAGIC = b"CTES"
VERSION = 1


@dataclass(frozen=True)
class ExemplarRecord:
    key: np.ndarray  # (dim,) f32
    findings: tuple[str, ...]  # one per region, report order
    report: str

    def __post_init__(self):
        if len(self.findings) != FINDINGS_PER_REPORT:
            raise InvalidDimsError(
                f"exemplar needs {FINDINGS_PER_REPORT} findings, got {len(self.findings)}"
            )


@dataclass(frozen=True)
class Retrieved:
    record: ExemplarRecord
    similarity: float
    index: int  # insertion index in the store


def cosine_sim(u: np.ndarray, v: np.ndarray) -> float:
    u = np.asarray(u, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    if u.shape != v.shape:
        raise DimensionMismatchError(f"vector shapes differ: {u.shape} vs {v.shape}")
    nu = math.sqrt(float(u @ u))
    nv = math.sqrt(float(v @ v))
    if nu == 0.0 or nv == 0.0:
        raise ZeroVectorError("cosine similarity undefined for zero vectors")
    return float(u @ v) / (nu * nv)


class ExemplarStore:
    def __init__(self, dim: int):
        if dim < 1:
            raise InvalidDimsError(f"store dim must be >= 1, got {dim}")
        self.dim = dim
        self._records: list[ExemplarRecord] = []

    def __len__(self) -> int:
        return len(self._records)

    @property
    def records(self) -> list[ExemplarRecord]:
        return list(self._records)

    def add(self, key: np.ndarray, findings: list[str] | tuple[str, ...], report: str) -> None:
        key = np.asarray(key)
        if key.shape != (self.dim,):
            raise DimensionMismatchError(f"key shape {key.shape}, store dim {self.dim}")
        frozen = key.astype(np.float32)
        frozen.setflags(write=False)
        self._records.append(ExemplarRecord(key=frozen, findings=tuple(findings), report=report))

    def key_matrix(self) -> np.ndarray:
        if not self._records:
            return np.empty((0, self.dim), dtype=np.float32)
        return np.stack([r.key for r in self._records])

    def save_bytes(self) -> bytes:
        w = Writer()
        w.magic(MAGIC)
        w.u32(VERSION)
        w.u32(self.dim)
        w.u32(len(self._records))
        w.f32_array(self.key_matrix())
        for record in self._records:
            for finding in record.findings:
                w.utf8(finding)
            w.utf8(record.report)
        return w.getvalue()

    def save(self, path: str | Path) -> None:
        Path(path).write_bytes(self.save_bytes())

    @classmethod
    def load_bytes(cls, data: bytes, source: str = "<bytes>") -> "ExemplarStore":
        r = Reader(data, source=source)
        r.expect_magic(MAGIC)
        r.expect_version(VERSION)
        dim = r.u32()
        count = r.u32()
        store = cls(dim)
        keys = r.f32_array(count, dim)
        for i in range(count):
            findings = tuple(r.utf8() for _ in range(FINDINGS_PER_REPORT))
            report = r.utf8()
            store.add(keys[i], findings, report)
        r.expect_eof()
        return store

    @classmethod
    def load(cls, path: str | Path) -> "ExemplarStore":
        p = Path(path)
        return cls.load_bytes(p.read_bytes(), source=str(p))


def retrieve_topk(query_vec: np.ndarray, store: ExemplarStore, k: int) -> list[Retrieved]:
    """Exact top-k exemplars by cosine similarity, descending.

    Ties keep the lowest insertion index. Degrades instead of failing: an
    empty or undersized store returns what it has, with a warning.
    """
    query_vec = np.asarray(query_vec, dtype=np.float64)
    if len(store) == 0:
        logger.warning("exemplar store is empty; retrieval degrades to zero-shot")
        return []
    if k <= 0:
        return []
    qnorm = float(np.linalg.norm(query_vec))
    if qnorm == 0.0:
        raise ZeroVectorError("query vector is zero")
    keys = store.key_matrix().astype(np.float64)
    knorms = np.linalg.norm(keys, axis=1)
    sims = np.full(len(store), -2.0)  # below any valid cosine; zero keys rank last
    valid = knorms > 0
    sims[valid] = (keys[valid] @ query_vec) / (knorms[valid] * qnorm)
    if k > len(store):
        logger.warning("requested top-%d from a store of %d; returning all", k, len(store))
        k = len(store)
    order = np.argsort(-sims, kind="stable")[:k]
    records = store.records
    return [Retrieved(record=records[i], similarity=float(sims[i]), index=int(i)) for i in order]
