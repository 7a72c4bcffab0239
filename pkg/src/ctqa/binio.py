"""Primitives for the engine's little-endian binary containers.

All four on-disk formats (feature volumes, compression weights, adapters,
exemplar stores) share the same skeleton: a 4-byte ASCII magic, a u32 LE
version, u32 LE header fields, then tightly packed f32 LE arrays and
length-prefixed UTF-8 strings. No padding anywhere; trailing bytes after the
declared payload are an error.
"""
from __future__ import annotations

import struct

import numpy as np

from .errors import (
    DimensionMismatchError,
    MagicMismatchError,
    TruncatedPayloadError,
    VersionUnsupportedError,
)

F32 = np.dtype("<f4")


class Reader:
    """Sequential decoder over an in-memory buffer."""

    def __init__(self, data: bytes, source: str = "<bytes>"):
        self._data = data
        self._pos = 0
        self.source = source

    def _take(self, n: int) -> bytes:
        if self._pos + n > len(self._data):
            raise TruncatedPayloadError(
                f"{self.source}: needed {n} more bytes at offset {self._pos}, "
                f"file has {len(self._data)}"
            )
        chunk = self._data[self._pos : self._pos + n]
        self._pos += n
        return chunk

    def expect_magic(self, magic: bytes) -> None:
        got = self._take(4)
        if got != magic:
            raise MagicMismatchError(f"{self.source}: expected magic {magic!r}, got {got!r}")

    def expect_version(self, supported: int) -> int:
        version = self.u32()
        if version != supported:
            raise VersionUnsupportedError(f"{self.source}: version {version} not supported")
        return version

    def u32(self) -> int:
        return struct.unpack("<I", self._take(4))[0]

    def f32(self) -> float:
        return struct.unpack("<f", self._take(4))[0]

    def f32_array(self, *shape: int) -> np.ndarray:
        count = int(np.prod(shape)) if shape else 0
        raw = self._take(4 * count)
        arr = np.frombuffer(raw, dtype=F32, count=count).reshape(shape)
        arr = arr.copy()
        arr.setflags(write=False)
        return arr

    def utf8(self) -> str:
        n = self.u32()
        return self._take(n).decode("utf-8")

    def remaining(self) -> int:
        return len(self._data) - self._pos

    def expect_eof(self) -> None:
        if self.remaining() != 0:
            raise DimensionMismatchError(
                f"{self.source}: {self.remaining()} trailing bytes after declared payload"
            )

    def expect_payload_bytes(self, n: int) -> None:
        """Assert the rest of the buffer is exactly the declared payload size."""
        if self.remaining() != n:
            raise DimensionMismatchError(
                f"{self.source}: header declares {n} payload bytes, file has {self.remaining()}"
            )


class Writer:
    def __init__(self) -> None:
        self._chunks: list[bytes] = []

    def magic(self, magic: bytes) -> None:
        assert len(magic) == 4
        self._chunks.append(magic)

    def u32(self, value: int) -> None:
        self._chunks.append(struct.pack("<I", value))

    def f32(self, value: float) -> None:
        self._chunks.append(struct.pack("<f", value))

    def f32_array(self, arr: np.ndarray) -> None:
        self._chunks.append(np.ascontiguousarray(arr, dtype=F32).tobytes())

    def utf8(self, text: str) -> None:
        raw = text.encode("utf-8")
        self.u32(len(raw))
        self._chunks.append(raw)

    def getvalue(self) -> bytes:
        return b"".join(self._chunks)
