"""Little-endian binary containers for weights (.nnw) and images (.imt).

Both formats share the same skeleton so they can be parsed from any
language with nothing but a struct reader:

  .nnw   magic "NNWF" | version u8 | H u32 | W u32 | C u32 | layers u8
         | per layer: rows u32, cols u32, f32 weights (row-major), f32 bias
         | crc32 u32 of every preceding byte

  .imt   magic "IMTF" | version u8 | H u32 | W u32 | C u32
         | f32 pixels (row-major) | crc32 u32 of every preceding byte

Parse failures raise ContainerFormatError with the byte offset and the
section that was being read; checksum mismatches raise ChecksumError.
"""

from __future__ import annotations

import struct
import zlib
from dataclasses import dataclass
from pathlib import Path

import numpy as np

NNW_MAGIC = b"NNWF"
IMT_MAGIC = b"IMTF"
VERSION = 1


class ContainerFormatError(ValueError):
    """Malformed container; carries the byte offset of the failure."""

    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} (at byte {offset})")
        self.offset = offset


class ChecksumError(ContainerFormatError):
    pass


@dataclass(frozen=True)
class LayerWeights:
    """One dense layer: y = weights @ x + bias."""

    weights: np.ndarray  # (rows, cols) float32
    bias: np.ndarray  # (rows,) float32


class _Reader:
    def __init__(self, blob: bytes, label: str):
        self.blob = blob
        self.offset = 0
        self.label = label

    def take(self, count: int, section: str) -> bytes:
        if self.offset + count > len(self.blob):
            raise ContainerFormatError(
                f"{self.label}: truncated while reading {section}", self.offset
            )
        piece = self.blob[self.offset : self.offset + count]
        self.offset += count
        return piece

    def u8(self, section: str) -> int:
        return self.take(1, section)[0]

    def u32(self, section: str) -> int:
        return struct.unpack("<I", self.take(4, section))[0]

    def f32_array(self, count: int, section: str) -> np.ndarray:
        raw = self.take(4 * count, section)
        return np.frombuffer(raw, dtype="<f4").copy()


def _check_crc(reader: _Reader) -> None:
    body_end = reader.offset
    stored = reader.u32("checksum")
    actual = zlib.crc32(reader.blob[:body_end]) & 0xFFFFFFFF
    if stored != actual:
        raise ChecksumError(
            f"{reader.label}: checksum mismatch "
            f"(stored {stored:#010x}, computed {actual:#010x})",
            body_end,
        )
    if reader.offset != len(reader.blob):
        raise ContainerFormatError(
            f"{reader.label}: {len(reader.blob) - reader.offset} trailing bytes",
            reader.offset,
        )


def _check_header(reader: _Reader, magic: bytes) -> tuple[int, int, int]:
    got = reader.take(len(magic), "magic")
    if got != magic:
        raise ContainerFormatError(
            f"{reader.label}: bad magic {got!r}, expected {magic!r}", 0
        )
    version = reader.u8("version")
    if version != VERSION:
        raise ContainerFormatError(
            f"{reader.label}: unsupported version {version}", reader.offset - 1
        )
    h = reader.u32("height")
    w = reader.u32("width")
    c = reader.u32("channels")
    return h, w, c


def save_nnw(
    path: str | Path,
    input_shape: tuple[int, int, int],
    layers: list[LayerWeights] | list[tuple[np.ndarray, np.ndarray]],
) -> None:
    h, w, c = input_shape
    parts = [NNW_MAGIC, struct.pack("<BIII", VERSION, h, w, c)]
    norm: list[LayerWeights] = [
        layer if isinstance(layer, LayerWeights) else LayerWeights(*layer)
        for layer in layers
    ]
    parts.append(struct.pack("<B", len(norm)))
    for layer in norm:
        weights = np.ascontiguousarray(layer.weights, dtype="<f4")
        bias = np.ascontiguousarray(layer.bias, dtype="<f4")
        rows, cols = weights.shape
        if bias.shape != (rows,):
            raise ValueError(f"bias shape {bias.shape} does not match {rows} rows")
        parts.append(struct.pack("<II", rows, cols))
        parts.append(weights.tobytes())
        parts.append(bias.tobytes())
    body = b"".join(parts)
    Path(path).write_bytes(body + struct.pack("<I", zlib.crc32(body) & 0xFFFFFFFF))


def load_nnw(path: str | Path) -> tuple[tuple[int, int, int], list[LayerWeights]]:
    reader = _Reader(Path(path).read_bytes(), str(path))
    h, w, c = _check_header(reader, NNW_MAGIC)
    n_layers = reader.u8("layer count")
    if n_layers < 1:
        raise ContainerFormatError(
            f"{reader.label}: weight file declares no layers", reader.offset - 1
        )
    layers = []
    expected_cols = h * w * c
    for i in range(n_layers):
        rows = reader.u32(f"layer {i} rows")
        cols = reader.u32(f"layer {i} cols")
        if rows < 1 or cols < 1:
            raise ContainerFormatError(
                f"{reader.label}: layer {i} has empty shape {rows}x{cols}",
                reader.offset - 8,
            )
        if cols != expected_cols:
            raise ContainerFormatError(
                f"{reader.label}: layer {i} expects {cols} inputs, "
                f"previous stage provides {expected_cols}",
                reader.offset - 4,
            )
        weights = reader.f32_array(rows * cols, f"layer {i} weights")
        bias = reader.f32_array(rows, f"layer {i} bias")
        layers.append(LayerWeights(weights.reshape(rows, cols), bias))
        expected_cols = rows
    _check_crc(reader)
    return (h, w, c), layers


def save_imt(path: str | Path, pixels: np.ndarray) -> None:
    arr = np.ascontiguousarray(pixels, dtype="<f4")
    if arr.ndim != 3:
        raise ValueError(f"image must be H x W x C, got shape {arr.shape}")
    h, w, c = arr.shape
    body = IMT_MAGIC + struct.pack("<BIII", VERSION, h, w, c) + arr.tobytes()
    Path(path).write_bytes(body + struct.pack("<I", zlib.crc32(body) & 0xFFFFFFFF))


def load_imt(path: str | Path) -> np.ndarray:
    reader = _Reader(Path(path).read_bytes(), str(path))
    h, w, c = _check_header(reader, IMT_MAGIC)
    if h < 1 or w < 1 or c < 1:
        raise ContainerFormatError(
            f"{reader.label}: empty image {h}x{w}x{c}", reader.offset - 12
        )
    pixels = reader.f32_array(h * w * c, "pixels").reshape(h, w, c)
    _check_crc(reader)
    return pixels
