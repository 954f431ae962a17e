"""Model loading for the shim: .nnw weight files or user python modules.

The .nnw reader here is written against the published byte layout and
shares no code with the certification engine, so the cross-boundary
parity test really compares two implementations:

    magic "NNWF" | version u8 | H u32 | W u32 | C u32 | layer count u8
    | per layer: rows u32, cols u32, f32 weights row-major, f32 bias
    | crc32 u32 over every preceding byte        (all little-endian)

A user module must expose ``predict(pixels) -> probabilities`` for a
(batch, H, W, C) float array, plus ``num_classes`` and ``input_shape``.
"""

from __future__ import annotations

import importlib.util
import struct
import zlib
from pathlib import Path

import numpy as np

NNW_MAGIC = b"NNWF"


class ModelLoadError(Exception):
    pass


class DenseNetwork:
    """ReLU stack with a softmax head, mirroring the engine's builtin."""

    def __init__(self, input_shape, layers):
        self.input_shape = tuple(input_shape)
        self.num_classes = layers[-1][0].shape[0]
        self._layers = [
            (np.asarray(w, dtype=np.float64), np.asarray(b, dtype=np.float64))
            for w, b in layers
        ]

    def predict(self, pixels: np.ndarray) -> np.ndarray:
        x = np.asarray(pixels, dtype=np.float64).reshape(len(pixels), -1)
        for i, (w, b) in enumerate(self._layers):
            x = x @ w.T + b
            if i < len(self._layers) - 1:
                x = np.maximum(x, 0.0)
        x -= x.max(axis=1, keepdims=True)
        np.exp(x, out=x)
        x /= x.sum(axis=1, keepdims=True)
        return x


def load_nnw(path: str | Path) -> DenseNetwork:
    blob = Path(path).read_bytes()
    if len(blob) < 22:
        raise ModelLoadError(f"{path}: file too short ({len(blob)} bytes)")
    if blob[:4] != NNW_MAGIC:
        raise ModelLoadError(f"{path}: bad magic {blob[:4]!r}")
    stored_crc = struct.unpack("<I", blob[-4:])[0]
    if zlib.crc32(blob[:-4]) & 0xFFFFFFFF != stored_crc:
        raise ModelLoadError(f"{path}: checksum mismatch")

    version, h, w, c, n_layers = struct.unpack_from("<BIIIB", blob, 4)
    if version != 1:
        raise ModelLoadError(f"{path}: unsupported version {version}")
    offset = 4 + 14
    layers = []
    fan_in = h * w * c
    for i in range(n_layers):
        try:
            rows, cols = struct.unpack_from("<II", blob, offset)
        except struct.error as exc:
            raise ModelLoadError(f"{path}: truncated at layer {i}") from exc
        offset += 8
        if cols != fan_in:
            raise ModelLoadError(
                f"{path}: layer {i} wants {cols} inputs, have {fan_in}"
            )
        need = 4 * rows * (cols + 1)
        if offset + need > len(blob) - 4:
            raise ModelLoadError(f"{path}: truncated at layer {i} payload")
        weights = np.frombuffer(blob, dtype="<f4", count=rows * cols,
                                offset=offset).reshape(rows, cols)
        offset += 4 * rows * cols
        bias = np.frombuffer(blob, dtype="<f4", count=rows, offset=offset)
        offset += 4 * rows
        layers.append((weights, bias))
        fan_in = rows
    if offset != len(blob) - 4:
        raise ModelLoadError(f"{path}: {len(blob) - 4 - offset} stray bytes")
    return DenseNetwork((h, w, c), layers)


class UserModel:
    """Adapter around a user-supplied python module."""

    def __init__(self, module):
        for attr in ("predict", "num_classes", "input_shape"):
            if not hasattr(module, attr):
                raise ModelLoadError(
                    f"user module {module.__name__} lacks {attr!r}"
                )
        self.input_shape = tuple(int(v) for v in module.input_shape)
        self.num_classes = int(module.num_classes)
        self._predict = module.predict

    def predict(self, pixels: np.ndarray) -> np.ndarray:
        return np.asarray(self._predict(pixels), dtype=np.float64)


def load_user_module(path: str | Path) -> UserModel:
    path = Path(path)
    spec = importlib.util.spec_from_file_location(path.stem, path)
    if spec is None or spec.loader is None:
        raise ModelLoadError(f"cannot import user module {path}")
    module = importlib.util.module_from_spec(spec)
    try:
        spec.loader.exec_module(module)
    except Exception as exc:
        raise ModelLoadError(f"user module {path} failed to load: {exc}") from exc
    return UserModel(module)


def load_model(path: str | Path):
    path = Path(path)
    if path.suffix == ".py":
        return load_user_module(path)
    return load_nnw(path)
