"""The black-box classifier boundary.

Everything downstream of this module sees classifiers purely as objects
with ``input_shape``, ``num_classes`` and ``predict_batch``; the two
concrete kinds are dense networks loaded from .nnw weight files (ReLU
between layers, softmax on the output so probabilities land in [0,1]^K)
and remote models spoken to over a newline-delimited JSON protocol:

    handshake (server -> client):  {"num_classes": K, "input_shape": [H,W,C]}
    request:   {"id": n, "shape": [H,W,C], "pixels": [f32 ...]}
    response:  {"id": n, "probs": [f32 x K]}
    error:     {"id": n, "error": "message"}

Responses are matched to requests by id, so out-of-order delivery is
tolerated.  Every probability vector entering the system is checked
against the simplex invariant (entries in [0,1], sum within 1e-4 of 1);
off-simplex outputs raise instead of being silently renormalised.
"""

from __future__ import annotations

import itertools
import json
import os
import socket
import threading
import time
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Protocol, Sequence

import numpy as np

from proa import container
from proa.perturb import ImageTensor

__all__ = [
    "ModelKind",
    "ModelDescriptor",
    "ModelError",
    "ShapeMismatchError",
    "MalformedResponseError",
    "TransportError",
    "ProtocolError",
    "RemoteModelError",
    "ensure_prob_vector",
    "BuiltinClassifier",
    "RemoteClassifier",
    "load_builtin",
    "save_builtin",
    "predict_batch",
    "resolve_model",
]

SIMPLEX_TOLERANCE = 1e-4
ENDPOINT_ENV_VAR = "PROA_ENDPOINT"


class ModelError(Exception):
    pass


class ShapeMismatchError(ModelError):
    pass


class MalformedResponseError(ModelError):
    """A probability vector failed the simplex invariant."""


class TransportError(ModelError):
    def __init__(self, message: str, attempts: int):
        super().__init__(f"{message} (after {attempts} attempt(s))")
        self.attempts = attempts


class ProtocolError(ModelError):
    """The remote endpoint violated the wire protocol."""

    def __init__(self, message: str, line: str = ""):
        detail = f"{message}: {line!r}" if line else message
        super().__init__(detail)
        self.line = line


class RemoteModelError(ModelError):
    """The remote endpoint answered a request with an error frame."""


class ModelKind(str, Enum):
    BUILTIN_LINEAR = "builtin_linear"
    BUILTIN_MLP = "builtin_mlp"
    EXTERNAL = "external"


@dataclass(frozen=True)
class ModelDescriptor:
    kind: ModelKind
    source: str
    num_classes: int
    input_shape: tuple[int, int, int]


class Classifier(Protocol):
    descriptor: ModelDescriptor

    @property
    def input_shape(self) -> tuple[int, int, int]: ...

    @property
    def num_classes(self) -> int: ...

    def predict_batch(self, images: Sequence[ImageTensor]) -> list[np.ndarray]: ...


def ensure_prob_vector(values, num_classes: int) -> np.ndarray:
    """Validate and return one probability vector as float64."""
    probs = np.asarray(values, dtype=np.float64)
    if probs.shape != (num_classes,):
        raise MalformedResponseError(
            f"expected {num_classes} probabilities, got shape {probs.shape}"
        )
    if not np.isfinite(probs).all():
        raise MalformedResponseError("probabilities contain non-finite values")
    if probs.min() < 0.0 or probs.max() > 1.0:
        raise MalformedResponseError(
            f"probabilities outside [0, 1]: min {probs.min()}, max {probs.max()}"
        )
    total = float(probs.sum())
    if abs(total - 1.0) > SIMPLEX_TOLERANCE:
        raise MalformedResponseError(
            f"probabilities sum to {total}, outside 1 +- {SIMPLEX_TOLERANCE}"
        )
    return probs


def _softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=1, keepdims=True)
    exp = np.exp(shifted)
    return exp / exp.sum(axis=1, keepdims=True)


class BuiltinClassifier:
    """Dense ReLU network with a softmax head, loaded from a .nnw file."""

    def __init__(
        self,
        input_shape: tuple[int, int, int],
        layers: list[container.LayerWeights],
        source: str = "<memory>",
    ):
        if layers[-1].weights.shape[0] < 2:
            raise ModelError("final layer must produce at least 2 classes")
        self._weights = [np.asarray(l.weights, dtype=np.float64) for l in layers]
        self._biases = [np.asarray(l.bias, dtype=np.float64) for l in layers]
        kind = ModelKind.BUILTIN_LINEAR if len(layers) == 1 else ModelKind.BUILTIN_MLP
        self.descriptor = ModelDescriptor(
            kind=kind,
            source=source,
            num_classes=int(layers[-1].weights.shape[0]),
            input_shape=tuple(input_shape),
        )

    @property
    def input_shape(self) -> tuple[int, int, int]:
        return self.descriptor.input_shape

    @property
    def num_classes(self) -> int:
        return self.descriptor.num_classes

    @property
    def layer_shapes(self) -> list[tuple[int, int]]:
        return [w.shape for w in self._weights]

    def predict_batch(self, images: Sequence[ImageTensor]) -> list[np.ndarray]:
        if not images:
            return []
        x = np.stack([img.data.reshape(-1) for img in images])
        last = len(self._weights) - 1
        for i, (w, b) in enumerate(zip(self._weights, self._biases)):
            x = x @ w.T + b
            if i < last:
                np.maximum(x, 0.0, out=x)
        probs = _softmax(x)
        return list(probs)


def load_builtin(path: str | Path) -> BuiltinClassifier:
    input_shape, layers = container.load_nnw(path)
    return BuiltinClassifier(input_shape, layers, source=str(path))


def save_builtin(
    path: str | Path,
    input_shape: tuple[int, int, int],
    layers: list[tuple[np.ndarray, np.ndarray]],
) -> None:
    container.save_nnw(path, input_shape, layers)


class RemoteClassifier:
    """Client side of the wire protocol over a TCP stream.

    One connection is shared; predict_batch serialises callers with a
    lock so responses can never be cross-delivered between threads.
    """

    def __init__(self, endpoint: str, timeout: float = 30.0, connect_attempts: int = 3):
        self._endpoint = endpoint
        self._timeout = timeout
        host, port = _parse_endpoint(endpoint)
        last_error: Exception | None = None
        for attempt in range(1, connect_attempts + 1):
            try:
                self._sock = socket.create_connection((host, port), timeout=timeout)
                break
            except OSError as exc:
                last_error = exc
                if attempt < connect_attempts:
                    time.sleep(0.2 * attempt)
        else:
            raise TransportError(
                f"cannot connect to {endpoint}: {last_error}", connect_attempts
            )
        self._rfile = self._sock.makefile("rb")
        self._lock = threading.Lock()
        self._ids = itertools.count()
        handshake = self._read_json(time.monotonic() + timeout)
        try:
            num_classes = int(handshake["num_classes"])
            shape = tuple(int(v) for v in handshake["input_shape"])
        except (KeyError, TypeError, ValueError) as exc:
            raise ProtocolError(f"bad handshake ({exc})", json.dumps(handshake)) from exc
        if len(shape) != 3:
            raise ProtocolError("handshake input_shape must have 3 entries",
                                json.dumps(handshake))
        self.descriptor = ModelDescriptor(
            kind=ModelKind.EXTERNAL,
            source=endpoint,
            num_classes=num_classes,
            input_shape=shape,  # type: ignore[arg-type]
        )

    @property
    def input_shape(self) -> tuple[int, int, int]:
        return self.descriptor.input_shape

    @property
    def num_classes(self) -> int:
        return self.descriptor.num_classes

    def close(self) -> None:
        try:
            self._rfile.close()
        finally:
            self._sock.close()

    def _read_json(self, deadline: float) -> dict:
        remaining = deadline - time.monotonic()
        if remaining <= 0:
            raise TransportError(
                f"batch timed out after {self._timeout}s waiting for {self._endpoint}", 1
            )
        self._sock.settimeout(remaining)
        try:
            line = self._rfile.readline()
        except (socket.timeout, TimeoutError):
            raise TransportError(
                f"batch timed out after {self._timeout}s waiting for {self._endpoint}", 1
            ) from None
        if not line:
            raise TransportError(f"connection to {self._endpoint} closed", 1)
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            raise ProtocolError(f"response is not JSON ({exc})",
                                line.decode("utf-8", "replace").strip()) from exc
        if not isinstance(obj, dict):
            raise ProtocolError("response is not a JSON object",
                                line.decode("utf-8", "replace").strip())
        return obj

    def predict_batch(self, images: Sequence[ImageTensor]) -> list[np.ndarray]:
        if not images:
            return []
        with self._lock:
            deadline = time.monotonic() + self._timeout
            pending: dict[int, int] = {}
            chunks = []
            for slot, img in enumerate(images):
                rid = next(self._ids)
                pending[rid] = slot
                pixels = np.ascontiguousarray(img.data, dtype=np.float32)
                chunks.append(json.dumps({
                    "id": rid,
                    "shape": list(img.shape),
                    "pixels": [float(v) for v in pixels.reshape(-1)],
                }) + "\n")
            self._sock.sendall("".join(chunks).encode("utf-8"))

            results: list[np.ndarray | None] = [None] * len(images)
            while pending:
                obj = self._read_json(deadline)
                if "error" in obj:
                    raise RemoteModelError(
                        f"request {obj.get('id')} failed: {obj['error']}"
                    )
                if "id" not in obj or "probs" not in obj:
                    raise ProtocolError("response missing id/probs", json.dumps(obj))
                rid = obj["id"]
                if rid not in pending:
                    raise ProtocolError(f"response id {rid} matches no pending request",
                                        json.dumps(obj))
                results[pending.pop(rid)] = ensure_prob_vector(
                    obj["probs"], self.num_classes
                )
            return results  # type: ignore[return-value]


def _parse_endpoint(endpoint: str) -> tuple[str, int]:
    addr = endpoint.removeprefix("tcp://")
    host, sep, port = addr.rpartition(":")
    if not sep or not host:
        raise ValueError(f"endpoint must be host:port, got {endpoint!r}")
    return host, int(port)


def predict_batch(
    model: Classifier, images: Sequence[ImageTensor]
) -> list[np.ndarray]:
    """Batched prediction with shape and simplex checks on both sides."""
    expected = tuple(model.input_shape)
    for img in images:
        if img.shape != expected:
            raise ShapeMismatchError(
                f"image shape {img.shape} does not match model input {expected}"
            )
    outputs = model.predict_batch(images)
    if len(outputs) != len(images):
        raise ModelError(
            f"model returned {len(outputs)} outputs for {len(images)} images"
        )
    stacked = np.asarray(outputs, dtype=np.float64)
    if (
        stacked.shape == (len(images), model.num_classes)
        and np.isfinite(stacked).all()
        and stacked.min(initial=0.0) >= 0.0
        and stacked.max(initial=1.0) <= 1.0
        and np.abs(stacked.sum(axis=1) - 1.0).max(initial=0.0) <= SIMPLEX_TOLERANCE
    ):
        return list(stacked)
    # something is off: redo row by row for a precise error
    return [ensure_prob_vector(p, model.num_classes) for p in outputs]


def resolve_model(source: str | None, timeout: float = 30.0):
    """Build a classifier from a .nnw path or host:port endpoint.

    The PROA_ENDPOINT environment variable, when set, overrides the
    source and forces the external path.
    """
    endpoint = os.environ.get(ENDPOINT_ENV_VAR)
    if endpoint:
        return RemoteClassifier(endpoint, timeout=timeout)
    if not source:
        raise ModelError(
            f"no model given: pass --model or set {ENDPOINT_ENV_VAR}"
        )
    if source.startswith("tcp://") or (
        ":" in source and not Path(source).exists()
    ):
        return RemoteClassifier(source, timeout=timeout)
    return load_builtin(source)
