"""Newline-delimited JSON model server.

Protocol (one JSON object per line):

    on connect, server sends  {"num_classes": K, "input_shape": [H, W, C]}
    request                   {"id": n, "shape": [H, W, C], "pixels": [...]}
    response                  {"id": n, "probs": [... K floats ...]}
    failure                   {"id": n, "error": "message"}

Every request gets exactly one reply carrying its id; malformed lines
get an error frame rather than a dropped connection.  Multiple clients
are served concurrently (thread per connection) with model calls
serialised by a lock.  Probabilities are rounded to f32 on the wire.
"""

from __future__ import annotations

import json
import socket
import threading
from typing import BinaryIO

import numpy as np


class WireServer:
    def __init__(self, model):
        self.model = model
        self._model_lock = threading.Lock()
        self._sock: socket.socket | None = None
        self._threads: list[threading.Thread] = []
        self._closing = threading.Event()

    # -- frame handling ------------------------------------------------

    def _handshake(self) -> bytes:
        frame = {
            "num_classes": int(self.model.num_classes),
            "input_shape": [int(v) for v in self.model.input_shape],
        }
        return (json.dumps(frame) + "\n").encode()

    def _handle_line(self, line: bytes) -> bytes:
        request_id = 0
        try:
            try:
                frame = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ValueError(f"request is not JSON: {exc}") from exc
            if not isinstance(frame, dict):
                raise ValueError("request is not a JSON object")
            request_id = int(frame.get("id", 0))
            if "shape" not in frame or "pixels" not in frame:
                raise ValueError("request missing shape/pixels")
            shape = tuple(int(v) for v in frame["shape"])
            expected = tuple(self.model.input_shape)
            if shape != expected:
                raise ValueError(
                    f"shape {list(shape)} does not match model input "
                    f"{list(expected)}"
                )
            pixels = np.asarray(frame["pixels"], dtype=np.float64)
            if pixels.size != np.prod(shape):
                raise ValueError(
                    f"{pixels.size} pixels for shape {list(shape)}"
                )
            batch = pixels.reshape((1,) + shape)
            with self._model_lock:
                probs = self.model.predict(batch)[0]
            probs32 = [float(np.float32(p)) for p in probs]
            reply = {"id": request_id, "probs": probs32}
        except Exception as exc:  # noqa: BLE001 - every failure becomes a frame
            reply = {"id": request_id, "error": str(exc)}
        return (json.dumps(reply) + "\n").encode()

    # -- transports ----------------------------------------------------

    def serve_stream(self, rfile: BinaryIO, wfile: BinaryIO) -> None:
        wfile.write(self._handshake())
        wfile.flush()
        for line in iter(rfile.readline, b""):
            if not line.strip():
                continue
            wfile.write(self._handle_line(line))
            wfile.flush()

    def _client_thread(self, conn: socket.socket) -> None:
        with conn:
            rfile = conn.makefile("rb")
            wfile = conn.makefile("wb")
            try:
                self.serve_stream(rfile, wfile)
            except (BrokenPipeError, ConnectionResetError, OSError):
                pass  # client went away; nothing to answer to

    def serve_tcp(self, host: str, port: int, ready=None) -> None:
        """Blocking accept loop; ``ready`` (if given) receives the bound
        (host, port) once listening."""
        self._sock = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
        self._sock.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
        self._sock.bind((host, port))
        self._sock.listen()
        if ready is not None:
            ready(self._sock.getsockname())
        try:
            while not self._closing.is_set():
                try:
                    conn, _ = self._sock.accept()
                except OSError:
                    break
                thread = threading.Thread(
                    target=self._client_thread, args=(conn,), daemon=True
                )
                thread.start()
                self._threads.append(thread)
        finally:
            self._sock.close()

    def shutdown(self) -> None:
        self._closing.set()
        if self._sock is not None:
            try:
                self._sock.close()
            except OSError:
                pass
