"""Test helpers: hand-rolled .nnw bytes and a tiny line-protocol client."""

from __future__ import annotations

import json
import socket
import struct
import threading
import zlib

import numpy as np


def make_nnw_bytes(input_shape, layers) -> bytes:
    h, w, c = input_shape
    body = b"NNWF" + struct.pack("<BIIIB", 1, h, w, c, len(layers))
    for weights, bias in layers:
        weights = np.ascontiguousarray(weights, dtype="<f4")
        bias = np.ascontiguousarray(bias, dtype="<f4")
        body += struct.pack("<II", *weights.shape)
        body += weights.tobytes() + bias.tobytes()
    return body + struct.pack("<I", zlib.crc32(body) & 0xFFFFFFFF)


def start_server(model):
    from proa_shim.server import WireServer

    server = WireServer(model)
    bound = {}
    event = threading.Event()

    def ready(addr):
        bound["addr"] = addr
        event.set()

    thread = threading.Thread(
        target=server.serve_tcp, args=("127.0.0.1", 0), kwargs={"ready": ready},
        daemon=True,
    )
    thread.start()
    assert event.wait(5.0), "server did not come up"
    return server, f"127.0.0.1:{bound['addr'][1]}"


class LineClient:
    """Minimal protocol client used to probe the server directly."""

    def __init__(self, endpoint: str, timeout: float = 10.0):
        host, _, port = endpoint.rpartition(":")
        self.sock = socket.create_connection((host, int(port)), timeout=timeout)
        self.rfile = self.sock.makefile("rb")
        self.handshake = self.recv()

    def send(self, frame: dict) -> None:
        self.sock.sendall((json.dumps(frame) + "\n").encode())

    def send_raw(self, payload: bytes) -> None:
        self.sock.sendall(payload)

    def recv(self) -> dict:
        line = self.rfile.readline()
        if not line:
            raise ConnectionError("server closed the stream")
        return json.loads(line)

    def close(self) -> None:
        self.rfile.close()
        self.sock.close()
