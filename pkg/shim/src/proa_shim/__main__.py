"""Serve a model over the wire protocol.

    proa-shim --model weights.nnw --listen 127.0.0.1:9000
    proa-shim --model custom.py --stdio
"""

from __future__ import annotations

import argparse
import sys

from proa_shim.model import ModelLoadError, load_model
from proa_shim.server import WireServer


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(prog="proa-shim", description=__doc__)
    parser.add_argument("--model", required=True,
                        help=".nnw weight file or .py module with predict()")
    transport = parser.add_mutually_exclusive_group(required=True)
    transport.add_argument("--listen", metavar="HOST:PORT",
                           help="serve over TCP")
    transport.add_argument("--stdio", action="store_true",
                           help="serve over stdin/stdout")
    args = parser.parse_args(argv)

    try:
        model = load_model(args.model)
    except ModelLoadError as exc:
        print(f"cannot load model: {exc}", file=sys.stderr)
        return 1

    server = WireServer(model)
    if args.stdio:
        server.serve_stream(sys.stdin.buffer, sys.stdout.buffer)
        return 0
    host, _, port = args.listen.rpartition(":")
    if not host:
        print(f"--listen expects HOST:PORT, got {args.listen!r}", file=sys.stderr)
        return 1

    def announce(addr):
        print(f"serving {args.model} on {addr[0]}:{addr[1]}", file=sys.stderr)

    try:
        server.serve_tcp(host, int(port), ready=announce)
    except KeyboardInterrupt:
        server.shutdown()
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
