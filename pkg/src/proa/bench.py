"""Benchmark the compiled kernels against the numpy fallback.

Run with ``python -m proa.bench [--sizes 32,64,128] [--repeats 30]``.
Reports per-call time for each kernel and backend plus the speedup of
the compiled path when it is available.
"""

from __future__ import annotations

import argparse
import math
import time

import numpy as np

from proa.kernels import numpy_backend
from proa.perturb import gaussian_kernel_1d, params_to_affine


def _backends():
    found = [("numpy", numpy_backend)]
    try:
        from proa import _kernels

        found.append(("cython", _kernels))
    except ImportError:
        pass
    return found


def _time(fn, repeats: int) -> float:
    fn()  # warm up
    start = time.perf_counter()
    for _ in range(repeats):
        fn()
    return (time.perf_counter() - start) / repeats


def run(sizes: list[int], repeats: int) -> None:
    backends = _backends()
    if len(backends) == 1:
        print("compiled kernels not built; benchmarking numpy backend only")
    rng = np.random.default_rng(7)
    matrix = params_to_affine(theta_r=math.radians(20.0), theta_s=1.1)
    kernel = gaussian_kernel_1d(4.0)

    header = f"{'kernel':<16}{'size':>6}" + "".join(
        f"{name:>14}" for name, _ in backends
    )
    if len(backends) == 2:
        header += f"{'speedup':>10}"
    print(header)

    for size in sizes:
        img = rng.random((size, size, 3))
        idx = np.array(
            [
                [matrix[0, 0], matrix[0, 1], 0.0],
                [matrix[1, 0], matrix[1, 1], 0.0],
            ]
        )
        cases = [
            ("affine_warp", lambda be, im=img: be.affine_warp(im, idx)),
            ("separable_blur", lambda be, im=img: be.separable_blur(im, kernel)),
            ("rgb_to_hsb", lambda be, im=img: be.rgb_to_hsb(im)),
            (
                "hsb_to_rgb",
                lambda be, im=numpy_backend.rgb_to_hsb(img): be.hsb_to_rgb(im),
            ),
        ]
        for name, call in cases:
            times = [
                _time(lambda be=be: call(be), repeats) for _, be in backends
            ]
            row = f"{name:<16}{size:>6}" + "".join(
                f"{t * 1e6:>12.1f}us" for t in times
            )
            if len(times) == 2:
                row += f"{times[0] / times[1]:>9.2f}x"
            print(row)


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--sizes", default="32,64,128")
    parser.add_argument("--repeats", type=int, default=30)
    args = parser.parse_args(argv)
    run([int(s) for s in args.sizes.split(",")], args.repeats)
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
