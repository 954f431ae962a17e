"""Build script for the optional compiled resampling kernels.

The package works without the extension (a numpy fallback is selected at
import time), so a failed Cython build is downgraded to a warning.
"""

import sys

from setuptools import Extension, setup


def extensions():
    try:
        from Cython.Build import cythonize
    except ImportError:
        print("warning: Cython not available, building without compiled kernels",
              file=sys.stderr)
        return []
    return cythonize(
        [
            Extension(
                "proa._kernels",
                ["src/proa/_kernels.pyx"],
                extra_compile_args=["-O3"],
            )
        ],
        language_level=3,
    )


setup(ext_modules=extensions())
