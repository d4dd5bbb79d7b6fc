"""Builds the optional Cython domination kernel.

The package works without the extension (a numpy fallback is selected at
import time); building it just makes the population-sorting inner loop
faster.  See benchmarks/bench_kernels.py for a comparison.
"""

from setuptools import Extension, setup

ext_modules = []
try:
    from Cython.Build import cythonize

    ext_modules = cythonize(
        [Extension("srsearch._native", ["src/srsearch/_native.pyx"])],
        language_level=3,
    )
except ImportError:
    pass

setup(ext_modules=ext_modules)
