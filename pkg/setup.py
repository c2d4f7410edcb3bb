"""Builds the optional compiled kernels; the package falls back to pure Python without them."""

import os

from setuptools import Extension, setup

ext_modules = []
if os.environ.get("GRAPHCBR_NO_EXT") != "1":
    try:
        from Cython.Build import cythonize
    except ImportError:
        cythonize = None
    if cythonize is not None:
        ext = Extension(
            "graphcbr._ckernels",
            ["src/graphcbr/_ckernels.pyx"],
            # Keep a*b+c unfused so results match the pure-Python kernels bit for bit.
            extra_compile_args=["-O3", "-ffp-contract=off"],
        )
        ext_modules = cythonize([ext], language_level="3")

setup(ext_modules=ext_modules)
