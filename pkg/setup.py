"""Builds the optional GMP-backed simplex core.

The package works without it (pure-Python fallback in vigilant.lp), but the
extension makes the exact LP solver roughly two orders of magnitude faster,
which the larger randomized test batteries rely on.
"""
import os

from setuptools import setup

ext_modules = []
if os.environ.get("VIGILANT_NO_EXT") != "1":
    try:
        from pybind11.setup_helpers import Pybind11Extension

        ext_modules = [
            Pybind11Extension(
                "vigilant._ratlp",
                ["src/vigilant/_ratlp.cpp"],
                libraries=["gmpxx", "gmp"],
                cxx_std=17,
            )
        ]
    except ImportError:
        pass

setup(ext_modules=ext_modules)
