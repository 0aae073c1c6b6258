"""Build script for the optional compiled simulation core.

The package works without the extension: hopbound.sim falls back to a pure
Python engine that produces bit-identical results.  The Cython build is only
a speedup for the hot per-slot loop.
"""

from setuptools import Extension, setup

try:
    from Cython.Build import cythonize

    extensions = cythonize(
        [
            Extension(
                "hopbound.sim._core",
                ["src/hopbound/sim/_core.pyx"],
                optional=True,
            )
        ],
        compiler_directives={
            "language_level": "3",
            "boundscheck": False,
            "wraparound": False,
            "cdivision": True,
        },
    )
except ImportError:
    extensions = []

setup(ext_modules=extensions)
