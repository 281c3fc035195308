"""Build script for the compiled simplex kernel.

The package works without the extension (a numpy fallback is selected at
import time), so a failed compile only costs speed.  `python setup.py
build_ext --inplace` rebuilds the kernel during development.
"""
import os

import numpy
from setuptools import Extension, setup

try:
    from Cython.Build import cythonize
except ImportError:
    cythonize = None

extensions = []
if cythonize is not None and os.path.exists("src/ucopt/_kernels/simplex_cy.pyx"):
    extensions = cythonize(
        [
            Extension(
                "ucopt._kernels.simplex_cy",
                ["src/ucopt/_kernels/simplex_cy.pyx"],
                include_dirs=[numpy.get_include()],
                define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
                extra_compile_args=["-O3"],
            )
        ],
        compiler_directives={"language_level": 3},
    )

setup(ext_modules=extensions)
