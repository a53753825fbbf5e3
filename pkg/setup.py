"""Build script for the compiled particle-stepping kernel.

The extension links against numpy's static distributions library so it can
draw standard normals through the same C routine the numpy Generator uses,
which keeps the compiled and pure-Python kernels bit-identical.
``-ffp-contract=off`` disables fused multiply-add so float arithmetic
matches the NumPy fallback exactly.
"""

import os

import numpy as np
from Cython.Build import cythonize
from setuptools import Extension, setup

npyrandom_dir = os.path.join(os.path.dirname(np.random.__file__), "lib")

extensions = [
    Extension(
        "mcvdsim._kernels",
        sources=["src/mcvdsim/_kernels.pyx"],
        include_dirs=[np.get_include()],
        library_dirs=[npyrandom_dir],
        libraries=["npyrandom"],
        define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
        extra_compile_args=["-O3", "-ffp-contract=off"],
    )
]

setup(ext_modules=cythonize(extensions, language_level=3))
