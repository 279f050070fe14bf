"""Build script for the optional compiled IPFP kernel.

The package works without the extension (a numpy fallback is selected at
import time), so a failed build is not fatal for development installs;
run ``pip install -e . --no-build-isolation`` to compile it.
"""

import numpy
from Cython.Build import cythonize
from setuptools import Extension, setup

extensions = [
    Extension(
        "affinity._kernels._core",
        ["src/affinity/_kernels/_core.pyx"],
        include_dirs=[numpy.get_include()],
        extra_compile_args=["-O3", "-funroll-loops"],
        define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
    )
]

setup(ext_modules=cythonize(extensions, language_level="3"))
