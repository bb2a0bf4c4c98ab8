"""Build script for the optional compiled kernel core.

Usage:
    pip install cython                              # one-time
    python setup_cython.py build_ext --inplace      # compile

The package works without this step (a numpy fallback is selected at
import); compiling speeds up the separable blur and SLIC assignment loops.
Verify with:
    python -c "from revex._kernels import BACKEND; print(BACKEND)"
"""

import numpy as np
from Cython.Build import cythonize
from setuptools import Extension, setup

extensions = [
    Extension(
        name="revex._kernels._core",
        sources=["src/revex/_kernels/_core.pyx"],
        include_dirs=[np.get_include()],
        define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
        extra_compile_args=["-O3"],
    ),
]

setup(
    name="revex-kernels",
    ext_modules=cythonize(extensions, compiler_directives={"language_level": "3"}),
    package_dir={"": "src"},
    packages=["revex._kernels"],
)
