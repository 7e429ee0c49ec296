"""Build the optional compiled kernels.

The package works without them: ``polarscope.kernels`` falls back to the
pure-Python implementations when ``_ckernels`` cannot be imported.
"""

import os

from setuptools import setup

ext_modules = []
if os.environ.get("POLARSCOPE_NO_EXT", "") != "1":
    try:
        import numpy as np
        from Cython.Build import cythonize
        from setuptools import Extension

        ext_modules = cythonize(
            [
                Extension(
                    "polarscope._ckernels",
                    ["src/polarscope/_ckernels.pyx"],
                    include_dirs=[np.get_include()],
                    define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
                    # no FMA contraction: results must match the Python fallback bit for bit
                    extra_compile_args=["-O3", "-ffp-contract=off"],
                )
            ],
            compiler_directives={"language_level": "3"},
        )
    except ImportError:
        ext_modules = []

setup(ext_modules=ext_modules)
