"""Build hook for the optional compiled kernels.

The package works without a C compiler; in that case the pure-Python
kernels are used at import time.
"""
import os

from setuptools import setup

ext_modules = []
if os.environ.get("POISEUILLE_LAB_NO_EXT", "") != "1":
    try:
        import numpy as np
        from Cython.Build import cythonize
        from setuptools import Extension

        ext_modules = cythonize(
            [
                Extension(
                    "poiseuille_lab._ckernels",
                    ["src/poiseuille_lab/_ckernels.pyx"],
                    include_dirs=[np.get_include()],
                    extra_compile_args=["-O3", "-fcx-limited-range"],
                    define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
                )
            ],
            compiler_directives={"language_level": "3"},
        )
    except ImportError:
        ext_modules = []

setup(ext_modules=ext_modules)
