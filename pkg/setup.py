"""Build script: compiles the optional Cython compression kernels.

The package works without the extension (a numpy fallback is selected at
import time), so any build failure here should not be fatal for users who
just want the pure-Python path.
"""
import os

from setuptools import setup

ext_modules = []
if os.environ.get("CTAGENT_SKIP_CYTHON") != "1":
    try:
        import numpy as np
        from Cython.Build import cythonize
        from setuptools import Extension

        ext_modules = cythonize(
            [
                Extension(
                    "ctqa.compression._kernels_cy",
                    ["src/ctqa/compression/_kernels_cy.pyx"],
                    include_dirs=[np.get_include()],
                    define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
                )
            ],
            language_level="3",
        )
    except ImportError:
        ext_modules = []

setup(ext_modules=ext_modules)
