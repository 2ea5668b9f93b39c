"""Build script: compiles the optional C kernel extension.

The package works without the extension (a pure-Python twin is selected at
import time), so the build is marked optional and a failed compile only
prints a warning.
"""

from setuptools import Extension, setup

try:
    from Cython.Build import cythonize
except ImportError:
    cythonize = None

if cythonize is not None:
    ext_modules = cythonize(
        [
            Extension(
                "iacq._ckernels",
                ["src/iacq/_ckernels.pyx"],
                optional=True,
            )
        ],
        language_level=3,
    )
else:
    ext_modules = []

setup(ext_modules=ext_modules)
