import os

import numpy as np
from setuptools import Extension, setup

try:
    from Cython.Build import cythonize
except ImportError:  # sdist consumers without Cython get the pure-Python kernel
    cythonize = None

ext_modules = []
if cythonize is not None and not os.environ.get("MWDP_NO_EXTENSION"):
    ext_modules = cythonize(
        [
            Extension(
                "mwdp._kernel",
                ["src/mwdp/_kernel.pyx"],
                include_dirs=[np.get_include()],
                define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
                # no -ffast-math / FMA contraction: results must match the Python twin
                extra_compile_args=["-O3", "-ffp-contract=off"],
            )
        ],
        compiler_directives={"language_level": "3"},
    )

setup(ext_modules=ext_modules)
