import os

import numpy
from setuptools import Extension, setup

try:
    from Cython.Build import cythonize
except ImportError:  # pure-Python fallback is used at import time
    cythonize = None

extensions = []
if cythonize is not None and not os.environ.get("HIDESEEK_NO_EXT"):
    extensions = cythonize(
        [
            Extension(
                "hideseek._kernels",
                ["src/hideseek/_kernels.pyx"],
                include_dirs=[numpy.get_include()],
                # no FMA contraction, so results match the fallback bit for bit
                extra_compile_args=["-O2", "-ffp-contract=off"],
            )
        ],
        compiler_directives={"language_level": "3"},
    )

setup(ext_modules=extensions)
