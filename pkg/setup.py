import os

import numpy as np
from setuptools import Extension, setup

try:
    from Cython.Build import cythonize
except ImportError:  # fall back to the pure-Python kernel
    cythonize = None

ext_modules = []
if cythonize is not None and not os.environ.get("ADAPTQUAD_NO_EXT"):
    ext_modules = cythonize(
        [
            Extension(
                "adaptquad._accum",
                [os.path.join("src", "adaptquad", "_accum.pyx")],
                include_dirs=[np.get_include()],
                # no fused multiply-add: both backends must round identically
                extra_compile_args=["-O3", "-ffp-contract=off"],
            )
        ],
        language_level=3,
    )

setup(ext_modules=ext_modules)
