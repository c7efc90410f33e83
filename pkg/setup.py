import os

import numpy as np
from setuptools import Extension, setup

try:
    from Cython.Build import cythonize
except ImportError:
    cythonize = None

ext_modules = []
if cythonize is not None and os.environ.get("GIBBSLAB_NO_EXT") != "1":
    ext_modules = cythonize(
        [
            Extension(
                "gibbslab._kernels",
                ["src/gibbslab/_kernels.pyx"],
                include_dirs=[np.get_include()],
            )
        ],
        compiler_directives={"language_level": 3},
    )

setup(ext_modules=ext_modules)
