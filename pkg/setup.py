"""Build the optional Cython raster kernel.

The package works without it; ``synthbuild.render.kernel`` falls back to the
numpy implementation when the extension is missing.
"""
import os

import numpy as np
from setuptools import Extension, setup

try:
    from Cython.Build import cythonize
except ImportError:  # pragma: no cover
    cythonize = None

ext_modules = []
if cythonize is not None and not os.environ.get("SYNTHBUILD_NO_EXT"):
    ext_modules = cythonize(
        [
            Extension(
                "synthbuild.render._kernel_ext",
                ["src/synthbuild/render/_kernel_ext.pyx"],
                include_dirs=[np.get_include()],
                # keep a*b+c as two roundings so the numpy fallback matches bit for bit
                extra_compile_args=["-O2", "-ffp-contract=off", "-fno-fast-math"],
            )
        ],
        compiler_directives={"language_level": "3"},
    )

setup(ext_modules=ext_modules)
