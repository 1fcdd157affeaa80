"""Build script for the optional compiled kernels.

The package is pure Python plus one Cython extension holding the hot
numerical kernels (row softmax, layer norm, GELU).  If the extension cannot
be built, install with DIALEMO_SKIP_EXT=1 and the numpy fallback is used.
"""

import os

from setuptools import setup

ext_modules = []
if not os.environ.get("DIALEMO_SKIP_EXT"):
    import numpy as np
    from Cython.Build import cythonize
    from setuptools import Extension

    ext_modules = cythonize(
        [
            Extension(
                "dialemo.model._kernels",
                ["src/dialemo/model/_kernels.pyx"],
                include_dirs=[np.get_include()],
                extra_compile_args=["-O3"],
                define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
            )
        ],
        compiler_directives={"language_level": "3"},
    )

setup(ext_modules=ext_modules)
