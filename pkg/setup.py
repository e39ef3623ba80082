"""Build hook for the optional compiled kernels.

If Cython or a C compiler is missing the package still installs and the
numpy fallback in ``ewod.la._fallback`` is used at import time.
"""

from setuptools import setup

ext_modules = []
try:
    import numpy as np
    from Cython.Build import cythonize
    from setuptools import Extension

    ext_modules = cythonize(
        [
            Extension(
                "ewod.la._kernels",
                ["src/ewod/la/_kernels.pyx"],
                include_dirs=[np.get_include()],
                extra_compile_args=["-O3"],
            )
        ],
        compiler_directives={"language_level": "3"},
    )
except ImportError:
    pass

setup(ext_modules=ext_modules)
