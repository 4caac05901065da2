"""Build script for the optional compiled synthesis kernel.

The package works without the extension (a numpy fallback is selected at
import time), so failure to build it is not fatal for development installs.
"""

from setuptools import Extension, setup

ext_modules = []
try:
    import numpy as np
    from Cython.Build import cythonize

    ext_modules = cythonize(
        [
            Extension(
                "ddsounder._kernels._synth",
                ["src/ddsounder/_kernels/_synth.pyx"],
                include_dirs=[np.get_include()],
            )
        ],
        language_level=3,
    )
except ImportError:
    pass

setup(ext_modules=ext_modules)
