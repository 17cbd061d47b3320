"""Build the optional Cython kernel; the package also works without it."""

import numpy
from setuptools import Extension, setup

try:
    from Cython.Build import cythonize
except ImportError:  # no Cython: install the pure-Python fallback only
    ext_modules = []
else:
    ext_modules = cythonize(
        [Extension("su11._kernels", ["src/su11/_kernels.pyx"],
                   include_dirs=[numpy.get_include()], extra_compile_args=["-O3"],
                   optional=True)],
        compiler_directives={"language_level": "3"},
    )

setup(ext_modules=ext_modules)
