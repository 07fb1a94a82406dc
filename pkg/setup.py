import sys

from setuptools import setup, Extension

# The compiled quadrature kernel is optional: if Cython (or a C compiler) is
# unavailable the package falls back to the pure-numpy kernels at import time.
ext_modules = []
try:
    from Cython.Build import cythonize
    import numpy as np

    ext_modules = cythonize(
        [
            Extension(
                "minkray._kernels_cy",
                ["src/minkray/_kernels_cy.pyx"],
                include_dirs=[np.get_include()],
                extra_compile_args=["-O3"],
                define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
            )
        ],
        language_level="3",
    )
except Exception as exc:  # pragma: no cover
    sys.stderr.write(f"building without compiled kernels: {exc}\n")

setup(ext_modules=ext_modules)
