"""Build script for the compiled inner-loop kernels.

The extension is optional: if Cython (or a C compiler) is unavailable the
package installs without it and falls back to the pure-Python kernels in
``sgdtail._kernels.pyloop`` at import time.

``-ffp-contract=off`` keeps the compiled kernels bit-identical to the
pure-Python fallback (no fused multiply-adds reordering the IEEE ops).
"""

from setuptools import Extension, setup

try:
    import numpy
    from Cython.Build import cythonize

    extensions = cythonize(
        [
            Extension(
                "sgdtail._kernels._fastloop",
                ["src/sgdtail/_kernels/_fastloop.pyx"],
                include_dirs=[numpy.get_include()],
                extra_compile_args=["-O3", "-ffp-contract=off"],
                define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
            )
        ],
        language_level=3,
    )
except ImportError:
    extensions = []

setup(ext_modules=extensions)
