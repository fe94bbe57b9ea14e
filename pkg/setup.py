"""Builds the optional compiled closed-loop kernel.

The extension is a speed-up only: if Cython or a C compiler is missing the
package installs anyway and falls back to the pure-numpy kernel at import.
Build in place with ``python setup.py build_ext --inplace``.
"""

import sys

from setuptools import setup

ext_modules = []
try:
    import numpy as np
    from Cython.Build import cythonize
    from setuptools import Extension

    ext_modules = cythonize(
        [
            Extension(
                "dmckit._loop_cy",
                ["src/dmckit/_loop_cy.pyx"],
                include_dirs=[np.get_include()],
                define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
            )
        ],
        language_level=3,
    )
except Exception as exc:  # noqa: BLE001 - any build-chain gap means "no extension"
    print(f"dmckit: compiled kernel skipped ({exc}); pure-python fallback will be used",
          file=sys.stderr)

setup(ext_modules=ext_modules)
