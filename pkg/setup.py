"""Build script for the optional compiled kernel backend.

The package works without the extension: volcast.backends falls back to the
NumPy implementation when ``volcast.backends._cykernels`` is missing.  Set
VOLCAST_NO_EXT=1 to skip the extension build entirely.
"""

import os

from setuptools import Extension, setup


def _extensions():
    if os.environ.get("VOLCAST_NO_EXT"):
        return []
    try:
        from Cython.Build import cythonize
    except ImportError:
        return []
    ext = Extension(
        "volcast.backends._cykernels",
        ["src/volcast/backends/_cykernels.pyx"],
        extra_compile_args=["-O3"],
    )
    return cythonize([ext], compiler_directives={"language_level": "3"})


setup(ext_modules=_extensions())
