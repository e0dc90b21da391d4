"""Build script: compiles the optional Cython fast path.

The package works without the extension (a numpy fallback is selected at
import time), so a missing compiler or Cython is not fatal.
"""

from setuptools import setup

ext_modules = []
try:
    from Cython.Build import cythonize
    import numpy as np

    ext_modules = cythonize(
        "src/gridbase/_fastpath.pyx",
        compiler_directives={"language_level": "3"},
    )
    for ext in ext_modules:
        ext.include_dirs.append(np.get_include())
except ImportError:
    pass

setup(ext_modules=ext_modules)
