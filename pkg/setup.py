"""Build script for the optional compiled match-scan kernel.

The package is fully functional without the extension; the matcher falls
back to a pure-Python kernel at import time. Set BRIDGETRACE_NO_EXTENSION=1
to skip compilation entirely.
"""

import os

from setuptools import Extension, setup

ext_modules = []
if os.environ.get("BRIDGETRACE_NO_EXTENSION") != "1":
    try:
        from Cython.Build import cythonize

        ext_modules = cythonize(
            [
                Extension(
                    "bridgetrace.match._scan",
                    ["src/bridgetrace/match/_scan.pyx"],
                    extra_compile_args=["-O3"],
                )
            ],
            compiler_directives={"language_level": "3"},
        )
    except ImportError:
        ext_modules = []

setup(ext_modules=ext_modules)
