"""Build hook for the optional compiled jet kernel.

The package is fully functional without the extension (a NumPy fallback is
selected at import time); the extension only accelerates the hot
multiply-accumulate loops of truncated Taylor arithmetic.
"""

from setuptools import setup

ext_modules = []
try:
    import numpy
    from setuptools import Extension
    from Cython.Build import cythonize

    ext_modules = cythonize(
        [
            Extension(
                "tractorlab.jets._jetkern",
                ["src/tractorlab/jets/_jetkern.pyx"],
                include_dirs=[numpy.get_include()],
                extra_compile_args=["-O3"],
            )
        ],
        compiler_directives={"language_level": "3"},
    )
except Exception as exc:  # pragma: no cover - build environment dependent
    import sys

    print(f"tractorlab: building without compiled kernel ({exc})", file=sys.stderr)

setup(ext_modules=ext_modules)
