"""Build hook for the optional compiled kernel extension.

The package is fully functional without the extension (a numpy/scipy
fallback is selected at import time), so the extension is marked optional
and any build failure is non-fatal.
"""
from setuptools import Extension, setup

ext_modules = []
try:
    import numpy
    from Cython.Build import cythonize

    ext = Extension(
        "cmvscat._kernels._band_ext",
        ["src/cmvscat/_kernels/_band_ext.pyx"],
        include_dirs=[numpy.get_include()],
        extra_compile_args=["-O3"],
        define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
    )
    ext.optional = True
    ext_modules = cythonize(
        [ext],
        compiler_directives={"language_level": "3"},
    )
except ImportError:
    pass

setup(ext_modules=ext_modules)
