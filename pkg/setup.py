import numpy
from setuptools import Extension, setup
from Cython.Build import cythonize

# -ffp-contract=off: the pure-Python fallback must reproduce the compiled
# kernels bit-for-bit, so fused multiply-adds are disabled.
ext = Extension(
    "safepg._speedups",
    ["src/safepg/_speedups.pyx"],
    include_dirs=[numpy.get_include()],
    extra_compile_args=["-O2", "-ffp-contract=off"],
)

setup(ext_modules=cythonize([ext], language_level="3"))
