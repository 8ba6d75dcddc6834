import numpy
from setuptools import Extension, setup
from Cython.Build import cythonize

# -ffp-contract=off keeps the compiled kernels bit-identical to the numpy
# fallback (no FMA contraction of a*b+c).
ext = Extension(
    "mlmcforecast._kernels._cykernels",
    ["src/mlmcforecast/_kernels/_cykernels.pyx"],
    include_dirs=[numpy.get_include()],
    extra_compile_args=["-O3", "-ffp-contract=off"],
)

setup(ext_modules=cythonize([ext], language_level=3))
