from setuptools import Extension, setup
from Cython.Build import cythonize

# -ffp-contract=off: the kernel must reproduce the pure-Python stepper
# bit-for-bit, so fused multiply-adds are disabled.
ext_modules = [
    Extension(
        "gracecbf._kernel",
        ["src/gracecbf/_kernel.pyx"],
        extra_compile_args=["-O3", "-ffp-contract=off"],
    )
]

setup(ext_modules=cythonize(ext_modules, language_level="3"))
