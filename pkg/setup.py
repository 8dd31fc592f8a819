"""Build script: compiles the optional engine extension.

The package works without the extension (a numpy fallback is selected at
import time), so any failure here degrades to a pure-Python install rather
than aborting it.
"""

from setuptools import Extension, setup

ext_modules = []
try:
    from Cython.Build import cythonize

    ext_modules = cythonize(
        [
            Extension(
                "mdlpredict._engine.kernels_cy",
                ["src/mdlpredict/_engine/kernels_cy.pyx"],
                # -ffp-contract=off: no fused multiply-adds, the compiled
                # backend must be bitwise-identical to the numpy one
                extra_compile_args=["-O3", "-ffp-contract=off"],
            )
        ],
        compiler_directives={
            "language_level": "3",
            "boundscheck": False,
            "wraparound": False,
            "initializedcheck": False,
        },
    )
except Exception:
    ext_modules = []

setup(ext_modules=ext_modules)
