"""Build script: compiles the optional Cython stencil kernels.

The compiled extension is a pure speedup; every entry point has a NumPy
fallback selected at import time (see spcert._kernels). A missing compiler
or Cython therefore only costs performance, never functionality, so build
failures of the extension are swallowed.
"""

from setuptools import setup
from setuptools.command.build_ext import build_ext


class optional_build_ext(build_ext):
    """Never fail the install because the speedup extension would not build."""

    def run(self):
        try:
            super().run()
        except Exception as exc:  # compiler missing, etc.
            self._warn(exc)

    def build_extension(self, ext):
        try:
            super().build_extension(ext)
        except Exception as exc:
            self._warn(exc)

    @staticmethod
    def _warn(exc):
        print(f"WARNING: building the spcert kernel extension failed ({exc}); "
              "falling back to the NumPy kernels.")


def _extensions():
    try:
        import numpy
        from Cython.Build import cythonize
        from setuptools import Extension
    except ImportError as exc:
        print(f"WARNING: {exc}; skipping the compiled kernels.")
        return []
    ext = Extension(
        "spcert._kernels._stencils_cy",
        ["src/spcert/_kernels/_stencils_cy.pyx"],
        include_dirs=[numpy.get_include()],
        extra_compile_args=["-O3"],
    )
    return cythonize([ext], compiler_directives={"language_level": "3"})


setup(
    ext_modules=_extensions(),
    cmdclass={"build_ext": optional_build_ext},
)
