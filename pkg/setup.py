"""Builds the optional Cython kernels; the package falls back to numpy without them."""

import logging

from setuptools import setup
from setuptools.command.build_ext import build_ext

log = logging.getLogger("setup")


class OptionalBuildExt(build_ext):
    def run(self):
        try:
            super().run()
        except Exception as exc:  # no compiler or no OpenMP
            log.warning("compiled kernels not built (%s); the numpy fallback will be used", exc)

    def build_extension(self, ext):
        try:
            super().build_extension(ext)
        except Exception as exc:
            log.warning("building %s failed (%s); the numpy fallback will be used", ext.name, exc)


def extensions():
    try:
        import numpy as np
        from Cython.Build import cythonize
        from setuptools import Extension
    except ImportError:
        return []
    ext = Extension(
        "sharpfront._kernels",
        ["src/sharpfront/_kernels.pyx"],
        include_dirs=[np.get_include()],
        extra_compile_args=["-O3", "-fopenmp"],
        extra_link_args=["-fopenmp"],
    )
    return cythonize([ext], compiler_directives={"language_level": "3"})


setup(ext_modules=extensions(), cmdclass={"build_ext": OptionalBuildExt})
