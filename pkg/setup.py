from setuptools import setup

try:
    from Cython.Build import cythonize
    from setuptools.extension import Extension

    ext_modules = cythonize(
        [
            Extension(
                "alspeech.kernels._editdist",
                ["src/alspeech/kernels/_editdist.pyx"],
                optional=True,
            )
        ]
    )
except ImportError:
    # no Cython at build time: the pure-Python kernel is used instead
    ext_modules = []

setup(ext_modules=ext_modules)
