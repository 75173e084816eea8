import os

from setuptools import Extension, setup

ext_modules = []
if os.environ.get("MFFLOW_NO_EXTENSION") != "1":
    try:
        from Cython.Build import cythonize

        ext_modules = cythonize(
            [
                Extension(
                    "mfflow._kernel",
                    ["src/mfflow/_kernel.pyx"],
                    libraries=["quadmath"],
                    extra_compile_args=["-O2"],
                )
            ],
            compiler_directives={"language_level": 3},
        )
    except ImportError:
        ext_modules = []

setup(ext_modules=ext_modules)
