from setuptools import Extension, setup
from Cython.Build import cythonize

extensions = [
    Extension(
        "simpleir.numerics._convkern",
        sources=["src/simpleir/numerics/_convkern.pyx"],
        extra_compile_args=["-O3"],
    )
]

setup(ext_modules=cythonize(extensions, language_level=3))
