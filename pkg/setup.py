import numpy as np
from Cython.Build import cythonize
from setuptools import Extension, setup

# no -ffast-math: the energy sum must be reproducible bit for bit
extensions = [
    Extension(
        "annuli._ckernel",
        ["src/annuli/_ckernel.pyx"],
        include_dirs=[np.get_include()],
        define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
        extra_compile_args=["-O3"],
    )
]

setup(ext_modules=cythonize(extensions, compiler_directives={"language_level": "3"}))
