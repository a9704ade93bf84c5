"""Build hook for the optional compiled sampling/objective kernels.

The package is fully functional without the extension (a pure-Python twin of
the kernels is selected at import time); the extension is an accelerator for
the hot per-token loops, so a failed compile must not fail the install.
"""

import os

from setuptools import Extension, setup

_PYX = "src/prefalign/_speed.pyx"

extensions = []
if os.path.exists(_PYX):
    try:
        from Cython.Build import cythonize

        extensions = cythonize(
            [
                Extension(
                    "prefalign._speed",
                    [_PYX],
                    # -ffp-contract=off keeps float results bit-identical to
                    # the pure-Python fallback (no FMA contraction).
                    extra_compile_args=["-O3", "-ffp-contract=off"],
                    optional=True,
                )
            ],
            compiler_directives={"language_level": "3"},
        )
    except ImportError:
        pass

setup(ext_modules=extensions)
