"""Build script: compiles the optional native kernel extension.

The package works without it (a pure-Python fallback ships in-tree), so a
missing compiler or Cython only costs speed, not functionality.
"""

from pathlib import Path

from setuptools import setup

ext_modules = []
pyx = Path(__file__).parent / "src" / "rolemotion" / "_native.pyx"
if pyx.exists():
    try:
        from Cython.Build import cythonize
        from setuptools import Extension

        ext_modules = cythonize(
            [Extension("rolemotion._native", [str(pyx)],
                       extra_compile_args=["-O2"])],
            language_level=3,
        )
    except ImportError:
        pass

setup(ext_modules=ext_modules)
