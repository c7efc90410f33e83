"""Kernel backend selection.

The compiled extension is used when it imports; setting
``GIBBSLAB_PURE_PYTHON=1`` forces the pure-Python kernels.
"""

import importlib
import os


def load(name: str | None = None):
    """Return the kernel module for ``"cython"`` or ``"python"``."""
    if name == "python":
        return importlib.import_module("gibbslab._pykernels")
    if name == "cython":
        return importlib.import_module("gibbslab._kernels")
    if name is not None:
        raise ValueError(f"unknown backend {name!r}")
    if os.environ.get("GIBBSLAB_PURE_PYTHON") != "1":
        try:
            return load("cython")
        except ImportError:
            pass
    return load("python")


kernels = load()
BACKEND = "cython" if kernels.__name__.endswith("._kernels") else "python"
