"""Backend selection for the hot kernels.

The compiled module is used when it imports; otherwise the pure-Python
twin. Setting ``POISEUILLE_LAB_BACKEND=python`` forces the fallback.
"""
import importlib
import os

_CHOICES = ("cython", "python")


def load_backend(name: str):
    """Return the kernel module called ``name`` (``"cython"`` or ``"python"``)."""
    if name == "cython":
        return importlib.import_module("poiseuille_lab._ckernels")
    if name == "python":
        return importlib.import_module("poiseuille_lab._pykernels")
    raise ValueError(f"unknown backend {name!r}; choose from {_CHOICES}")


def available_backends() -> list:
    out = []
    for name in _CHOICES:
        try:
            load_backend(name)
        except ImportError:
            continue
        out.append(name)
    return out


def _select():
    forced = os.environ.get("POISEUILLE_LAB_BACKEND", "").strip().lower()
    if forced:
        return load_backend(forced)
    try:
        return load_backend("cython")
    except ImportError:
        return load_backend("python")


backend = _select()
BACKEND = backend.NAME
