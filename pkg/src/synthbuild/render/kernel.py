"""Raster kernel backend selection.

The compiled extension is used when it was built; otherwise the numpy
implementation takes over. Both give bit-identical results.
"""

from __future__ import annotations

from . import _kernel_py

BACKENDS = {"numpy": _kernel_py.raster_triangles}

try:
    from . import _kernel_ext
except ImportError:  # extension not built
    _kernel_ext = None
else:
    BACKENDS["cython"] = _kernel_ext.raster_triangles

DEFAULT_BACKEND = "cython" if "cython" in BACKENDS else "numpy"


def get_kernel(name: str | None = None):
    name = name or DEFAULT_BACKEND
    try:
        return BACKENDS[name]
    except KeyError:
        raise ValueError(f"raster backend {name!r} unavailable (have {sorted(BACKENDS)})") from None
