"""Backend selection for the hot kernels.

``REINHARDT_BACKEND=numba`` (the default when numba imports) compiles the
loops in :mod:`reinhardt._kernels` with ``numba.njit``.  ``REINHARDT_BACKEND=numpy``
runs the same loops in the interpreter and uses the vectorised numpy sweep.
Both paths compute identical floating point results up to operation
reordering; the test suite checks that they agree.
"""

from __future__ import annotations

import logging
import os
import types
from types import SimpleNamespace

from . import _kernels

log = logging.getLogger(__name__)

_KERNEL_NAMES = (
    "tform",
    "control_hamiltonian",
    "disk_control",
    "select_control",
    "reinhardt_rhs",
    "renormalize",
    "rk4_extended",
    "fuller_rhs",
    "rk4_fuller",
    "abnormal_rhs",
    "rk4_abnormal",
    "_region_polys",
    "geometry_sweep_loop",
)

_cache: dict[str, SimpleNamespace] = {}


def numba_available() -> bool:
    try:
        import numba  # noqa: F401
    except ImportError:
        return False
    return True


def requested_backend() -> str:
    name = os.environ.get("REINHARDT_BACKEND", "").strip().lower()
    if name in ("", "auto"):
        return "numba" if numba_available() else "numpy"
    if name not in ("numba", "numpy"):
        raise ValueError(f"REINHARDT_BACKEND must be 'numba' or 'numpy', got {name!r}")
    if name == "numba" and not numba_available():
        log.warning("numba requested but not importable; using the numpy backend")
        return "numpy"
    return name


def _build_numba() -> SimpleNamespace:
    import numba

    # Rebuild every kernel against a private copy of the module globals in
    # which the callees are the jitted dispatchers.  numba resolves global
    # names when it compiles, so callers pick up the compiled versions.
    glb = dict(vars(_kernels))
    ns = SimpleNamespace(name="numba")
    for k in _KERNEL_NAMES:
        f = glb[k]
        clone = types.FunctionType(f.__code__, glb, f.__name__, f.__defaults__, f.__closure__)
        glb[k] = numba.njit(cache=False)(clone)
        setattr(ns, k, glb[k])
    ns.geometry_sweep = _jit_sweep(ns.geometry_sweep_loop)
    return ns


def _jit_sweep(loop):
    import numpy as np

    def sweep(xs, ys):
        xs = np.ascontiguousarray(xs, dtype=float)
        ys = np.ascontiguousarray(ys, dtype=float)
        out = np.empty((xs.shape[0], 10))
        loop(xs, ys, out)
        return out

    return sweep


def _build_numpy() -> SimpleNamespace:
    ns = SimpleNamespace(name="numpy")
    for k in _KERNEL_NAMES:
        setattr(ns, k, getattr(_kernels, k))
    ns.geometry_sweep = _kernels.geometry_sweep_numpy
    return ns


def kernels(name: str | None = None) -> SimpleNamespace:
    """Return the kernel namespace for ``name`` (default: the requested backend)."""
    name = name or requested_backend()
    if name not in _cache:
        _cache[name] = _build_numba() if name == "numba" else _build_numpy()
    return _cache[name]
