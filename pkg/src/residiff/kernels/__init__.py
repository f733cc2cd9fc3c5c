"""Hot numeric kernels with two interchangeable lanes.

The numba lane compiles the inner loops with ``@njit``; the numpy lane is
plain Python/numpy.  Both lanes follow the same scan and accumulation order,
so integer-driven results (tours, node sets) are identical and float results
agree to rounding.

Lane selection happens once at import time from the environment variable
``RESIDIFF_BACKEND``:

* unset          -> numba when importable, numpy otherwise
* ``numba``      -> require the numba lane, raise if numba is missing
* ``numpy``      -> force the pure numpy/Python lane

Both implementation modules stay importable regardless of the flag so the
benchmark and the equivalence tests can compare lanes side by side.
"""

from __future__ import annotations

import os

from . import py_impl

_FLAG = os.environ.get("RESIDIFF_BACKEND", "").strip().lower()

if _FLAG not in ("", "numba", "numpy"):
    raise RuntimeError(
        f"RESIDIFF_BACKEND must be 'numba' or 'numpy', got {_FLAG!r}"
    )

if _FLAG == "numpy":
    _impl = py_impl
    BACKEND = "numpy"
else:
    try:
        from . import nb_impl as _impl  # noqa: F811

        BACKEND = "numba"
    except ImportError:
        if _FLAG == "numba":
            raise
        _impl = py_impl
        BACKEND = "numpy"


def active_backend() -> str:
    """Name of the kernel lane selected at import time."""
    return BACKEND


held_karp_core = _impl.held_karp_core
two_opt_pass = _impl.two_opt_pass
greedy_tour_core = _impl.greedy_tour_core
greedy_select_core = _impl.greedy_select_core
mis_bb_core = _impl.mis_bb_core
scatter_add_rows = _impl.scatter_add_rows

__all__ = [
    "BACKEND",
    "active_backend",
    "held_karp_core",
    "two_opt_pass",
    "greedy_tour_core",
    "greedy_select_core",
    "mis_bb_core",
    "scatter_add_rows",
    "py_impl",
]
